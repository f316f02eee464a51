//! Result evaluation: pixel recall against ground truth, per-stage metrics
//! and the stage-table CSV report.

use std::path::Path;

use crate::blob::Blob;
use crate::cascade::{CascadeTrace, Stage};
use crate::config::Scoring;
use crate::error::{Error, Result};
use crate::postprocess::{blob_to_ellipse, candidate_mask, ellipse_interior_mask};
use crate::raster::BinaryMask;

/// Expert-marked lesion pixels; any lesion class counts as foreground.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub mask: BinaryMask,
}

/// Pixel recall (sensitivity): `TP / (TP + FN)`.
///
/// False positives do not enter; an empty ground truth scores 1.0 (there
/// was nothing to find).
pub fn recall(pred: &BinaryMask, gt: &GroundTruth) -> Result<f64> {
    if pred.dimensions() != gt.mask.dimensions() {
        return Err(Error::dims(gt.mask.dimensions(), pred.dimensions()));
    }
    let mut tp = 0u64;
    let mut fn_ = 0u64;
    for (&p, &g) in pred.pixels().iter().zip(gt.mask.pixels()) {
        if g {
            if p {
                tp += 1;
            } else {
                fn_ += 1;
            }
        }
    }
    if tp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok(tp as f64 / (tp + fn_) as f64)
}

/// One stage-table cell: survivors and the recall of their union mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageMetric {
    pub stage: Stage,
    pub blob_count: usize,
    pub recall: f64,
}

/// Computes blob count and recall for every pipeline stage.
///
/// Each stage's mask is the union of the pixels of its surviving blobs.
/// Under [`Scoring::EllipseInterior`] the post-processing stage instead
/// scores the filled fitted ellipses of the candidates.
pub fn stage_recalls(
    trace: &CascadeTrace,
    blobs: &[Blob],
    gt: &GroundTruth,
    dims: (u32, u32),
    scoring: Scoring,
) -> Result<Vec<StageMetric>> {
    let by_id: std::collections::HashMap<u32, &Blob> =
        blobs.iter().map(|b| (b.id, b)).collect();
    let mut metrics = Vec::with_capacity(Stage::ALL.len());
    for stage in Stage::ALL {
        let ids = trace.survivors_at(stage);
        let survivors: Vec<Blob> =
            ids.iter().filter_map(|id| by_id.get(id)).map(|&b| b.clone()).collect();
        let mask = if stage == Stage::Postprocessing && scoring == Scoring::EllipseInterior {
            let annotations: Vec<_> = survivors.iter().map(blob_to_ellipse).collect();
            ellipse_interior_mask(&annotations, dims.0, dims.1)
        } else {
            candidate_mask(&survivors, dims.0, dims.1)
        };
        metrics.push(StageMetric {
            stage,
            blob_count: ids.len(),
            recall: recall(&mask, gt)?,
        });
    }
    Ok(metrics)
}

/// Per-image stage metrics plus the derived mean row.
#[derive(Debug, Clone, Default)]
pub struct EvaluationReport {
    images: Vec<(String, Vec<StageMetric>)>,
}

impl EvaluationReport {
    pub fn push_image(&mut self, name: impl Into<String>, metrics: Vec<StageMetric>) {
        assert_eq!(metrics.len(), Stage::ALL.len());
        self.images.push((name.into(), metrics));
    }

    pub fn images(&self) -> &[(String, Vec<StageMetric>)] {
        &self.images
    }

    /// Arithmetic mean over images, per stage: `(stage, mean count, mean recall)`.
    pub fn mean_rows(&self) -> Vec<(Stage, f64, f64)> {
        let n = self.images.len().max(1) as f64;
        Stage::ALL
            .iter()
            .enumerate()
            .map(|(i, &stage)| {
                let count: f64 =
                    self.images.iter().map(|(_, m)| m[i].blob_count as f64).sum::<f64>() / n;
                let rec: f64 = self.images.iter().map(|(_, m)| m[i].recall).sum::<f64>() / n;
                (stage, count, rec)
            })
            .collect()
    }

    /// Mean recall of the final (post-processing) stage.
    pub fn mean_final_recall(&self) -> f64 {
        self.mean_rows().last().map(|&(_, _, r)| r).unwrap_or(1.0)
    }

    /// Stage-table CSV: `image,stage,blob_count,recall_pct`, one block per
    /// image followed by the mean rows. Recall is printed as percent with
    /// two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,stage,blob_count,recall_pct\n");
        for (name, metrics) in &self.images {
            for m in metrics {
                out.push_str(&format!(
                    "{},{},{},{:.2}\n",
                    name,
                    m.stage,
                    m.blob_count,
                    m.recall * 100.0
                ));
            }
        }
        for (stage, count, rec) in self.mean_rows() {
            out.push_str(&format!("mean,{},{:.2},{:.2}\n", stage, count, rec * 100.0));
        }
        out
    }
}

/// Writes the stage-table CSV (LF line endings).
pub fn write_report(report: &EvaluationReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv())
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// One parsed row of a stage-table CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub image: String,
    pub stage: Stage,
    pub blob_count: f64,
    pub recall_pct: f64,
}

/// Parses a stage-table CSV written by [`write_report`].
pub fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "image,stage,blob_count,recall_pct" {
        return Err(Error::InvalidArgument(format!("unexpected report header {header:?}")));
    }
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "report line {}: expected 4 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let stage = Stage::from_name(fields[1]).ok_or_else(|| {
            Error::InvalidArgument(format!("report line {}: unknown stage {:?}", lineno + 2, fields[1]))
        })?;
        let parse_num = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("report line {}: bad number {s:?}", lineno + 2))
            })
        };
        rows.push(ReportRow {
            image: fields[0].to_string(),
            stage,
            blob_count: parse_num(fields[2])?,
            recall_pct: parse_num(fields[3])?,
        });
    }
    Ok(rows)
}

/// Reads a stage-table CSV from disk.
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    parse_report(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_of(w: u32, h: u32, px: &[(u32, u32)]) -> BinaryMask {
        let mut m = BinaryMask::empty(w, h);
        for &(x, y) in px {
            m.set(x, y, true);
        }
        m
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gt = GroundTruth { mask: mask_of(8, 8, &[(1, 1), (2, 2), (3, 3)]) };
        assert_eq!(recall(&gt.mask.clone(), &gt).unwrap(), 1.0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let gt = GroundTruth { mask: mask_of(8, 8, &[(1, 1)]) };
        assert_eq!(recall(&BinaryMask::empty(8, 8), &gt).unwrap(), 0.0);
    }

    #[test]
    fn false_positives_do_not_change_recall() {
        // 10 gt pixels, prediction covers 5 of them plus 100 strays.
        let gt_px: Vec<(u32, u32)> = (0..10).map(|i| (i, 0)).collect();
        let gt = GroundTruth { mask: mask_of(32, 32, &gt_px) };
        let mut pred_px: Vec<(u32, u32)> = gt_px[..5].to_vec();
        for i in 0..100u32 {
            pred_px.push((i % 32, 5 + i / 32));
        }
        let pred = mask_of(32, 32, &pred_px);
        assert_eq!(recall(&pred, &gt).unwrap(), 0.5);
    }

    #[test]
    fn empty_ground_truth_scores_one() {
        let gt = GroundTruth { mask: BinaryMask::empty(4, 4) };
        assert_eq!(recall(&mask_of(4, 4, &[(0, 0)]), &gt).unwrap(), 1.0);
    }

    #[test]
    fn recall_rejects_dimension_mismatch() {
        let gt = GroundTruth { mask: BinaryMask::empty(4, 4) };
        assert!(recall(&BinaryMask::empty(5, 4), &gt).is_err());
    }

    #[test]
    fn recall_is_monotone_in_prediction() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..30 {
            let gt = GroundTruth {
                mask: BinaryMask::from_pixels(
                    16,
                    16,
                    (0..256).map(|_| rng.random_bool(0.2)).collect(),
                ),
            };
            let mut pred = BinaryMask::from_pixels(
                16,
                16,
                (0..256).map(|_| rng.random_bool(0.3)).collect(),
            );
            let before = recall(&pred, &gt).unwrap();
            pred.set(rng.random_range(0..16), rng.random_range(0..16), true);
            let after = recall(&pred, &gt).unwrap();
            assert!(after >= before);
        }
    }

    #[test]
    fn csv_report_shape_and_round_trip() {
        let metrics: Vec<StageMetric> = Stage::ALL
            .iter()
            .enumerate()
            .map(|(i, &stage)| StageMetric {
                stage,
                blob_count: 10 - i,
                recall: 1.0 - i as f64 * 0.05,
            })
            .collect();
        let mut report = EvaluationReport::default();
        report.push_image("img_000", metrics);

        let csv = report.to_csv();
        let rows = parse_report(&csv).unwrap();
        // 6 image rows + 6 mean rows.
        assert_eq!(rows.len(), 12);
        // Single image: mean equals the image.
        for (img_row, mean_row) in rows[..6].iter().zip(&rows[6..]) {
            assert_eq!(mean_row.image, "mean");
            assert_eq!(img_row.stage, mean_row.stage);
            assert!((img_row.blob_count - mean_row.blob_count).abs() < 1e-9);
            assert!((img_row.recall_pct - mean_row.recall_pct).abs() < 1e-9);
        }
        // Serialize -> parse -> serialize is a fixed point.
        let reparsed = parse_report(&csv).unwrap();
        assert_eq!(rows, reparsed);
    }

    #[test]
    fn ten_image_report_has_66_data_rows() {
        let mut report = EvaluationReport::default();
        for i in 0..10 {
            let metrics: Vec<StageMetric> = Stage::ALL
                .iter()
                .map(|&stage| StageMetric { stage, blob_count: 5, recall: 0.9 })
                .collect();
            report.push_image(format!("img_{i:03}"), metrics);
        }
        let rows = parse_report(&report.to_csv()).unwrap();
        assert_eq!(rows.len(), 66);
    }
}
