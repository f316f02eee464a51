//! Cascading decision tree: sequential area, compactness, intensity and hue
//! filters over measured blobs, with a per-stage audit trail.
//!
//! Every keep-interval is closed (boundary values survive). A blob
//! rejected at one stage is not examined by later stages, so the trace
//! records exactly one outcome per blob; the surviving candidate set is the
//! conjunction of all four predicates regardless of stage order.

use serde::{Deserialize, Serialize};

use crate::blob::{Blob, BlobSource};
use crate::error::{Error, Result};

/// The four filter thresholds, per branch where the reference operating
/// point distinguishes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub area_min: usize,
    pub area_max: usize,
    /// Compactness keep-interval for SEI blobs.
    pub compact_sei: (f64, f64),
    /// Compactness keep-interval for SHI blobs.
    pub compact_shi: (f64, f64),
    /// SEI blobs keep intensity midrange at or above this.
    pub intensity_sei_min: f64,
    /// SHI blobs keep intensity midrange at or below this.
    pub intensity_shi_max: f64,
    pub hue_sei: (f64, f64),
    pub hue_shi: (f64, f64),
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            area_min: 5,
            area_max: 5000,
            compact_sei: (0.55, 9.0),
            compact_shi: (0.7, 4.0),
            intensity_sei_min: 90.0,
            intensity_shi_max: 200.0,
            hue_sei: (0.125, 0.165),
            hue_shi: (0.06, 0.125),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.area_min < 1 {
            return Err(Error::InvalidConfig("cascade.area_min must be >= 1".into()));
        }
        if self.area_min > self.area_max {
            return Err(Error::InvalidConfig(format!(
                "cascade area interval inverted: {} > {}",
                self.area_min, self.area_max
            )));
        }
        for (name, (lo, hi)) in [
            ("compact_sei", self.compact_sei),
            ("compact_shi", self.compact_shi),
            ("hue_sei", self.hue_sei),
            ("hue_shi", self.hue_shi),
        ] {
            if lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "cascade.{name} interval inverted: {lo} > {hi}"
                )));
            }
        }
        Ok(())
    }
}

/// Pipeline stages in cascade order, as reported in the stage table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Preprocessing,
    Area,
    Compactness,
    Intensity,
    Hue,
    Postprocessing,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Preprocessing,
        Stage::Area,
        Stage::Compactness,
        Stage::Intensity,
        Stage::Hue,
        Stage::Postprocessing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocessing => "preprocessing",
            Stage::Area => "area",
            Stage::Compactness => "compactness",
            Stage::Intensity => "intensity",
            Stage::Hue => "hue",
            Stage::Postprocessing => "postprocessing",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What happened to one blob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobOutcome {
    Candidate,
    RejectedAt(Stage),
}

/// Survivors per stage plus the per-blob outcome, the row shape of the
/// stage table.
#[derive(Debug, Clone)]
pub struct CascadeTrace {
    /// Surviving blob ids after each stage, in [`Stage::ALL`] order.
    survivors: Vec<Vec<u32>>,
    /// `(blob id, outcome)` sorted by id.
    outcomes: Vec<(u32, BlobOutcome)>,
}

impl CascadeTrace {
    pub fn survivors_at(&self, stage: Stage) -> &[u32] {
        let idx = Stage::ALL.iter().position(|&s| s == stage).unwrap();
        &self.survivors[idx]
    }

    pub fn count_at(&self, stage: Stage) -> usize {
        self.survivors_at(stage).len()
    }

    pub fn outcomes(&self) -> &[(u32, BlobOutcome)] {
        &self.outcomes
    }

    pub fn outcome_of(&self, id: u32) -> Option<BlobOutcome> {
        self.outcomes
            .binary_search_by_key(&id, |&(bid, _)| bid)
            .ok()
            .map(|i| self.outcomes[i].1)
    }
}

fn keeps(blob: &Blob, stage: Stage, cfg: &CascadeConfig) -> bool {
    match stage {
        Stage::Area => blob.area >= cfg.area_min && blob.area <= cfg.area_max,
        Stage::Compactness => {
            let (lo, hi) = match blob.source {
                BlobSource::Sei => cfg.compact_sei,
                BlobSource::Shi => cfg.compact_shi,
            };
            blob.compactness >= lo && blob.compactness <= hi
        }
        Stage::Intensity => match blob.source {
            BlobSource::Sei => blob.intensity_mid >= cfg.intensity_sei_min,
            BlobSource::Shi => blob.intensity_mid <= cfg.intensity_shi_max,
        },
        Stage::Hue => {
            let Some(h) = blob.mean_hue else {
                return false; // achromatic blobs carry no lesion hue evidence
            };
            let (lo, hi) = match blob.source {
                BlobSource::Sei => cfg.hue_sei,
                BlobSource::Shi => cfg.hue_shi,
            };
            h >= lo && h <= hi
        }
        Stage::Preprocessing | Stage::Postprocessing => true,
    }
}

/// Runs the four filters in order and returns the surviving candidates plus
/// the full trace. Blob ids must be unique across the input.
pub fn run_cascade(blobs: &[Blob], cfg: &CascadeConfig) -> (Vec<Blob>, CascadeTrace) {
    let filter_stages = [Stage::Area, Stage::Compactness, Stage::Intensity, Stage::Hue];

    let mut outcomes: Vec<(u32, BlobOutcome)> =
        blobs.iter().map(|b| (b.id, BlobOutcome::Candidate)).collect();
    outcomes.sort_by_key(|&(id, _)| id);
    debug_assert!(
        outcomes.windows(2).all(|w| w[0].0 != w[1].0),
        "blob ids must be unique"
    );

    let mut alive: Vec<&Blob> = blobs.iter().collect();
    alive.sort_by_key(|b| b.id);
    let mut survivors: Vec<Vec<u32>> = Vec::with_capacity(Stage::ALL.len());
    survivors.push(alive.iter().map(|b| b.id).collect()); // preprocessing

    for stage in filter_stages {
        alive.retain(|b| {
            let keep = keeps(b, stage, cfg);
            if !keep {
                let idx = outcomes.binary_search_by_key(&b.id, |&(id, _)| id).unwrap();
                outcomes[idx].1 = BlobOutcome::RejectedAt(stage);
            }
            keep
        });
        survivors.push(alive.iter().map(|b| b.id).collect());
    }

    // Post-processing merges the two branches; the surviving set is the hue
    // survivors.
    survivors.push(alive.iter().map(|b| b.id).collect());

    let candidates: Vec<Blob> = alive.into_iter().cloned().collect();
    (candidates, CascadeTrace { survivors, outcomes })
}

/// Survivor counts in pipeline order, one row of the stage table.
pub fn stage_survivor_counts(trace: &CascadeTrace) -> Vec<(Stage, usize)> {
    Stage::ALL
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, trace.survivors[i].len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn test_blob(
        id: u32,
        source: BlobSource,
        area: usize,
        compactness: f64,
        intensity_mid: f64,
        mean_hue: Option<f64>,
    ) -> Blob {
        Blob {
            id,
            source,
            pixels: vec![(0, 0)],
            area,
            perimeter: 4,
            compactness,
            intensity_mid,
            mean_hue,
            centroid: (0.0, 0.0),
            orientation: 0.0,
        }
    }

    fn candidate(id: u32, source: BlobSource) -> Blob {
        let hue = match source {
            BlobSource::Sei => 0.14,
            BlobSource::Shi => 0.09,
        };
        let intensity = match source {
            BlobSource::Sei => 150.0,
            BlobSource::Shi => 80.0,
        };
        test_blob(id, source, 100, 1.2, intensity, Some(hue))
    }

    #[test]
    fn tiny_blob_rejected_at_area() {
        let blobs = vec![test_blob(1, BlobSource::Sei, 3, 1.0, 150.0, Some(0.14))];
        let (cands, trace) = run_cascade(&blobs, &CascadeConfig::default());
        assert!(cands.is_empty());
        assert_eq!(trace.outcome_of(1), Some(BlobOutcome::RejectedAt(Stage::Area)));
    }

    #[test]
    fn conforming_sei_blob_is_candidate() {
        let blobs = vec![candidate(1, BlobSource::Sei)];
        let (cands, trace) = run_cascade(&blobs, &CascadeConfig::default());
        assert_eq!(cands.len(), 1);
        assert_eq!(trace.outcome_of(1), Some(BlobOutcome::Candidate));
    }

    #[test]
    fn shi_compactness_ceiling_is_4() {
        let blobs = vec![test_blob(1, BlobSource::Shi, 100, 5.0, 80.0, Some(0.09))];
        let (cands, trace) = run_cascade(&blobs, &CascadeConfig::default());
        assert!(cands.is_empty());
        assert_eq!(trace.outcome_of(1), Some(BlobOutcome::RejectedAt(Stage::Compactness)));
        // The same compactness passes as SEI (ceiling 9).
        let blobs = vec![test_blob(1, BlobSource::Sei, 100, 5.0, 150.0, Some(0.14))];
        let (cands, _) = run_cascade(&blobs, &CascadeConfig::default());
        assert_eq!(cands.len(), 1);
    }

    #[test]
    fn boundary_values_survive() {
        let cfg = CascadeConfig::default();
        let blobs = vec![
            test_blob(1, BlobSource::Sei, cfg.area_min, 0.55, 90.0, Some(0.125)),
            test_blob(2, BlobSource::Sei, cfg.area_max, 9.0, 255.0, Some(0.165)),
            test_blob(3, BlobSource::Shi, 100, 0.7, 200.0, Some(0.06)),
            test_blob(4, BlobSource::Shi, 100, 4.0, 0.0, Some(0.125)),
        ];
        let (cands, _) = run_cascade(&blobs, &cfg);
        assert_eq!(cands.len(), 4);
    }

    #[test]
    fn undefined_hue_is_rejected_at_hue() {
        let blobs = vec![test_blob(1, BlobSource::Sei, 100, 1.0, 150.0, None)];
        let (cands, trace) = run_cascade(&blobs, &CascadeConfig::default());
        assert!(cands.is_empty());
        assert_eq!(trace.outcome_of(1), Some(BlobOutcome::RejectedAt(Stage::Hue)));
    }

    #[test]
    fn empty_input_gives_empty_trace() {
        let (cands, trace) = run_cascade(&[], &CascadeConfig::default());
        assert!(cands.is_empty());
        for (_, count) in stage_survivor_counts(&trace) {
            assert_eq!(count, 0);
        }
    }

    #[test]
    fn all_candidates_keep_constant_counts() {
        let blobs: Vec<Blob> = (1..=7).map(|i| candidate(i, BlobSource::Sei)).collect();
        let (_, trace) = run_cascade(&blobs, &CascadeConfig::default());
        for (_, count) in stage_survivor_counts(&trace) {
            assert_eq!(count, 7);
        }
    }

    #[test]
    fn all_rejected_at_area_zeroes_later_stages() {
        let blobs: Vec<Blob> =
            (1..=4).map(|i| test_blob(i, BlobSource::Sei, 1, 1.0, 150.0, Some(0.14))).collect();
        let (_, trace) = run_cascade(&blobs, &CascadeConfig::default());
        let counts: Vec<usize> =
            stage_survivor_counts(&trace).into_iter().map(|(_, c)| c).collect();
        assert_eq!(counts, vec![4, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn replayed_stage_table_row() {
        // A blob population engineered to walk through the reference
        // per-stage survivor counts 830 -> 684 -> 495 -> 442 -> 433; the
        // merge step keeps the hue survivors.
        let mut blobs = Vec::new();
        let mut id = 0u32;
        let mut push = |n: usize, f: &dyn Fn(u32) -> Blob| {
            for _ in 0..n {
                id += 1;
                blobs.push(f(id));
            }
        };
        push(146, &|i| test_blob(i, BlobSource::Sei, 1, 1.0, 150.0, Some(0.14)));
        push(189, &|i| test_blob(i, BlobSource::Sei, 100, 20.0, 150.0, Some(0.14)));
        push(53, &|i| test_blob(i, BlobSource::Sei, 100, 1.0, 50.0, Some(0.14)));
        push(9, &|i| test_blob(i, BlobSource::Sei, 100, 1.0, 150.0, Some(0.5)));
        push(433, &|i| candidate(i, BlobSource::Sei));
        assert_eq!(blobs.len(), 830);

        let (cands, trace) = run_cascade(&blobs, &CascadeConfig::default());
        let counts: Vec<usize> =
            stage_survivor_counts(&trace).into_iter().map(|(_, c)| c).collect();
        assert_eq!(counts, vec![830, 684, 495, 442, 433, 433]);
        assert_eq!(cands.len(), 433);
    }

    #[test]
    fn trace_counts_never_increase() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let blobs: Vec<Blob> = (1..=rng.random_range(1..60u32))
                .map(|i| {
                    let source =
                        if rng.random_bool(0.5) { BlobSource::Sei } else { BlobSource::Shi };
                    test_blob(
                        i,
                        source,
                        rng.random_range(1..8000),
                        rng.random_range(0.0..12.0),
                        rng.random_range(0.0..256.0),
                        rng.random_bool(0.9).then(|| rng.random_range(0.0..1.0)),
                    )
                })
                .collect();
            let (_, trace) = run_cascade(&blobs, &CascadeConfig::default());
            let counts: Vec<usize> =
                stage_survivor_counts(&trace).into_iter().map(|(_, c)| c).collect();
            for w in counts.windows(2) {
                assert!(w[1] <= w[0], "{counts:?}");
            }
        }
    }

    fn candidates_by_conjunction(blobs: &[Blob], cfg: &CascadeConfig) -> Vec<u32> {
        let mut ids: Vec<u32> = blobs
            .iter()
            .filter(|b| {
                [Stage::Area, Stage::Compactness, Stage::Intensity, Stage::Hue]
                    .iter()
                    .all(|&s| keeps(b, s, cfg))
            })
            .map(|b| b.id)
            .collect();
        ids.sort();
        ids
    }

    #[test]
    fn cascade_equals_conjunction_of_predicates() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(23);
        let cfg = CascadeConfig::default();
        let blobs: Vec<Blob> = (1..=500u32)
            .map(|i| {
                let source = if rng.random_bool(0.5) { BlobSource::Sei } else { BlobSource::Shi };
                test_blob(
                    i,
                    source,
                    rng.random_range(1..8000),
                    rng.random_range(0.0..12.0),
                    rng.random_range(0.0..256.0),
                    rng.random_bool(0.9).then(|| rng.random_range(0.0..0.3)),
                )
            })
            .collect();
        let (cands, _) = run_cascade(&blobs, &cfg);
        let mut ids: Vec<u32> = cands.iter().map(|b| b.id).collect();
        ids.sort();
        assert_eq!(ids, candidates_by_conjunction(&blobs, &cfg));
    }
}
