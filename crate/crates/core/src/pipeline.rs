//! End-to-end composition: pre-processing, blobbing, the cascade and the
//! ellipse annotations for one image.

use crate::blob::{measure_blob, Blob, BlobSource};
use crate::cascade::{run_cascade, CascadeTrace};
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::postprocess::{blob_to_ellipse, EllipseAnnotation};
use crate::raster::ColorImage;
use crate::segmentation::{preprocess, PreprocessOutput};

/// Everything one detection run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub pre: PreprocessOutput,
    /// All measured blobs from both masks, ids unique across branches.
    pub blobs: Vec<Blob>,
    pub candidates: Vec<Blob>,
    pub trace: CascadeTrace,
    pub annotations: Vec<EllipseAnnotation>,
}

/// Labels both masks and measures every component. SEI blobs come first;
/// ids are 1-based and unique across the two branches.
pub fn collect_blobs(pre: &PreprocessOutput) -> Result<Vec<Blob>> {
    let mut blobs = Vec::new();
    let mut next_id = 1u32;
    for (mask, source) in [(&pre.sei, BlobSource::Sei), (&pre.shi, BlobSource::Shi)] {
        for pixels in crate::blob::label_components(mask) {
            blobs.push(measure_blob(next_id, pixels, source, &pre.gray, &pre.hue)?);
            next_id += 1;
        }
    }
    Ok(blobs)
}

/// Runs the whole pipeline on one color image.
pub fn run_pipeline(img: &ColorImage, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let pre = preprocess(img, cfg)?;
    let blobs = collect_blobs(&pre)?;
    let (candidates, trace) = run_cascade(&blobs, &cfg.cascade);
    let annotations = candidates.iter().map(blob_to_ellipse).collect();
    Ok(PipelineRun { pre, blobs, candidates, trace, annotations })
}
