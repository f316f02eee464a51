//! Detection of bright and dark anomalies (exudates, haemorrhages,
//! micro-aneurysms) in retinal fundus images.
//!
//! The pipeline stages are:
//!
//! 1. **Pre-processing** — resize, grayscale, CLAHE, disk top-hat/bottom-hat
//!    differencing, Otsu binarization and mask cleanup, producing the
//!    suspected-exudates (SEI) and suspected-haemorrhages (SHI) masks.
//! 2. **Blobbing** — 8-connected component labeling and feature
//!    measurement (area, perimeter, compactness, intensity midrange, mean
//!    hue, centroid, orientation).
//! 3. **Cascade** — sequential area, compactness, intensity and hue
//!    threshold filters with a per-stage audit trail.
//! 4. **Post-processing** — oriented enclosing ellipses drawn on the image.
//! 5. **Evaluation** — pixel recall against ground-truth masks, per stage,
//!    with a CSV stage table; plus a synthetic fundus generator for
//!    desk-scale evaluation.

pub mod blob;
pub mod cascade;
pub mod config;
pub mod enhancement;
pub mod error;
pub mod eval;
pub mod morphology;
pub mod pipeline;
pub mod postprocess;
pub mod raster;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
