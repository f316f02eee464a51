//! Pipeline configuration.
//!
//! All settings live in one record with defaults matching the reference
//! operating point, so an empty config file runs the standard pipeline.
//! On disk the format is TOML with dotted keys (`cascade.area_min = 5`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::enhancement::ClaheParams;
use crate::error::{Error, Result};
use crate::synth::SynthSpec;

/// How the final-stage mask is built for scoring: the candidate blobs'
/// own pixels, or the filled interiors of their fitted ellipses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    BlobPixels,
    EllipseInterior,
}

impl std::str::FromStr for Scoring {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "blob_pixels" => Ok(Scoring::BlobPixels),
            "ellipse_interior" => Ok(Scoring::EllipseInterior),
            other => Err(format!(
                "unknown scoring mode {other:?} (expected blob_pixels or ellipse_interior)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Working size every input is resampled to, width x height.
    pub standard_size: (u32, u32),
    pub clahe: ClaheParams,
    /// Quantile fractions for the per-branch contrast stretch.
    pub stretch_low: f64,
    pub stretch_high: f64,
    /// Radius of the hat-transform structuring element.
    pub se_radius: u32,
    /// Radius of the close/open mask cleanup after binarization.
    pub cleanup_radius: u32,
    pub cascade: CascadeConfig,
    pub scoring: Scoring,
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            standard_size: (752, 500),
            clahe: ClaheParams::default(),
            stretch_low: 0.01,
            stretch_high: 0.01,
            se_radius: 12,
            cleanup_radius: 1,
            cascade: CascadeConfig::default(),
            scoring: Scoring::BlobPixels,
            synth: SynthSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.standard_size;
        if w < 1 || h < 1 {
            return Err(Error::InvalidConfig(format!("standard_size must be at least 1x1, got {w}x{h}")));
        }
        self.clahe.validate()?;
        if !(0.0..0.5).contains(&self.stretch_low) || !(0.0..0.5).contains(&self.stretch_high) {
            return Err(Error::InvalidConfig(format!(
                "stretch fractions must lie in [0, 0.5), got {} and {}",
                self.stretch_low, self.stretch_high
            )));
        }
        if self.se_radius < 1 {
            return Err(Error::InvalidConfig("se_radius must be >= 1".into()));
        }
        self.cascade.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
