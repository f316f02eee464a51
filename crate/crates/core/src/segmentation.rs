//! Pre-processing: builds the suspected-exudates image (SEI, bright
//! lesions) and suspected-haemorrhages image (SHI, dark lesions).
//!
//! The chain is resize -> grayscale -> CLAHE, then hat transforms with a
//! disk structuring element. The bright branch keeps where top-hat exceeds
//! bottom-hat, the dark branch the reverse; each branch is
//! contrast-stretched, binarized with Otsu and cleaned with a closing
//! followed by an opening.

use crate::config::PipelineConfig;
use crate::enhancement::{adjust_intensity, clahe};
use crate::error::Result;
use crate::morphology::{
    bothat, close_mask, open_mask, subtract_saturating, tophat, StructuringElement,
};
use crate::raster::{to_gray, to_hue, BinaryMask, ColorImage, GrayImage, HueMap};

/// Pre-processing result consumed by blob analysis.
#[derive(Debug, Clone)]
pub struct PreprocessOutput {
    /// Post-CLAHE grayscale; the intensity reference for blob features.
    pub gray: GrayImage,
    pub sei: BinaryMask,
    pub shi: BinaryMask,
    /// Hue of the resized color image.
    pub hue: HueMap,
}

/// All intermediate rasters, for stage dumps and tests.
#[derive(Debug, Clone)]
pub struct PreprocessStages {
    pub resized: ColorImage,
    pub gray_raw: GrayImage,
    pub gray_clahe: GrayImage,
    /// Bright-branch difference after the contrast stretch.
    pub bright: GrayImage,
    /// Dark-branch difference after the contrast stretch.
    pub dark: GrayImage,
    pub bright_threshold: u8,
    pub dark_threshold: u8,
    pub sei: BinaryMask,
    pub shi: BinaryMask,
    pub hue: HueMap,
}

impl PreprocessStages {
    pub fn into_output(self) -> PreprocessOutput {
        PreprocessOutput { gray: self.gray_clahe, sei: self.sei, shi: self.shi, hue: self.hue }
    }
}

/// Otsu's threshold: maximizes between-class variance over the 256-bin
/// histogram; ties resolve to the smallest threshold. A single-bin
/// histogram returns that bin, so a strictly-greater binarization yields an
/// empty mask.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    otsu_from_histogram(&img.histogram())
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let occupied: Vec<usize> = (0..256).filter(|&v| hist[v] > 0).collect();
    if occupied.len() <= 1 {
        return occupied.first().copied().unwrap_or(0) as u8;
    }
    let total: u64 = hist.iter().sum();
    let sum_total: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    let mut w0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..256usize {
        w0 += hist[t];
        s0 += t as u64 * hist[t];
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = s0 as f64 / w0 as f64;
        let m1 = (sum_total - s0) as f64 / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Foreground = strictly greater than the threshold.
pub fn binarize_above(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask::from_pixels(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| v > threshold).collect(),
    )
}

/// Runs the full pre-processing chain, keeping every intermediate raster.
pub fn preprocess_stages(img: &ColorImage, cfg: &PipelineConfig) -> Result<PreprocessStages> {
    let (tw, th) = cfg.standard_size;
    let resized = crate::raster::resize_to_standard(img, tw, th)?;
    let gray_raw = to_gray(&resized);
    let gray_clahe = clahe(&gray_raw, &cfg.clahe)?;
    let hue = to_hue(&resized);

    let se = StructuringElement::disk(cfg.se_radius);
    let th_img = tophat(&gray_clahe, &se);
    let bh_img = bothat(&gray_clahe, &se);
    let bright_diff = subtract_saturating(&th_img, &bh_img);
    let dark_diff = subtract_saturating(&bh_img, &th_img);

    let cleanup = StructuringElement::disk(cfg.cleanup_radius);
    let branch = |diff: &GrayImage| -> (GrayImage, u8, BinaryMask) {
        let stretched = adjust_intensity(diff, cfg.stretch_low, cfg.stretch_high);
        let threshold = otsu_threshold(&stretched);
        let raw_mask = binarize_above(&stretched, threshold);
        let mask = open_mask(&close_mask(&raw_mask, &cleanup), &cleanup);
        (stretched, threshold, mask)
    };

    let (bright, bright_threshold, sei) = branch(&bright_diff);
    let (dark, dark_threshold, shi) = branch(&dark_diff);

    Ok(PreprocessStages {
        resized,
        gray_raw,
        gray_clahe,
        bright,
        dark,
        bright_threshold,
        dark_threshold,
        sei,
        shi,
        hue,
    })
}

/// Runs pre-processing and returns the rasters downstream stages need.
pub fn preprocess(img: &ColorImage, cfg: &PipelineConfig) -> Result<PreprocessOutput> {
    Ok(preprocess_stages(img, cfg)?.into_output())
}
