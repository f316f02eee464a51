//! Raster containers, file I/O, resizing and color-space conversions.
//!
//! Everything downstream works on three pixel rasters sharing a width/height
//! pair: [`ColorImage`] (RGB 8-bit), [`GrayImage`] (single channel 8-bit) and
//! [`BinaryMask`] (foreground booleans), plus a [`HueMap`] carrying per-pixel
//! HSV hue with a defined flag for achromatic pixels.

use std::path::Path;

use crate::error::{Error, Result};

/// RGB raster, row-major, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: u32,
    height: u32,
    data: Vec<[u8; 3]>,
}

/// Single-channel raster, row-major, 8-bit intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

/// Boolean raster, row-major, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

/// Per-pixel HSV hue in `[0, 1)`. Achromatic pixels (max == min over the
/// channels) carry no hue and are flagged undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct HueMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
    defined: Vec<bool>,
}

macro_rules! raster_common {
    ($ty:ty, $pixel:ty) => {
        impl $ty {
            pub fn width(&self) -> u32 {
                self.width
            }

            pub fn height(&self) -> u32 {
                self.height
            }

            pub fn dimensions(&self) -> (u32, u32) {
                (self.width, self.height)
            }

            #[inline]
            pub fn get(&self, x: u32, y: u32) -> $pixel {
                debug_assert!(x < self.width && y < self.height);
                self.data[(y * self.width + x) as usize]
            }

            #[inline]
            pub fn set(&mut self, x: u32, y: u32, value: $pixel) {
                debug_assert!(x < self.width && y < self.height);
                self.data[(y * self.width + x) as usize] = value;
            }

            pub fn pixels(&self) -> &[$pixel] {
                &self.data
            }
        }
    };
}

raster_common!(ColorImage, [u8; 3]);
raster_common!(GrayImage, u8);
raster_common!(BinaryMask, bool);

impl ColorImage {
    /// Builds an image from row-major RGB pixels.
    ///
    /// Panics if `pixels.len() != width * height` or either dimension is zero.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(pixels.len(), (width * height) as usize);
        Self { width, height, data: pixels }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self::from_pixels(width, height, vec![rgb; (width * height) as usize])
    }
}

impl GrayImage {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(pixels.len(), (width * height) as usize);
        Self { width, height, data: pixels }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::from_pixels(width, height, vec![value; (width * height) as usize])
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Row `y` as a contiguous slice.
    #[inline]
    pub fn row(&self, y: u32) -> &[u8] {
        let start = (y * self.width) as usize;
        &self.data[start..start + self.width as usize]
    }

    /// 256-bin intensity histogram.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }
}

impl BinaryMask {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be >= 1");
        assert_eq!(pixels.len(), (width * height) as usize);
        Self { width, height, data: pixels }
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_pixels(width, height, vec![false; (width * height) as usize])
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }
}

impl HueMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Hue at `(x, y)`, or `None` for achromatic pixels.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<f32> {
        debug_assert!(x < self.width && y < self.height);
        let i = (y * self.width + x) as usize;
        self.defined[i].then(|| self.values[i])
    }
}

/// Decodes a color image from `path` (PNG or binary PPM/PGM). Alpha is
/// discarded.
pub fn load_color(path: &Path) -> Result<ColorImage> {
    let decoded = image::open(path).map_err(|e| decode_error(path, e))?;
    let rgb = decoded.into_rgb8();
    let (width, height) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    Ok(ColorImage { width, height, data })
}

/// Decodes a single-channel image from `path`.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let decoded = image::open(path).map_err(|e| decode_error(path, e))?;
    let luma = decoded.into_luma8();
    let (width, height) = luma.dimensions();
    Ok(GrayImage { width, height, data: luma.into_raw() })
}

/// Decodes a mask from `path`. On disk masks are single-channel with
/// foreground 255; any value above 127 reads back as foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let gray = load_gray(path)?;
    Ok(BinaryMask {
        width: gray.width,
        height: gray.height,
        data: gray.data.iter().map(|&v| v > 127).collect(),
    })
}

fn decode_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(io) => Error::Io { path: path.to_path_buf(), source: io },
        other => Error::Decode { path: path.to_path_buf(), reason: other.to_string() },
    }
}

fn encode_error(path: &Path, err: image::ImageError) -> Error {
    match err {
        image::ImageError::IoError(io) => Error::Io { path: path.to_path_buf(), source: io },
        other => Error::Encode { path: path.to_path_buf(), reason: other.to_string() },
    }
}

/// Writes `img` losslessly to `path`; the format follows the extension
/// (`.png`, `.ppm`).
pub fn save_color(img: &ColorImage, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(img.data.len() * 3);
    for p in &img.data {
        raw.extend_from_slice(p);
    }
    let buf: image::RgbImage =
        image::ImageBuffer::from_raw(img.width, img.height, raw).expect("raster invariant");
    buf.save(path).map_err(|e| encode_error(path, e))
}

/// Writes `img` losslessly to `path` (`.png`, `.pgm`).
pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let buf: image::GrayImage =
        image::ImageBuffer::from_raw(img.width, img.height, img.data.clone())
            .expect("raster invariant");
    buf.save(path).map_err(|e| encode_error(path, e))
}

/// Writes `mask` as a single-channel image with foreground 255, background 0.
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let gray = GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
    };
    save_gray(&gray, path)
}

/// Bilinear resize to exactly `target_w` x `target_h`.
///
/// Sample positions are pixel-center aligned, so a resize to the source
/// dimensions reproduces the input bit for bit.
pub fn resize_to_standard(img: &ColorImage, target_w: u32, target_h: u32) -> Result<ColorImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be at least 1x1, got {target_w}x{target_h}"
        )));
    }
    if (target_w, target_h) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / target_w as f64;
    let sy = img.height as f64 / target_h as f64;
    let mut data = Vec::with_capacity((target_w * target_h) as usize);
    for y in 0..target_h {
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = src_y.floor() as u32;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = src_y - y0 as f64;
        for x in 0..target_w {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = src_x.floor() as u32;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = src_x - x0 as f64;
            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut out = [0u8; 3];
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                out[c] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            data.push(out);
        }
    }
    Ok(ColorImage { width: target_w, height: target_h, data })
}

/// ITU-R BT.601 luma conversion: `round(0.299 r + 0.587 g + 0.114 b)`.
pub fn to_gray(img: &ColorImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage { width: img.width, height: img.height, data }
}

/// Hexagonal HSV hue normalized to `[0, 1)`; achromatic pixels are flagged
/// undefined.
pub fn to_hue(img: &ColorImage) -> HueMap {
    let n = img.data.len();
    let mut values = vec![0.0f32; n];
    let mut defined = vec![false; n];
    for (i, &[r, g, b]) in img.data.iter().enumerate() {
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        if max == min {
            continue;
        }
        let delta = (max - min) as f64;
        let (rf, gf, bf) = (r as f64, g as f64, b as f64);
        let h6 = if max == r {
            ((gf - bf) / delta).rem_euclid(6.0)
        } else if max == g {
            (bf - rf) / delta + 2.0
        } else {
            (rf - gf) / delta + 4.0
        };
        let mut h = (h6 / 6.0) as f32;
        if h >= 1.0 {
            h = 0.0;
        }
        values[i] = h;
        defined[i] = true;
    }
    HueMap { width: img.width, height: img.height, values, defined }
}
