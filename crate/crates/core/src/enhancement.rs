//! Contrast enhancement: CLAHE and global linear intensity stretch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// CLAHE tiling and clip settings.
///
/// `clip_limit` is a multiple of the uniform histogram bin height
/// (`tile_pixels / 256`); bins above it are clipped and the excess is
/// redistributed uniformly in a single pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClaheParams {
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub clip_limit: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self { tiles_x: 8, tiles_y: 8, clip_limit: 3.0 }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if self.tiles_x < 1 || self.tiles_y < 1 {
            return Err(Error::InvalidConfig(format!(
                "clahe tile grid must be at least 1x1, got {}x{}",
                self.tiles_x, self.tiles_y
            )));
        }
        if !(self.clip_limit > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "clahe clip_limit must be > 1.0, got {}",
                self.clip_limit
            )));
        }
        Ok(())
    }
}

/// One tile's intensity mapping: clipped-histogram CDF scaled to [0, 255].
fn tile_mapping(hist: &[u64; 256], tile_pixels: u64, clip_limit: f64) -> [u8; 256] {
    let clip = clip_limit * tile_pixels as f64 / 256.0;
    let mut bins = [0f64; 256];
    let mut excess = 0.0;
    for (b, &count) in bins.iter_mut().zip(hist.iter()) {
        let c = count as f64;
        if c > clip {
            excess += c - clip;
            *b = clip;
        } else {
            *b = c;
        }
    }
    let share = excess / 256.0;
    let mut mapping = [0u8; 256];
    let mut cdf = 0.0;
    for (m, b) in mapping.iter_mut().zip(bins.iter()) {
        cdf += b + share;
        *m = (cdf * 255.0 / tile_pixels as f64).round().clamp(0.0, 255.0) as u8;
    }
    mapping
}

/// Contrast-limited adaptive histogram equalization.
///
/// The image is divided into a `tiles_x` x `tiles_y` grid; each tile gets a
/// clipped-CDF mapping and every pixel blends the mappings of the (up to
/// four) tiles whose centers surround it. Pixels beyond the outermost tile
/// centers fall back to the one or two available tiles.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    params.validate()?;
    let (w, h) = img.dimensions();
    let (tx, ty) = (params.tiles_x, params.tiles_y);
    if w < tx || h < ty {
        return Err(Error::ImageSmallerThanTileGrid {
            width: w,
            height: h,
            tiles_x: tx,
            tiles_y: ty,
        });
    }

    // Tile bounds by integer split; centers in continuous pixel coordinates.
    let x_bound = |i: u32| (i as u64 * w as u64 / tx as u64) as u32;
    let y_bound = |j: u32| (j as u64 * h as u64 / ty as u64) as u32;
    let x_center: Vec<f64> =
        (0..tx).map(|i| (x_bound(i) + x_bound(i + 1)) as f64 / 2.0 - 0.5).collect();
    let y_center: Vec<f64> =
        (0..ty).map(|j| (y_bound(j) + y_bound(j + 1)) as f64 / 2.0 - 0.5).collect();

    let mut mappings = vec![[0u8; 256]; (tx * ty) as usize];
    for j in 0..ty {
        for i in 0..tx {
            let (x0, x1) = (x_bound(i), x_bound(i + 1));
            let (y0, y1) = (y_bound(j), y_bound(j + 1));
            let mut hist = [0u64; 256];
            for y in y0..y1 {
                for &v in &img.row(y)[x0 as usize..x1 as usize] {
                    hist[v as usize] += 1;
                }
            }
            let tile_pixels = (x1 - x0) as u64 * (y1 - y0) as u64;
            mappings[(j * tx + i) as usize] =
                tile_mapping(&hist, tile_pixels, params.clip_limit);
        }
    }

    // For a coordinate, the two bracketing tile indices and the blend weight
    // toward the second one. Outside the outer centers the weight collapses
    // onto the single nearest tile.
    let bracket = |centers: &[f64], pos: f64| -> (usize, usize, f64) {
        if pos <= centers[0] {
            return (0, 0, 0.0);
        }
        let last = centers.len() - 1;
        if pos >= centers[last] {
            return (last, last, 0.0);
        }
        let i = centers.iter().rposition(|&c| c <= pos).unwrap();
        let t = (pos - centers[i]) / (centers[i + 1] - centers[i]);
        (i, i + 1, t)
    };

    let mut out = GrayImage::filled(w, h, 0);
    for y in 0..h {
        let (j0, j1, fy) = bracket(&y_center, y as f64);
        for x in 0..w {
            let (i0, i1, fx) = bracket(&x_center, x as f64);
            let v = img.get(x, y) as usize;
            let m00 = mappings[j0 as usize * tx as usize + i0][v] as f64;
            let m10 = mappings[j0 as usize * tx as usize + i1][v] as f64;
            let m01 = mappings[j1 as usize * tx as usize + i0][v] as f64;
            let m11 = mappings[j1 as usize * tx as usize + i1][v] as f64;
            let top = m00 * (1.0 - fx) + m10 * fx;
            let bot = m01 * (1.0 - fx) + m11 * fx;
            let blended = top * (1.0 - fy) + bot * fy;
            out.set(x, y, blended.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

/// Linear contrast stretch mapping the `low_frac` and `1 - high_frac`
/// quantiles of the histogram to 0 and 255. Degenerate ranges (constant
/// images, or responses too sparse to separate the quantiles) pass through
/// unchanged.
pub fn adjust_intensity(img: &GrayImage, low_frac: f64, high_frac: f64) -> GrayImage {
    assert!(
        (0.0..0.5).contains(&low_frac) && (0.0..0.5).contains(&high_frac),
        "stretch fractions must lie in [0, 0.5)"
    );
    let hist = img.histogram();
    let total = img.pixels().len() as u64;

    // Lowest index whose cumulative count crosses the target mass.
    let quantile = |target: f64| -> u8 {
        let target = target * total as f64;
        let mut cum = 0u64;
        for (v, &count) in hist.iter().enumerate() {
            cum += count;
            if cum as f64 > target {
                return v as u8;
            }
        }
        255
    };

    let lo = quantile(low_frac);
    let hi = quantile(1.0 - high_frac - f64::EPSILON);
    if hi <= lo {
        return img.clone();
    }
    let scale = 255.0 / (hi - lo) as f64;
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let stretched = (v as f64 - lo as f64) * scale;
        *slot = stretched.round().clamp(0.0, 255.0) as u8;
    }
    GrayImage::from_pixels(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| lut[v as usize]).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent clipped-CDF evaluation for a single tile.
    fn clipped_cdf_oracle(hist: &[u64; 256], clip_limit: f64, v: u8) -> u8 {
        let n: u64 = hist.iter().sum();
        let clip = clip_limit * n as f64 / 256.0;
        let clipped: Vec<f64> = hist.iter().map(|&c| (c as f64).min(clip)).collect();
        let excess: f64 = hist
            .iter()
            .zip(&clipped)
            .map(|(&orig, &cl)| orig as f64 - cl)
            .sum();
        let cdf: f64 = clipped[..=v as usize].iter().sum::<f64>()
            + (v as f64 + 1.0) * excess / 256.0;
        (cdf * 255.0 / n as f64).round().clamp(0.0, 255.0) as u8
    }

    fn uniform_image() -> GrayImage {
        // 256x4: every intensity appears exactly 4 times.
        let mut data = Vec::with_capacity(1024);
        for y in 0..4 {
            let _ = y;
            for v in 0..=255u8 {
                data.push(v);
            }
        }
        GrayImage::from_pixels(256, 4, data)
    }

    #[test]
    fn uniform_histogram_single_tile_maps_near_identity() {
        let img = uniform_image();
        let params = ClaheParams { tiles_x: 1, tiles_y: 1, clip_limit: 1000.0 };
        let out = clahe(&img, &params).unwrap();
        for (i, (&a, &b)) in img.pixels().iter().zip(out.pixels()).enumerate() {
            assert!((a as i32 - b as i32).abs() <= 1, "pixel {i}: {a} -> {b}");
        }
        // Monotone non-decreasing along the sorted input row.
        let row = out.row(0);
        for w in row.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        for c in [0u8, 31, 255] {
            let img = GrayImage::filled(32, 16, c);
            let out = clahe(&img, &ClaheParams::default()).unwrap();
            let first = out.get(0, 0);
            assert!(out.pixels().iter().all(|&v| v == first), "c={c}");
        }
    }

    #[test]
    fn two_level_image_matches_clipped_cdf_oracle() {
        // Half 50, half 200, single tile. With a clip limit too large to
        // bite, the CDF steps at 0.5 and 1.0, i.e. roughly 127 and 255.
        let mut data = vec![50u8; 512];
        data.extend(vec![200u8; 512]);
        let img = GrayImage::from_pixels(64, 16, data);
        let mut hist = [0u64; 256];
        hist[50] = 512;
        hist[200] = 512;

        let no_clip = ClaheParams { tiles_x: 1, tiles_y: 1, clip_limit: 1000.0 };
        let out = clahe(&img, &no_clip).unwrap();
        let lo = clipped_cdf_oracle(&hist, 1000.0, 50);
        let hi = clipped_cdf_oracle(&hist, 1000.0, 200);
        assert_eq!(lo, 128); // round(0.5 * 255)
        assert_eq!(hi, 255);
        assert_eq!(out.get(0, 0), lo);
        assert_eq!(out.get(63, 15), hi);

        // With clipping active the mapping flattens toward identity; the
        // oracle stays authoritative.
        let clipped = ClaheParams { tiles_x: 1, tiles_y: 1, clip_limit: 2.0 };
        let out = clahe(&img, &clipped).unwrap();
        assert_eq!(out.get(0, 0), clipped_cdf_oracle(&hist, 2.0, 50));
        assert_eq!(out.get(63, 15), clipped_cdf_oracle(&hist, 2.0, 200));
    }

    #[test]
    fn output_range_and_tile_monotonicity() {
        let mut data = Vec::new();
        for i in 0..(40 * 24) {
            data.push(((i * 7919) % 256) as u8);
        }
        let img = GrayImage::from_pixels(40, 24, data);
        let out = clahe(&img, &ClaheParams { tiles_x: 4, tiles_y: 3, clip_limit: 2.5 }).unwrap();
        assert_eq!(out.dimensions(), (40, 24));
        // Mapping monotonicity: within one tile interior, a brighter input
        // never maps below a darker one. Checked via the tile mapping itself.
        let hist = img.histogram();
        let mapping = tile_mapping(&hist, img.pixels().len() as u64, 2.5);
        for w in mapping.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn clahe_rejects_image_smaller_than_grid() {
        let img = GrayImage::filled(4, 4, 10);
        let params = ClaheParams { tiles_x: 8, tiles_y: 8, clip_limit: 3.0 };
        assert!(matches!(
            clahe(&img, &params),
            Err(Error::ImageSmallerThanTileGrid { .. })
        ));
    }

    #[test]
    fn stretch_full_range_is_identity() {
        let data: Vec<u8> = (0..=255).collect();
        let img = GrayImage::from_pixels(16, 16, data);
        assert_eq!(adjust_intensity(&img, 0.0, 0.0), img);
    }

    #[test]
    fn stretch_maps_narrow_range_linearly() {
        // Values 100..=150 uniformly; quantile endpoints 100 and 150.
        let data: Vec<u8> = (0..510).map(|i| 100 + (i % 51) as u8).collect();
        let img = GrayImage::from_pixels(51, 10, data);
        let out = adjust_intensity(&img, 0.0, 0.0);
        let lut_at = |v: u8| {
            let idx = img.pixels().iter().position(|&p| p == v).unwrap();
            out.pixels()[idx]
        };
        assert_eq!(lut_at(100), 0);
        assert_eq!(lut_at(150), 255);
        let mid = lut_at(125) as i32;
        assert!((mid - 128).abs() <= 1, "mid {mid}");
    }

    #[test]
    fn stretch_leaves_constant_image_unchanged() {
        let img = GrayImage::filled(8, 8, 42);
        assert_eq!(adjust_intensity(&img, 0.01, 0.01), img);
    }

    #[test]
    fn stretch_is_monotone() {
        let data: Vec<u8> = (0..400).map(|i| ((i * 31) % 256) as u8).collect();
        let img = GrayImage::from_pixels(20, 20, data);
        let out = adjust_intensity(&img, 0.05, 0.05);
        let mut pairs: Vec<(u8, u8)> =
            img.pixels().iter().copied().zip(out.pixels().iter().copied()).collect();
        pairs.sort();
        for w in pairs.windows(2) {
            assert!(w[0].1 <= w[1].1, "{:?} {:?}", w[0], w[1]);
        }
    }
}
