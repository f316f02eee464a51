//! Flat grayscale and binary mathematical morphology.
//!
//! Erosion takes the neighborhood minimum, dilation the maximum; opening,
//! closing and the two hat transforms are the usual compositions. Samples
//! falling outside the image take the neutral element of the reduction
//! (255 for min, 0 for max), which makes the erosion/dilation duality exact
//! at the borders.
//!
//! Disk structuring elements are row-convex, so each operator runs as a
//! horizontal sliding-window min/max per contributing row followed by a
//! vertical reduction. That evaluates exactly the same pixel set as the
//! per-offset definition and is bit-identical to it (the unit tests compare
//! against a naive reference).

use crate::raster::{BinaryMask, GrayImage};

/// Flat structuring element: a set of `(dx, dy)` offsets anchored at `(0, 0)`.
///
/// Constructed via [`StructuringElement::disk`], which guarantees the origin
/// is included and the offset set is symmetric under negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
    // One contiguous dx span per contributing dy; disks are row-convex so
    // this covers every element we construct.
    rows: Vec<RowSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RowSpan {
    dy: i32,
    dx_min: i32,
    dx_max: i32,
}

impl StructuringElement {
    /// Exact Euclidean integer disk: all `(dx, dy)` with `dx^2 + dy^2 <= r^2`.
    pub fn disk(radius: u32) -> Self {
        let r = radius as i32;
        let r2 = (radius * radius) as i64;
        let mut offsets = Vec::new();
        let mut rows = Vec::new();
        for dy in -r..=r {
            let span = ((r2 - (dy as i64 * dy as i64)) as f64).sqrt().floor() as i32;
            // Guard against sqrt landing a hair high on perfect squares.
            let span = fix_span(span, dy, r2);
            rows.push(RowSpan { dy, dx_min: -span, dx_max: span });
            for dx in -span..=span {
                offsets.push((dx, dy));
            }
        }
        debug_assert!(offsets.contains(&(0, 0)));
        Self { offsets, rows }
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

fn fix_span(mut span: i32, dy: i32, r2: i64) -> i32 {
    let dy2 = dy as i64 * dy as i64;
    while (span as i64 * span as i64) + dy2 > r2 {
        span -= 1;
    }
    while ((span + 1) as i64 * (span + 1) as i64) + dy2 <= r2 {
        span += 1;
    }
    span
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reduce {
    Min,
    Max,
}

impl Reduce {
    #[inline]
    fn neutral(self) -> u8 {
        match self {
            Reduce::Min => 255,
            Reduce::Max => 0,
        }
    }

    #[inline]
    fn apply(self, a: u8, b: u8) -> u8 {
        match self {
            Reduce::Min => a.min(b),
            Reduce::Max => a.max(b),
        }
    }
}

/// Sliding-window reduction over one row: `out[x] = reduce(row[x+lo ..= x+hi])`
/// with out-of-bounds samples taking the neutral element.
fn row_window(row: &[u8], lo: i32, hi: i32, reduce: Reduce, out: &mut [u8]) {
    let w = row.len() as i32;
    let neutral = reduce.neutral();
    // Monotone deque over the virtual row padded with the neutral element.
    // Indices run over source positions; values outside [0, w) never enter.
    let mut deque: std::collections::VecDeque<i32> = std::collections::VecDeque::new();
    let mut next = lo; // next source index to admit
    for x in 0..w {
        let window_hi = x + hi;
        while next <= window_hi {
            if next >= 0 && next < w {
                let v = row[next as usize];
                while let Some(&back) = deque.back() {
                    let keep = match reduce {
                        Reduce::Min => row[back as usize] <= v,
                        Reduce::Max => row[back as usize] >= v,
                    };
                    if keep {
                        break;
                    }
                    deque.pop_back();
                }
                deque.push_back(next);
            }
            next += 1;
        }
        let window_lo = x + lo;
        while let Some(&front) = deque.front() {
            if front < window_lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        let mut v = neutral;
        if let Some(&front) = deque.front() {
            v = reduce.apply(v, row[front as usize]);
        }
        // The window always pokes out of bounds near the borders, where the
        // neutral element keeps the reduction honest; `v` already starts there.
        out[x as usize] = v;
    }
}

fn morph(img: &GrayImage, se: &StructuringElement, reduce: Reduce) -> GrayImage {
    let (w, h) = img.dimensions();
    let neutral = reduce.neutral();
    let mut out = GrayImage::filled(w, h, neutral);
    let mut windowed = vec![neutral; w as usize];
    for span in &se.rows {
        for y in 0..h as i32 {
            let ys = y + span.dy;
            if ys < 0 || ys >= h as i32 {
                continue; // out-of-bounds row contributes only the neutral element
            }
            row_window(img.row(ys as u32), span.dx_min, span.dx_max, reduce, &mut windowed);
            for x in 0..w {
                let cur = out.get(x, y as u32);
                out.set(x, y as u32, reduce.apply(cur, windowed[x as usize]));
            }
        }
    }
    out
}

/// Grayscale erosion: neighborhood minimum, out-of-bounds reads as 255.
pub fn erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morph(img, se, Reduce::Min)
}

/// Grayscale dilation: neighborhood maximum, out-of-bounds reads as 0.
pub fn dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morph(img, se, Reduce::Max)
}

/// Opening: erosion followed by dilation.
pub fn open(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    dilate(&erode(img, se), se)
}

/// Closing: dilation followed by erosion.
pub fn close(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    erode(&dilate(img, se), se)
}

/// Saturating per-pixel subtraction `a - b`, clamped at 0.
pub fn subtract_saturating(a: &GrayImage, b: &GrayImage) -> GrayImage {
    assert_eq!(a.dimensions(), b.dimensions());
    let data = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| x.saturating_sub(y))
        .collect();
    GrayImage::from_pixels(a.width(), a.height(), data)
}

/// Top-hat transform: image minus its opening. Isolates bright details
/// smaller than the structuring element.
pub fn tophat(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    subtract_saturating(img, &open(img, se))
}

/// Bottom-hat transform: closing minus the image. Isolates dark details
/// smaller than the structuring element.
pub fn bothat(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    subtract_saturating(&close(img, se), img)
}

fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    let data = mask.pixels().iter().map(|&v| if v { 255 } else { 0 }).collect();
    GrayImage::from_pixels(mask.width(), mask.height(), data)
}

fn gray_to_mask(img: &GrayImage) -> BinaryMask {
    let data = img.pixels().iter().map(|&v| v > 127).collect();
    BinaryMask::from_pixels(img.width(), img.height(), data)
}

/// Binary erosion: AND over the neighborhood, out-of-bounds is foreground.
pub fn erode_mask(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    gray_to_mask(&erode(&mask_to_gray(mask), se))
}

/// Binary dilation: OR over the neighborhood, out-of-bounds is background.
pub fn dilate_mask(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    gray_to_mask(&dilate(&mask_to_gray(mask), se))
}

pub fn open_mask(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_mask(&erode_mask(mask, se), se)
}

pub fn close_mask(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_mask(&dilate_mask(mask, se), se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Naive per-offset reference; the production path must match it exactly.
    fn morph_reference(img: &GrayImage, se: &StructuringElement, reduce: Reduce) -> GrayImage {
        let (w, h) = img.dimensions();
        let mut out = GrayImage::filled(w, h, 0);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut acc = reduce.neutral();
                for &(dx, dy) in se.offsets() {
                    let (sx, sy) = (x + dx, y + dy);
                    let v = if sx >= 0 && sx < w as i32 && sy >= 0 && sy < h as i32 {
                        img.get(sx as u32, sy as u32)
                    } else {
                        reduce.neutral()
                    };
                    acc = reduce.apply(acc, v);
                }
                out.set(x as u32, y as u32, acc);
            }
        }
        out
    }

    fn random_image(rng: &mut StdRng, w: u32, h: u32) -> GrayImage {
        GrayImage::from_pixels(w, h, (0..w * h).map(|_| rng.random()).collect())
    }

    #[test]
    fn disk_offset_counts() {
        assert_eq!(StructuringElement::disk(0).len(), 1);
        assert_eq!(StructuringElement::disk(1).len(), 5);
        // Brute-force enumeration of the 25x25 window.
        let expected = (-12i32..=12)
            .flat_map(|dy| (-12i32..=12).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx * dx + dy * dy <= 144)
            .count();
        assert_eq!(StructuringElement::disk(12).len(), expected);
        assert_eq!(expected, 441);
    }

    #[test]
    fn disk_is_symmetric_and_contains_origin() {
        for r in [0u32, 1, 2, 3, 7, 12] {
            let se = StructuringElement::disk(r);
            assert!(se.offsets().contains(&(0, 0)), "r={r}");
            for &(dx, dy) in se.offsets() {
                assert!(se.offsets().contains(&(-dx, -dy)), "r={r} ({dx},{dy})");
            }
        }
    }

    #[test]
    fn sliding_window_matches_naive_reference() {
        let mut rng = StdRng::seed_from_u64(11);
        for r in [0u32, 1, 2, 3, 5, 12] {
            let se = StructuringElement::disk(r);
            for _ in 0..8 {
                let img = random_image(&mut rng, 37, 23);
                assert_eq!(erode(&img, &se), morph_reference(&img, &se, Reduce::Min), "r={r}");
                assert_eq!(dilate(&img, &se), morph_reference(&img, &se, Reduce::Max), "r={r}");
            }
        }
    }

    #[test]
    fn constant_images_are_fixed_points() {
        let se = StructuringElement::disk(3);
        let img = GrayImage::filled(10, 10, 77);
        assert_eq!(erode(&img, &se), img);
        assert_eq!(dilate(&img, &se), img);
        assert_eq!(open(&img, &se), img);
        assert_eq!(close(&img, &se), img);
        assert!(tophat(&img, &se).pixels().iter().all(|&v| v == 0));
        assert!(bothat(&img, &se).pixels().iter().all(|&v| v == 0));
    }

    #[test]
    fn disk0_is_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        let img = random_image(&mut rng, 9, 7);
        let se = StructuringElement::disk(0);
        assert_eq!(erode(&img, &se), img);
        assert_eq!(dilate(&img, &se), img);
    }

    #[test]
    fn erode_spreads_a_dark_pixel_over_the_disk() {
        let mut img = GrayImage::filled(5, 5, 255);
        img.set(2, 2, 0);
        let out = erode(&img, &StructuringElement::disk(1));
        for y in 0..5u32 {
            for x in 0..5u32 {
                let in_disk = (x as i32 - 2).abs() + (y as i32 - 2).abs() <= 1;
                assert_eq!(out.get(x, y), if in_disk { 0 } else { 255 }, "({x},{y})");
            }
        }
    }

    #[test]
    fn dilate_spreads_a_bright_pixel_over_the_disk() {
        let mut img = GrayImage::filled(5, 5, 0);
        img.set(2, 2, 255);
        let out = dilate(&img, &StructuringElement::disk(1));
        assert_eq!(out.pixels().iter().filter(|&&v| v == 255).count(), 5);
        assert_eq!(out.get(2, 2), 255);
        assert_eq!(out.get(1, 2), 255);
    }

    #[test]
    fn open_removes_isolated_peak_close_fills_isolated_pit() {
        let se = StructuringElement::disk(1);
        let mut peak = GrayImage::filled(7, 7, 0);
        peak.set(3, 3, 255);
        assert!(open(&peak, &se).pixels().iter().all(|&v| v == 0));

        let mut pit = GrayImage::filled(7, 7, 200);
        pit.set(3, 3, 10);
        assert!(close(&pit, &se).pixels().iter().all(|&v| v == 200));
    }

    #[test]
    fn tophat_measures_peak_height_over_background() {
        let mut img = GrayImage::filled(7, 7, 50);
        img.set(3, 3, 200);
        let th = tophat(&img, &StructuringElement::disk(1));
        assert_eq!(th.get(3, 3), 150);
        assert_eq!(th.pixels().iter().map(|&v| v as u32).sum::<u32>(), 150);
    }

    #[test]
    fn duality_holds_exactly_at_borders() {
        let mut rng = StdRng::seed_from_u64(21);
        for r in [1u32, 3, 12] {
            let se = StructuringElement::disk(r);
            let img = random_image(&mut rng, 20, 16);
            let inverted =
                GrayImage::from_pixels(20, 16, img.pixels().iter().map(|&v| 255 - v).collect());
            let lhs = dilate(&img, &se);
            let rhs = GrayImage::from_pixels(
                20,
                16,
                erode(&inverted, &se).pixels().iter().map(|&v| 255 - v).collect(),
            );
            assert_eq!(lhs, rhs, "r={r}");
        }
    }

    #[test]
    fn mask_ops_agree_with_grayscale_on_binary_images() {
        let mut rng = StdRng::seed_from_u64(33);
        let se = StructuringElement::disk(2);
        for _ in 0..10 {
            let mask = BinaryMask::from_pixels(
                17,
                13,
                (0..17 * 13).map(|_| rng.random_bool(0.4)).collect(),
            );
            let gray = mask_to_gray(&mask);
            assert_eq!(erode_mask(&mask, &se), gray_to_mask(&erode(&gray, &se)));
            assert_eq!(dilate_mask(&mask, &se), gray_to_mask(&dilate(&gray, &se)));
        }
    }

    #[test]
    fn mask_edge_cases() {
        let se = StructuringElement::disk(1);
        let empty = BinaryMask::empty(6, 6);
        assert!(dilate_mask(&empty, &se).is_empty());

        let mut lone = BinaryMask::empty(6, 6);
        lone.set(3, 3, true);
        assert!(open_mask(&lone, &se).is_empty());

        let full = BinaryMask::from_pixels(6, 6, vec![true; 36]);
        assert_eq!(close_mask(&full, &se), full);
    }
}
