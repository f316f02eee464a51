//! Synthetic fundus generator with exact ground truth.
//!
//! Renders a dark-orange circular field on black, with a smooth
//! illumination gradient, dark curvilinear pseudo-vessels, bright yellowish
//! elliptical exudates and dark reddish round haemorrhages, plus Gaussian
//! pixel noise. Lesions are placed with a clearance margin from each other
//! and from vessels, so the ground truth is exactly the union of the
//! planted lesion pixels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::raster::{BinaryMask, ColorImage};

/// Generator settings. The lesion color bands are chosen so the default
/// cascade thresholds are discriminative on the synthetic frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub exudates: u32,
    pub haemorrhages: u32,
    pub vessels: u32,
    pub noise_sigma: f64,
    /// Sampled range for each exudate semi-axis, pixels.
    pub exudate_semi_axes: (f64, f64),
    /// Sampled haemorrhage radius range, pixels. Kept under half the hat
    /// structuring element so the lesions stay morphologically visible.
    pub haem_radius: (f64, f64),
    pub exudate_hue: (f64, f64),
    pub haem_hue: (f64, f64),
    pub exudate_value: (f64, f64),
    pub haem_value: (f64, f64),
    pub exudate_saturation: (f64, f64),
    pub haem_saturation: (f64, f64),
    pub field_color: (u8, u8, u8),
    pub vessel_color: (u8, u8, u8),
    /// Clearance in pixels between lesions, vessels and the field border.
    pub lesion_margin: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 752,
            height: 500,
            exudates: 8,
            haemorrhages: 8,
            vessels: 7,
            noise_sigma: 4.0,
            exudate_semi_axes: (2.5, 8.0),
            haem_radius: (2.0, 9.0),
            exudate_hue: (0.132, 0.158),
            haem_hue: (0.070, 0.112),
            exudate_value: (0.88, 0.97),
            haem_value: (0.30, 0.42),
            exudate_saturation: (0.80, 0.92),
            haem_saturation: (0.75, 0.88),
            field_color: (175, 95, 40),
            vessel_color: (70, 35, 18),
            lesion_margin: 5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidConfig(format!(
                "synth canvas must be at least 64x64, got {}x{}",
                self.width, self.height
            )));
        }
        for (name, (lo, hi)) in [
            ("exudate_semi_axes", self.exudate_semi_axes),
            ("haem_radius", self.haem_radius),
            ("exudate_hue", self.exudate_hue),
            ("haem_hue", self.haem_hue),
        ] {
            if !(lo <= hi && lo >= 0.0) {
                return Err(Error::InvalidConfig(format!("synth.{name} range invalid: ({lo}, {hi})")));
            }
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("synth.noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LesionKind {
    Exudate,
    Haemorrhage,
}

/// Placement record for one planted lesion.
#[derive(Debug, Clone)]
pub struct Lesion {
    pub kind: LesionKind,
    pub center: (f64, f64),
    pub area: usize,
}

/// Generator output with the internals tests need.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub image: ColorImage,
    pub ground_truth: GroundTruth,
    pub lesions: Vec<Lesion>,
    pub vessel_mask: BinaryMask,
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - (h6.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((g + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((b + m) * 255.0).round().clamp(0.0, 255.0) as u8,
    ]
}

struct Canvas {
    center: (f64, f64),
    radius: f64,
    /// Multiplicative illumination field.
    tilt: (f64, f64),
    falloff: f64,
}

impl Canvas {
    fn shade(&self, x: u32, y: u32) -> f64 {
        let dx = (x as f64 - self.center.0) / self.radius;
        let dy = (y as f64 - self.center.1) / self.radius;
        let d2 = dx * dx + dy * dy;
        (1.02 - self.falloff * d2 + self.tilt.0 * dx + self.tilt.1 * dy).clamp(0.5, 1.15)
    }

    fn inside(&self, x: f64, y: f64, margin: f64) -> bool {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (dx * dx + dy * dy).sqrt() <= self.radius - margin
    }

    fn shaded(&self, color: (u8, u8, u8), x: u32, y: u32) -> [u8; 3] {
        let s = self.shade(x, y);
        [
            (color.0 as f64 * s).round().clamp(0.0, 255.0) as u8,
            (color.1 as f64 * s).round().clamp(0.0, 255.0) as u8,
            (color.2 as f64 * s).round().clamp(0.0, 255.0) as u8,
        ]
    }
}

/// Marks `pixels` plus a disk of `margin` around each into `occupied`.
fn mark_occupied(occupied: &mut BinaryMask, pixels: &[(u32, u32)], margin: i64) {
    let (w, h) = occupied.dimensions();
    for &(x, y) in pixels {
        for dy in -margin..=margin {
            for dx in -margin..=margin {
                if dx * dx + dy * dy > margin * margin {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    occupied.set(nx as u32, ny as u32, true);
                }
            }
        }
    }
}

fn ellipse_pixels(
    center: (f64, f64),
    a: f64,
    b: f64,
    angle: f64,
    dims: (u32, u32),
) -> Vec<(u32, u32)> {
    let (sin, cos) = angle.sin_cos();
    let r = a.max(b).ceil() as i64 + 1;
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    let mut px = Vec::new();
    for y in (cy - r).max(0)..=(cy + r).min(dims.1 as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(dims.0 as i64 - 1) {
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                px.push((x as u32, y as u32));
            }
        }
    }
    px
}

/// Generates one synthetic fundus frame; deterministic in `seed`.
pub fn synthesize_fundus_detailed(seed: u64, spec: &SynthSpec) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width, spec.height);
    let canvas = Canvas {
        center: (w as f64 / 2.0, h as f64 / 2.0),
        radius: 0.47 * w.min(h) as f64,
        tilt: (rng.random_range(-0.06..0.06), rng.random_range(-0.06..0.06)),
        falloff: rng.random_range(0.12..0.22),
    };

    // Field on black background.
    let mut image = ColorImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            if canvas.inside(x as f64, y as f64, 0.0) {
                image.set(x, y, canvas.shaded(spec.field_color, x, y));
            }
        }
    }

    // Curvilinear vessels: momentum walks from near the field center.
    let mut vessel_mask = BinaryMask::empty(w, h);
    for _ in 0..spec.vessels {
        let mut px = canvas.center.0 + rng.random_range(-30.0..30.0);
        let mut py = canvas.center.1 + rng.random_range(-30.0..30.0);
        let mut dir = rng.random_range(0.0..std::f64::consts::TAU);
        let len = rng.random_range(180..420);
        let width = rng.random_range(1i64..=2);
        let mut track = Vec::new();
        for _ in 0..len {
            dir += rng.random_range(-0.13..0.13);
            px += dir.cos();
            py += dir.sin();
            if !canvas.inside(px, py, 4.0) {
                break;
            }
            for dy in -width..=width {
                for dx in -width..=width {
                    if dx * dx + dy * dy > width * width {
                        continue;
                    }
                    let (nx, ny) = (px.round() as i64 + dx, py.round() as i64 + dy);
                    if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                        track.push((nx as u32, ny as u32));
                    }
                }
            }
        }
        for &(x, y) in &track {
            image.set(x, y, canvas.shaded(spec.vessel_color, x, y));
            vessel_mask.set(x, y, true);
        }
    }

    // Occupancy: vessels and the outside of the field, grown by the margin.
    let margin = spec.lesion_margin as i64;
    let mut occupied = BinaryMask::empty(w, h);
    let border = canvas.radius * 0.08 + spec.lesion_margin as f64;
    for y in 0..h {
        for x in 0..w {
            if !canvas.inside(x as f64, y as f64, border) {
                occupied.set(x, y, true);
            }
        }
    }
    let vessel_pixels: Vec<(u32, u32)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| vessel_mask.get(x, y))
        .collect();
    mark_occupied(&mut occupied, &vessel_pixels, margin);

    let mut ground_truth = BinaryMask::empty(w, h);
    let mut lesions = Vec::new();

    let mut place = |rng: &mut ChaCha8Rng,
                     occupied: &mut BinaryMask,
                     ground_truth: &mut BinaryMask,
                     image: &mut ColorImage,
                     kind: LesionKind,
                     spec: &SynthSpec|
     -> Option<Lesion> {
        for _ in 0..400 {
            let cx = rng.random_range(canvas.center.0 - canvas.radius..canvas.center.0 + canvas.radius);
            let cy = rng.random_range(canvas.center.1 - canvas.radius..canvas.center.1 + canvas.radius);
            let (pixels, hue, sat, val) = match kind {
                LesionKind::Exudate => {
                    let a = rng.random_range(spec.exudate_semi_axes.0..=spec.exudate_semi_axes.1);
                    let b = rng.random_range(spec.exudate_semi_axes.0..=spec.exudate_semi_axes.1);
                    let angle = rng.random_range(0.0..std::f64::consts::PI);
                    (
                        ellipse_pixels((cx, cy), a, b, angle, (w, h)),
                        rng.random_range(spec.exudate_hue.0..=spec.exudate_hue.1),
                        rng.random_range(spec.exudate_saturation.0..=spec.exudate_saturation.1),
                        rng.random_range(spec.exudate_value.0..=spec.exudate_value.1),
                    )
                }
                LesionKind::Haemorrhage => {
                    let r = rng.random_range(spec.haem_radius.0..=spec.haem_radius.1);
                    (
                        ellipse_pixels((cx, cy), r, r, 0.0, (w, h)),
                        rng.random_range(spec.haem_hue.0..=spec.haem_hue.1),
                        rng.random_range(spec.haem_saturation.0..=spec.haem_saturation.1),
                        rng.random_range(spec.haem_value.0..=spec.haem_value.1),
                    )
                }
            };
            if pixels.is_empty() || pixels.iter().any(|&(x, y)| occupied.get(x, y)) {
                continue;
            }
            let base = hsv_to_rgb(hue, sat, val);
            for &(x, y) in &pixels {
                image.set(x, y, canvas.shaded((base[0], base[1], base[2]), x, y));
                ground_truth.set(x, y, true);
            }
            mark_occupied(occupied, &pixels, margin);
            return Some(Lesion { kind, center: (cx, cy), area: pixels.len() });
        }
        None
    };

    for _ in 0..spec.exudates {
        if let Some(l) = place(
            &mut rng,
            &mut occupied,
            &mut ground_truth,
            &mut image,
            LesionKind::Exudate,
            spec,
        ) {
            lesions.push(l);
        }
    }
    for _ in 0..spec.haemorrhages {
        if let Some(l) = place(
            &mut rng,
            &mut occupied,
            &mut ground_truth,
            &mut image,
            LesionKind::Haemorrhage,
            spec,
        ) {
            lesions.push(l);
        }
    }

    // Pixel noise last, over the whole canvas.
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        let mut noisy = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let p = image.get(x, y);
                let mut q = [0u8; 3];
                for c in 0..3 {
                    let v = p[c] as f64 + normal.sample(&mut rng);
                    q[c] = v.round().clamp(0.0, 255.0) as u8;
                }
                noisy.push(q);
            }
        }
        image = ColorImage::from_pixels(w, h, noisy);
    }

    SynthOutput {
        image,
        ground_truth: GroundTruth { mask: ground_truth },
        lesions,
        vessel_mask,
    }
}

/// Generates one synthetic frame, returning just the image and its ground
/// truth.
pub fn synthesize_fundus(seed: u64, spec: &SynthSpec) -> (ColorImage, GroundTruth) {
    let out = synthesize_fundus_detailed(seed, spec);
    (out.image, out.ground_truth)
}
