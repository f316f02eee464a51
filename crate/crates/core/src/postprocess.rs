//! Post-processing: fit an oriented ellipse around each candidate blob and
//! stroke it onto the original image.

use crate::blob::{central_moments, pixel_centroid, Blob, BlobSource};
use crate::raster::{BinaryMask, ColorImage};

const SEI_COLOR: [u8; 3] = [255, 255, 0];
const SHI_COLOR: [u8; 3] = [255, 0, 0];

/// An oriented ellipse around one candidate blob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseAnnotation {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Major-axis direction in radians (raster convention, y down).
    pub angle: f64,
    pub source: BlobSource,
}

/// Fits the annotation ellipse: centered on the centroid, oriented along
/// the major axis, semi-axes `2 sqrt(eigenvalue)` of the central-moment
/// covariance, floored at 0.5 and padded by 2 pixels so the ellipse
/// encloses the blob.
pub fn blob_to_ellipse(blob: &Blob) -> EllipseAnnotation {
    let centroid = pixel_centroid(&blob.pixels);
    let (mu20, mu02, mu11) = central_moments(&blob.pixels, centroid);
    // Eigenvalues of [[mu20, mu11], [mu11, mu02]].
    let mean = (mu20 + mu02) / 2.0;
    let spread = (((mu20 - mu02) / 2.0).powi(2) + mu11 * mu11).sqrt();
    let lambda_major = (mean + spread).max(0.0);
    let lambda_minor = (mean - spread).max(0.0);

    let axis = |lambda: f64| (2.0 * lambda.sqrt()).max(0.5) + 2.0;
    EllipseAnnotation {
        center: centroid,
        semi_major: axis(lambda_major),
        semi_minor: axis(lambda_minor),
        angle: blob.orientation,
        source: blob.source,
    }
}

/// Whether a point lies inside or on the ellipse.
pub fn ellipse_contains(e: &EllipseAnnotation, x: f64, y: f64) -> bool {
    let dx = x - e.center.0;
    let dy = y - e.center.1;
    let (sin, cos) = e.angle.sin_cos();
    let u = dx * cos + dy * sin;
    let v = -dx * sin + dy * cos;
    (u / e.semi_major).powi(2) + (v / e.semi_minor).powi(2) <= 1.0 + 1e-12
}

/// Strokes each ellipse outline onto a copy of the image: SEI annotations
/// in yellow, SHI in red. SEI strokes first so overlap resolution is
/// deterministic; out-of-bounds samples are clipped silently.
pub fn render_annotations(img: &ColorImage, annotations: &[EllipseAnnotation]) -> ColorImage {
    let mut out = img.clone();
    let (w, h) = img.dimensions();
    let ordered = annotations
        .iter()
        .filter(|a| a.source == BlobSource::Sei)
        .chain(annotations.iter().filter(|a| a.source == BlobSource::Shi));
    for ann in ordered {
        let color = match ann.source {
            BlobSource::Sei => SEI_COLOR,
            BlobSource::Shi => SHI_COLOR,
        };
        // Parametric samples at arc steps no longer than half a pixel.
        let circumference = 2.0 * std::f64::consts::PI * ann.semi_major.max(ann.semi_minor);
        let steps = ((circumference / 0.5).ceil() as usize).max(16);
        let (sin, cos) = ann.angle.sin_cos();
        for k in 0..steps {
            let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            let u = ann.semi_major * t.cos();
            let v = ann.semi_minor * t.sin();
            let x = ann.center.0 + u * cos - v * sin;
            let y = ann.center.1 + u * sin + v * cos;
            let xi = x.round() as i64;
            let yi = y.round() as i64;
            if xi >= 0 && yi >= 0 && xi < w as i64 && yi < h as i64 {
                out.set(xi as u32, yi as u32, color);
            }
        }
    }
    out
}

/// Union of the candidates' pixel sets as a mask.
pub fn candidate_mask(candidates: &[Blob], width: u32, height: u32) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    for blob in candidates {
        for &(x, y) in &blob.pixels {
            if x < width && y < height {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Union of filled ellipse interiors as a mask, for the alternate scoring
/// mode.
pub fn ellipse_interior_mask(
    annotations: &[EllipseAnnotation],
    width: u32,
    height: u32,
) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    for ann in annotations {
        let r = ann.semi_major.ceil() as i64 + 1;
        let (cx, cy) = (ann.center.0.round() as i64, ann.center.1.round() as i64);
        for y in (cy - r).max(0)..=(cy + r).min(height as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(width as i64 - 1) {
                if ellipse_contains(ann, x as f64, y as f64) {
                    mask.set(x as u32, y as u32, true);
                }
            }
        }
    }
    mask
}

/// Annotation table as CSV (`cx,cy,a,b,angle,source`).
pub fn annotation_table_csv(annotations: &[EllipseAnnotation]) -> String {
    let mut out = String::from("cx,cy,a,b,angle,source\n");
    for a in annotations {
        out.push_str(&format!(
            "{:.4},{:.4},{:.4},{:.4},{:.6},{}\n",
            a.center.0, a.center.1, a.semi_major, a.semi_minor, a.angle, a.source
        ));
    }
    out
}
