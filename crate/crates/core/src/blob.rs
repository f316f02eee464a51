//! Connected-component labeling and per-blob feature measurement.
//!
//! Components are 8-connected and labeled in raster-scan order of each
//! component's first pixel. Features follow the conventions used by the
//! cascade filters: area in pixels, perimeter as exposed unit edges,
//! compactness `P^2 / (4 pi A)`, intensity midrange over the enhanced
//! grayscale, mean hue over chromatic pixels, centroid and moment-based
//! orientation with the y axis pointing down.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage, HueMap};

/// Which pre-processing branch a blob came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlobSource {
    Sei,
    Shi,
}

impl std::fmt::Display for BlobSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlobSource::Sei => write!(f, "SEI"),
            BlobSource::Shi => write!(f, "SHI"),
        }
    }
}

/// One labeled connected component with its measured features.
#[derive(Debug, Clone)]
pub struct Blob {
    pub id: u32,
    pub source: BlobSource,
    /// Member pixels in raster order.
    pub pixels: Vec<(u32, u32)>,
    pub area: usize,
    /// Unit edges between a member pixel and a non-member (image border
    /// counts as non-member).
    pub perimeter: usize,
    pub compactness: f64,
    /// `(min + max) / 2` of the enhanced gray values over the pixels.
    pub intensity_mid: f64,
    /// Mean hue over pixels with defined hue; `None` if every pixel is
    /// achromatic.
    pub mean_hue: Option<f64>,
    pub centroid: (f64, f64),
    /// Major-axis direction in radians, range `(-pi/2, pi/2]`.
    pub orientation: f64,
}

/// Partitions the mask foreground into maximal 8-connected components.
///
/// Two-pass union-find; output components are ordered by their first pixel
/// in raster order and each component's pixels are in raster order.
pub fn label_components(mask: &BinaryMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = mask.dimensions();
    let n = (w as usize) * (h as usize);
    let mut parent: Vec<u32> = vec![u32::MAX; n];

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }

    // First pass: union each foreground pixel with its already-visited
    // neighbors (W, NW, N, NE).
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let idx = y * w + x;
            parent[idx as usize] = idx;
            let mut try_union = |nx: i64, ny: i64| {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    return;
                }
                if !mask.get(nx as u32, ny as u32) {
                    return;
                }
                let nidx = (ny as u32) * w + nx as u32;
                let ra = find(&mut parent, idx);
                let rb = find(&mut parent, nidx);
                if ra != rb {
                    // Attach the larger index under the smaller so roots
                    // stay raster-minimal.
                    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[hi as usize] = lo;
                }
            };
            let (xi, yi) = (x as i64, y as i64);
            try_union(xi - 1, yi);
            try_union(xi - 1, yi - 1);
            try_union(xi, yi - 1);
            try_union(xi + 1, yi - 1);
        }
    }

    // Second pass: group pixels by root, discovering roots in raster order.
    let mut root_slot: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    let mut components: Vec<Vec<(u32, u32)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let root = find(&mut parent, y * w + x);
            let slot = *root_slot.entry(root).or_insert_with(|| {
                components.push(Vec::new());
                components.len() - 1
            });
            components[slot].push((x, y));
        }
    }
    components
}

/// Counts unit edges between member pixels and non-members; edges on the
/// image border are exposed.
pub fn measure_perimeter(pixels: &[(u32, u32)], width: u32, height: u32) -> usize {
    assert!(!pixels.is_empty(), "perimeter of an empty pixel set");
    let member = pixel_set(pixels, width, height);
    let mut edges = 0usize;
    for &(x, y) in pixels {
        let (xi, yi) = (x as i64, y as i64);
        for (nx, ny) in [(xi - 1, yi), (xi + 1, yi), (xi, yi - 1), (xi, yi + 1)] {
            let inside = nx >= 0
                && ny >= 0
                && nx < width as i64
                && ny < height as i64
                && member[(ny as u32 * width + nx as u32) as usize];
            if !inside {
                edges += 1;
            }
        }
    }
    edges
}

fn pixel_set(pixels: &[(u32, u32)], width: u32, height: u32) -> Vec<bool> {
    let mut set = vec![false; (width as usize) * (height as usize)];
    for &(x, y) in pixels {
        set[(y * width + x) as usize] = true;
    }
    set
}

/// Second-order central moments of a pixel set, normalized by area.
pub(crate) fn central_moments(pixels: &[(u32, u32)], centroid: (f64, f64)) -> (f64, f64, f64) {
    let (cx, cy) = centroid;
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    let a = pixels.len() as f64;
    (mu20 / a, mu02 / a, mu11 / a)
}

pub(crate) fn pixel_centroid(pixels: &[(u32, u32)]) -> (f64, f64) {
    let n = pixels.len() as f64;
    let sx: f64 = pixels.iter().map(|&(x, _)| x as f64).sum();
    let sy: f64 = pixels.iter().map(|&(_, y)| y as f64).sum();
    (sx / n, sy / n)
}

/// Measures every feature of one component.
pub fn measure_blob(
    id: u32,
    pixels: Vec<(u32, u32)>,
    source: BlobSource,
    gray: &GrayImage,
    hue: &HueMap,
) -> Result<Blob> {
    assert!(!pixels.is_empty(), "cannot measure an empty blob");
    let (w, h) = gray.dimensions();
    if hue.dimensions() != (w, h) {
        return Err(Error::dims((w, h), hue.dimensions()));
    }
    for &(x, y) in &pixels {
        if x >= w || y >= h {
            return Err(Error::InvalidArgument(format!(
                "blob pixel ({x},{y}) outside {w}x{h} raster"
            )));
        }
    }

    let area = pixels.len();
    let perimeter = measure_perimeter(&pixels, w, h);
    let compactness = (perimeter * perimeter) as f64 / (4.0 * PI * area as f64);

    let mut min_gray = u8::MAX;
    let mut max_gray = u8::MIN;
    let mut hue_sum = 0.0f64;
    let mut hue_count = 0usize;
    for &(x, y) in &pixels {
        let g = gray.get(x, y);
        min_gray = min_gray.min(g);
        max_gray = max_gray.max(g);
        if let Some(hv) = hue.get(x, y) {
            hue_sum += hv as f64;
            hue_count += 1;
        }
    }
    let intensity_mid = (min_gray as f64 + max_gray as f64) / 2.0;
    let mean_hue = (hue_count > 0).then(|| hue_sum / hue_count as f64);

    let centroid = pixel_centroid(&pixels);
    let (mu20, mu02, mu11) = central_moments(&pixels, centroid);
    let orientation = if mu11 == 0.0 && mu20 == mu02 {
        0.0
    } else {
        0.5 * (2.0 * mu11).atan2(mu20 - mu02)
    };

    Ok(Blob {
        id,
        source,
        pixels,
        area,
        perimeter,
        compactness,
        intensity_mid,
        mean_hue,
        centroid,
        orientation,
    })
}

/// Blob feature table as CSV
/// (`id,source,area,perimeter,compactness,intensity_mid,mean_hue,cx,cy,orientation`).
pub fn blob_table_csv(blobs: &[Blob]) -> String {
    let mut out =
        String::from("id,source,area,perimeter,compactness,intensity_mid,mean_hue,cx,cy,orientation\n");
    for b in blobs {
        let hue = b.mean_hue.map(|h| format!("{h:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.2},{},{:.4},{:.4},{:.6}\n",
            b.id,
            b.source,
            b.area,
            b.perimeter,
            b.compactness,
            b.intensity_mid,
            hue,
            b.centroid.0,
            b.centroid.1,
            b.orientation,
        ));
    }
    out
}
