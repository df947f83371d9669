//! Multi-scale oriented corners with binary descriptors, and descriptor
//! matching.

pub mod descriptor;
pub mod fast;

use crate::geometry::Pixel;
use crate::image::{gaussian_blur, resize_gray, DepthImage, GrayImage, LabelImage};

pub use descriptor::{hamming, Descriptor};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub n_features: usize,
    pub levels: usize,
    pub scale_factor: f64,
    pub fast_threshold: u8,
    /// Retention grid cell size in level pixels.
    pub cell_size: usize,
    /// Maximum Hamming distance of an accepted match.
    pub match_threshold: u32,
    /// Best / second-best distance ratio bound.
    pub match_ratio: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_features: 1000,
            levels: 8,
            scale_factor: 1.2,
            fast_threshold: 20,
            cell_size: 30,
            match_threshold: 64,
            match_ratio: 0.9,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.n_features == 0 || self.levels == 0 || !(self.scale_factor > 1.0) || self.cell_size == 0
        {
            return Err(crate::Error::Config(format!("invalid feature config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    /// Level-0 image coordinates.
    pub px: Pixel,
    pub octave: usize,
    pub angle: f64,
    pub score: u32,
    pub descriptor: Descriptor,
    /// Raw sensor depth at the nearest level-0 pixel, 0 if invalid.
    pub raw_depth: u16,
    /// Panoptic code at the nearest level-0 pixel.
    pub label_code: u32,
}

impl FeaturePoint {
    pub fn has_depth(&self) -> bool {
        self.raw_depth > 0
    }
}

const SUBPIXEL_HALF_WINDOW: usize = 2;

/// Per-level feature budget from a geometric series over the scale factor.
fn level_quotas(cfg: &FeatureConfig) -> Vec<usize> {
    let f = 1.0 / cfg.scale_factor;
    let n = cfg.n_features as f64;
    let first = n * (1.0 - f) / (1.0 - f.powi(cfg.levels as i32));
    let mut out = Vec::with_capacity(cfg.levels);
    let mut total = 0;
    for l in 0..cfg.levels {
        let q = if l + 1 == cfg.levels {
            cfg.n_features.saturating_sub(total)
        } else {
            (first * f.powi(l as i32)).round() as usize
        };
        total += q;
        out.push(q);
    }
    out
}

/// Keeps the best corner of each grid cell first, then the second best of
/// each cell, and so on until `quota` corners are kept.
fn retain_spread(
    corners: Vec<(usize, usize, u32)>,
    cell: usize,
    width: usize,
    quota: usize,
) -> Vec<(usize, usize, u32)> {
    let cols = width.div_ceil(cell);
    let mut keyed: Vec<(usize, usize, (usize, usize, u32))> = corners
        .into_iter()
        .map(|c| ((c.1 / cell) * cols + c.0 / cell, 0, c))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.2 .2.cmp(&a.2 .2))
            .then(a.2 .1.cmp(&b.2 .1))
            .then(a.2 .0.cmp(&b.2 .0))
    });
    let mut rank = 0;
    for i in 0..keyed.len() {
        rank = if i > 0 && keyed[i].0 == keyed[i - 1].0 { rank + 1 } else { 0 };
        keyed[i].1 = rank;
    }
    keyed.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then(b.2 .2.cmp(&a.2 .2))
            .then(a.2 .1.cmp(&b.2 .1))
            .then(a.2 .0.cmp(&b.2 .0))
    });
    keyed.truncate(quota);
    keyed.into_iter().map(|k| k.2).collect()
}

/// Detects oriented, described corners over an image pyramid. Output is
/// ordered by `(octave, score desc, v, u)`; depth and labels are unset.
pub fn detect(gray: &GrayImage, cfg: &FeatureConfig) -> Vec<FeaturePoint> {
    let quotas = level_quotas(cfg);
    let border = descriptor::EDGE_BORDER;
    let mut out = Vec::new();
    let mut carry = 0usize;
    for (level, &quota) in quotas.iter().enumerate() {
        let scale = cfg.scale_factor.powi(level as i32);
        let nw = (gray.width as f64 / scale).round() as usize;
        let nh = (gray.height as f64 / scale).round() as usize;
        if nw <= 2 * border + 1 || nh <= 2 * border + 1 {
            break;
        }
        let img = if level == 0 {
            gray.clone()
        } else {
            resize_gray(gray, nw, nh)
        };
        let corners = fast::detect_corners(&img, cfg.fast_threshold, border);
        let budget = quota + carry;
        let kept = retain_spread(corners, cfg.cell_size, nw, budget);
        carry = budget - kept.len();
        if kept.is_empty() {
            continue;
        }
        let smoothed = gaussian_blur(&img, 2.0, 3);
        let sx = gray.width as f64 / nw as f64;
        let sy = gray.height as f64 / nh as f64;
        let mut level_feats: Vec<FeaturePoint> = kept
            .into_iter()
            .map(|(x, y, score)| {
                let angle = descriptor::orientation(&img, x, y);
                let (rx, ry) = fast::refine_corner(&img, x, y, SUBPIXEL_HALF_WINDOW);
                FeaturePoint {
                    px: Pixel::new((rx + 0.5) * sx - 0.5, (ry + 0.5) * sy - 0.5),
                    octave: level,
                    angle,
                    score,
                    descriptor: descriptor::describe(&smoothed, x, y, angle),
                    raw_depth: 0,
                    label_code: 0,
                }
            })
            .collect();
        level_feats.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then(a.px.v.total_cmp(&b.px.v))
                .then(a.px.u.total_cmp(&b.px.u))
        });
        out.extend(level_feats);
    }
    out
}

/// Relative depth spread tolerated in the 3x3 neighborhood of a feature.
const DEPTH_EDGE_RATIO: f64 = 0.02;

/// Center depth, or 0 when the 3x3 neighborhood has holes or straddles a
/// depth discontinuity (the corner then belongs to no single surface).
pub(crate) fn stable_depth(depth: &DepthImage, x: usize, y: usize) -> u16 {
    let c = depth.get(x, y);
    if c == 0 {
        return 0;
    }
    let tol = DEPTH_EDGE_RATIO * c as f64 + 2.0;
    for ny in y.saturating_sub(1)..=(y + 1).min(depth.height - 1) {
        for nx in x.saturating_sub(1)..=(x + 1).min(depth.width - 1) {
            let d = depth.get(nx, ny);
            if d == 0 || (d as f64 - c as f64).abs() > tol {
                return 0;
            }
        }
    }
    c
}

/// Fills `raw_depth` and `label_code` from the nearest level-0 pixel.
/// Depth on a discontinuity is reported as invalid.
pub fn attach_depth_and_labels(feats: &mut [FeaturePoint], depth: &DepthImage, labels: &LabelImage) {
    for f in feats {
        if let Some((x, y)) = f.px.to_index(depth.width, depth.height) {
            f.raw_depth = stable_depth(depth, x, y);
            f.label_code = labels.get(x, y);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub a: usize,
    pub b: usize,
    pub distance: u32,
}

fn best_two(d: &Descriptor, pool: &[Descriptor]) -> (usize, u32, u32) {
    let mut best = (usize::MAX, u32::MAX, u32::MAX);
    for (j, e) in pool.iter().enumerate() {
        let h = hamming(d, e);
        if h < best.1 {
            best = (j, h, best.1);
        } else if h < best.2 {
            best.2 = h;
        }
    }
    best
}

/// Mutual-best Hamming matching with absolute and ratio thresholds, applied
/// symmetrically so `match(a, b)` mirrors `match(b, a)`.
pub fn match_descriptors(
    a: &[Descriptor],
    b: &[Descriptor],
    max_distance: u32,
    ratio: f64,
) -> Vec<Match> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let ab: Vec<_> = a.iter().map(|d| best_two(d, b)).collect();
    let ba: Vec<_> = b.iter().map(|d| best_two(d, a)).collect();
    let ratio_ok = |(_, best, second): (usize, u32, u32)| {
        second == u32::MAX || best as f64 <= ratio * second as f64
    };
    let mut out = Vec::new();
    for (i, &fwd) in ab.iter().enumerate() {
        let j = fwd.0;
        if fwd.1 > max_distance || ba[j].0 != i {
            continue;
        }
        if ratio_ok(fwd) && ratio_ok(ba[j]) {
            out.push(Match {
                a: i,
                b: j,
                distance: fwd.1,
            });
        }
    }
    out
}

/// [`match_descriptors`] over feature lists with the configured thresholds.
pub fn match_features(a: &[FeaturePoint], b: &[FeaturePoint], cfg: &FeatureConfig) -> Vec<Match> {
    let da: Vec<Descriptor> = a.iter().map(|f| f.descriptor).collect();
    let db: Vec<Descriptor> = b.iter().map(|f| f.descriptor).collect();
    match_descriptors(&da, &db, cfg.match_threshold, cfg.match_ratio)
}
