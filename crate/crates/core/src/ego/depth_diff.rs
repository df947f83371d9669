//! Depth-difference test for instances of normally static classes.
//!
//! Points sampled inside each non-prior thing instance of a reference frame
//! are warped into the current frame with the estimated poses. A point is
//! dynamic when its predicted depth disagrees with the measured depth by more
//! than `tau_z`; an instance is flagged when the dynamic share exceeds
//! `fraction`.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{Intrinsics, Pixel, Pose};
use crate::image::DepthImage;
use crate::io::mask::instance_of;
use crate::io::PanopticMask;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthDiffConfig {
    /// Depth disagreement threshold, meters.
    pub tau_z: f64,
    /// Lattice stride in pixels.
    pub stride: usize,
    /// Instance is dynamic when the dynamic share is strictly above this.
    pub fraction: f64,
    /// Minimum number of usable samples before an instance can be flagged.
    pub min_samples: usize,
}

impl Default for DepthDiffConfig {
    fn default() -> Self {
        Self {
            tau_z: 0.4,
            stride: 4,
            fraction: 0.30,
            min_samples: 5,
        }
    }
}

/// Depth, labels and estimated pose (world to camera) of one frame.
#[derive(Debug, Clone, Copy)]
pub struct DepthView<'a> {
    pub depth: &'a DepthImage,
    pub mask: &'a PanopticMask,
    pub pose: &'a Pose,
}

/// Per-instance `(dynamic, usable)` sample counts.
pub fn depth_difference_counts(
    prev: DepthView<'_>,
    curr: DepthView<'_>,
    k: &Intrinsics,
    cfg: &DepthDiffConfig,
) -> BTreeMap<u32, (usize, usize)> {
    let rel = curr.pose.compose(&prev.pose.inverse());
    let (w, h) = (prev.depth.width, prev.depth.height);
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let stride = cfg.stride.max(1);
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            let code = prev.mask.code_at(x, y);
            if code == 0 || instance_of(code) == 0 || prev.mask.is_prior_dynamic(code) {
                continue;
            }
            let raw = prev.depth.get(x, y);
            let Some(p_prev) = k.back_project(Pixel::new(x as f64, y as f64), raw as f64) else {
                continue;
            };
            let p_curr = rel.transform(&p_prev);
            let Some(px) = k.project(&p_curr) else {
                continue;
            };
            let Some((u, v)) = px.to_index(w, h) else {
                continue;
            };
            // A prior-dynamic object in front explains the disagreement.
            if curr.mask.is_prior_dynamic(curr.mask.code_at(u, v)) {
                continue;
            }
            let measured = curr.depth.get(u, v);
            if measured == 0 {
                continue;
            }
            let z_meas = measured as f64 / k.depth_scale;
            let e = counts.entry(code).or_insert((0, 0));
            e.1 += 1;
            if (p_curr.z - z_meas).abs() > cfg.tau_z {
                e.0 += 1;
            }
        }
    }
    counts
}

/// Codes of non-prior thing instances that moved between `prev` and `curr`.
pub fn identify_nonprior_dynamic(
    prev: DepthView<'_>,
    curr: DepthView<'_>,
    k: &Intrinsics,
    cfg: &DepthDiffConfig,
) -> BTreeSet<u32> {
    depth_difference_counts(prev, curr, k, cfg)
        .into_iter()
        .filter(|&(_, (dynamic, usable))| {
            usable >= cfg.min_samples && dynamic as f64 > cfg.fraction * usable as f64
        })
        .map(|(code, _)| code)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::LabelImage;
    use crate::io::ClassRegistry;
    use std::sync::Arc;

    const W: usize = 64;
    const H: usize = 48;

    fn k() -> Intrinsics {
        Intrinsics::new(50.0, 50.0, 31.5, 23.5, W, H, 5000.0).unwrap()
    }

    fn registry() -> Arc<ClassRegistry> {
        let mut r = ClassRegistry::new();
        r.insert(1, "person", true);
        r.insert(2, "box", false);
        Arc::new(r)
    }

    /// Wall at 3 m with a fronto-parallel box patch at 1.5 m covering
    /// columns `x0..x0+16`.
    fn scene(x0: usize) -> (DepthImage, PanopticMask) {
        let mut depth = DepthImage::filled(W, H, 15000);
        let mut labels = LabelImage::filled(W, H, 0);
        for y in 16..32 {
            for x in x0..(x0 + 16).min(W) {
                depth.set(x, y, 7500);
                labels.set(x, y, 2001);
            }
        }
        (depth, PanopticMask::new(labels, registry()).unwrap())
    }

    #[test]
    fn static_scene_has_no_flags() {
        let (d, m) = scene(20);
        let pose = Pose::identity();
        let v = DepthView {
            depth: &d,
            mask: &m,
            pose: &pose,
        };
        assert!(identify_nonprior_dynamic(v, v, &k(), &DepthDiffConfig::default()).is_empty());
    }

    #[test]
    fn large_motion_is_flagged_small_is_not() {
        let pose = Pose::identity();
        let (d0, m0) = scene(10);
        // 0.5 m sideways at 1.5 m depth is 16.7 px: the box vacates its pixels.
        let (d1, m1) = scene(27);
        let prev = DepthView {
            depth: &d0,
            mask: &m0,
            pose: &pose,
        };
        let curr = DepthView {
            depth: &d1,
            mask: &m1,
            pose: &pose,
        };
        let flagged = identify_nonprior_dynamic(prev, curr, &k(), &DepthDiffConfig::default());
        assert!(flagged.contains(&2001));

        // A 1 mm depth change stays below tau_z.
        let mut d2 = d0.clone();
        for v in d2.data.iter_mut().filter(|v| **v == 7500) {
            *v = 7505;
        }
        let curr = DepthView {
            depth: &d2,
            mask: &m0,
            pose: &pose,
        };
        assert!(identify_nonprior_dynamic(prev, curr, &k(), &DepthDiffConfig::default()).is_empty());
    }
}
