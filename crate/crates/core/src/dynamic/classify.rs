//! World-frame scene flow of object points and the per-object dynamic vote.

use crate::geometry::{Intrinsics, Pixel, Point3, Pose};

/// World displacement of a point observed at `px_curr` with raw depth
/// `raw_curr` under camera pose `pose_curr` (world to camera), relative to
/// its previous world position. `None` for invalid depth.
pub fn scene_flow(p_world_prev: &Point3, px_curr: Pixel, raw_curr: f64, pose_curr: &Pose, k: &Intrinsics) -> Option<Point3> {
    let pc = k.back_project(px_curr, raw_curr)?;
    Some(pose_curr.inverse().transform(&pc) - p_world_prev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub dynamic: bool,
    /// No point had a valid scene flow; `dynamic` is then false.
    pub no_evidence: bool,
    pub dynamic_points: usize,
    pub valid_points: usize,
}

impl Classification {
    pub fn fraction(&self) -> f64 {
        if self.valid_points == 0 {
            0.0
        } else {
            self.dynamic_points as f64 / self.valid_points as f64
        }
    }
}

/// Dynamic iff more than `dyn_fraction` of the flows exceed `sf_threshold`
/// in norm. Both comparisons are strict.
pub fn classify_prior(flows: &[Point3], sf_threshold: f64, dyn_fraction: f64) -> Classification {
    let valid = flows.len();
    let moving = flows.iter().filter(|f| f.norm() > sf_threshold).count();
    Classification {
        dynamic: valid > 0 && moving as f64 > dyn_fraction * valid as f64,
        no_evidence: valid == 0,
        dynamic_points: moving,
        valid_points: valid,
    }
}
