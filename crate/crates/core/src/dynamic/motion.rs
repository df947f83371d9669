//! Rigid object motion between frames and the derived speed.

use std::collections::VecDeque;

use crate::ego::{epnp, ransac_pnp, refine_pose, Correspondence, PnpConfig};
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Point3, Pose};

pub const MOTION_INLIER_PX: f64 = 3.0;
const MIN_MOTION_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionEstimate {
    /// World-frame motion taking the object's previous points to current.
    pub motion: Pose,
    pub inliers: Vec<usize>,
    /// Too few correspondences; `motion` is the previous motion.
    pub low_confidence: bool,
    /// True if the propagated previous motion beat the fresh estimate.
    pub kept_previous: bool,
}

fn count_inliers(pose: &Pose, corr: &[Correspondence], k: &Intrinsics) -> (Vec<usize>, f64) {
    let mut inl = Vec::new();
    let mut total = 0.0;
    for (i, c) in corr.iter().enumerate() {
        if let Some(px) = k.project(&pose.transform(&c.world)) {
            let e = px.distance(&c.px);
            if e < MOTION_INLIER_PX {
                inl.push(i);
                total += e;
            }
        }
    }
    (inl, total)
}

/// Object motion from previous world points ↔ current pixels. Candidate A is
/// an EPnP-RANSAC solve, candidate B the previous motion; the one with more
/// inliers at 3 px (then lower total error) is refined on its inliers.
/// `pose_curr` maps world to the current camera.
pub fn estimate_object_motion(
    corr: &[Correspondence],
    k: &Intrinsics,
    pose_curr: &Pose,
    previous: &Pose,
    seed: u64,
    refine_iters: usize,
) -> MotionEstimate {
    let fallback = MotionEstimate {
        motion: *previous,
        inliers: Vec::new(),
        low_confidence: true,
        kept_previous: true,
    };
    if corr.len() < MIN_MOTION_POINTS {
        return fallback;
    }
    let to_world = pose_curr.inverse();
    let cfg = PnpConfig {
        inlier_px: MOTION_INLIER_PX,
        min_inliers: MIN_MOTION_POINTS,
        seed,
        refine_iters,
        ..PnpConfig::default()
    };
    let cand_b = pose_curr.compose(previous);
    let cand_a = ransac_pnp(corr, k, &cfg, None)
        .map(|r| r.pose)
        .or_else(|_| epnp(corr, k));
    let (inl_b, err_b) = count_inliers(&cand_b, corr, k);
    let (mut best, mut inl, mut kept_previous) = (cand_b, inl_b, true);
    if let Ok(a) = cand_a {
        let (inl_a, err_a) = count_inliers(&a, corr, k);
        if inl_a.len() > inl.len() || (inl_a.len() == inl.len() && err_a < err_b) {
            best = a;
            inl = inl_a;
            kept_previous = false;
        }
    }
    if inl.len() < MIN_MOTION_POINTS {
        return fallback;
    }
    let subset: Vec<Correspondence> = inl.iter().map(|&i| corr[i]).collect();
    let refined = refine_pose(&best, &subset, k, refine_iters);
    let (inliers, _) = count_inliers(&refined, corr, k);
    MotionEstimate {
        motion: to_world.compose(&refined),
        inliers,
        low_confidence: false,
        kept_previous,
    }
}

/// Centroid-compensated speed `‖t − (I − R) c‖ / dt`: the displacement of
/// the previous centroid `c` under the motion, so spinning in place reads 0.
pub fn motion_speed(motion: &Pose, centroid_prev: &Point3, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let moved = motion.transform(centroid_prev);
    Ok((moved - centroid_prev).norm() / dt)
}

/// Plain centroid-difference speed.
pub fn centroid_speed(prev: &Point3, curr: &Point3, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok((curr - prev).norm() / dt)
}

/// Moving average over the last `window` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedWindow {
    window: usize,
    samples: VecDeque<f64>,
}

impl SpeedWindow {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            samples: VecDeque::new(),
        }
    }

    pub fn push(&mut self, v: f64) -> f64 {
        self.samples.push_back(v);
        while self.samples.len() > self.window {
            self.samples.pop_front();
        }
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.samples.iter().sum::<f64>() / self.samples.len() as f64
        }
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() >= self.window
    }
}
