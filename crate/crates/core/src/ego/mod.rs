//! Camera ego-motion: PnP solvers, robust estimation, motion-only
//! refinement, depth-difference motion cues and the frame tracker.

pub mod depth_diff;
pub mod epnp;
pub mod ransac;
pub mod refine;
pub mod tracker;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{Pixel, Point3};

pub use depth_diff::{identify_nonprior_dynamic, DepthDiffConfig};
pub use epnp::epnp;
pub use ransac::{ransac_pnp, PnpConfig, PnpResult};
pub use refine::{refine_pose, refine_pose_traced, reprojection_jacobian, RefineTrace};
pub use tracker::{EgoResult, EgoTracker, KeyframeRecord, TrackerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PnpError {
    #[error("need at least 6 correspondences, got {0}")]
    NotEnoughPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("tracking lost: {inliers} inliers, {required} required")]
    TrackingLost { inliers: usize, required: usize },
}

/// A world point and its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: Point3,
    pub px: Pixel,
    /// Measurement standard deviation in pixels; refinement weights the
    /// squared residual by `1 / sigma^2`.
    pub sigma: f64,
}

impl Correspondence {
    pub fn new(world: Point3, px: Pixel) -> Self {
        Self { world, px, sigma: 1.0 }
    }
}

/// Which matches the tracker may use for pose estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SystemMode {
    /// Every match.
    Baseline,
    /// Matches on prior-dynamic classes removed.
    Semantic,
    /// Prior-dynamic classes and instances flagged by depth difference removed.
    #[default]
    Full,
}

impl SystemMode {
    pub const ALL: [SystemMode; 3] = [SystemMode::Baseline, SystemMode::Semantic, SystemMode::Full];

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemMode::Baseline => "baseline",
            SystemMode::Semantic => "semantic",
            SystemMode::Full => "full",
        }
    }
}

impl fmt::Display for SystemMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "baseline" => Ok(SystemMode::Baseline),
            "semantic" => Ok(SystemMode::Semantic),
            "full" => Ok(SystemMode::Full),
            other => Err(crate::Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}
