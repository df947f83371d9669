//! Per-frame joint keypoint files: `instance_code joint_name u v confidence`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Pixel;

/// Joints used to restrict object sampling to the trunk.
pub const TRUNK_JOINTS: [&str; 3] = ["left_shoulder", "right_shoulder", "mid_hip"];

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Panoptic code of the instance the joint belongs to.
    pub instance: u32,
    pub joint: String,
    pub px: Pixel,
    pub confidence: f64,
}

/// Parses a keypoint file, keeping only trunk joints.
pub fn parse_keypoints(text: &str, path: &Path) -> Result<Vec<Keypoint>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(
                path,
                i + 1,
                "expected `instance_id joint_name u v confidence`",
            ));
        }
        let bad = |what: &str| Error::parse(path, i + 1, format!("bad {what}"));
        let instance: u32 = f[0].parse().map_err(|_| bad("instance id"))?;
        let u: f64 = f[2].parse().map_err(|_| bad("u"))?;
        let v: f64 = f[3].parse().map_err(|_| bad("v"))?;
        let confidence: f64 = f[4].parse().map_err(|_| bad("confidence"))?;
        if !TRUNK_JOINTS.contains(&f[1]) {
            continue;
        }
        out.push(Keypoint {
            instance,
            joint: f[1].to_string(),
            px: Pixel::new(u, v),
            confidence,
        });
    }
    Ok(out)
}

pub fn load_keypoints(path: &Path) -> Result<Vec<Keypoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keypoints(&text, path)
}

pub fn keypoints_to_text(kps: &[Keypoint]) -> String {
    let mut s = String::new();
    for k in kps {
        let _ = writeln!(
            s,
            "{} {} {:.4} {:.4} {:.3}",
            k.instance, k.joint, k.px.u, k.px.v, k.confidence
        );
    }
    s
}
