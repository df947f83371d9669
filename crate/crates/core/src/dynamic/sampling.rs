//! Lattice sampling of object masks, optionally restricted to the trunk.

use crate::geometry::{Intrinsics, Pixel, Point3, Pose};
use crate::image::DepthImage;
use crate::io::{Keypoint, PanopticMask, TRUNK_JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Tracked,
    Lost,
    Fresh,
}

/// An object point in the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPoint {
    pub px: Pixel,
    pub p_world: Point3,
    pub raw_depth: u16,
    pub status: PointStatus,
}

/// Trunk rectangle `[u0, u1, v0, v1]` of an instance from its shoulder and
/// mid-hip joints, grown by `dilation` of its size (half on each side).
/// `None` unless all trunk joints are present.
pub fn trunk_box(keypoints: &[Keypoint], code: u32, dilation: f64) -> Option<[f64; 4]> {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for joint in TRUNK_JOINTS {
        let kp = keypoints.iter().find(|k| k.instance == code && k.joint == joint)?;
        b = [b[0].min(kp.px.u), b[1].max(kp.px.u), b[2].min(kp.px.v), b[3].max(kp.px.v)];
    }
    let gu = 0.5 * dilation * (b[1] - b[0]);
    let gv = 0.5 * dilation * (b[3] - b[2]);
    Some([b[0] - gu, b[1] + gu, b[2] - gv, b[3] + gv])
}

/// Pixels on a `stride` lattice inside instance `code` with valid depth,
/// back-projected to world with `pose` (world to camera). The lattice is
/// anchored at the image origin so samples are stable across frames.
pub fn sample_object(
    mask: &PanopticMask,
    code: u32,
    depth: &DepthImage,
    k: &Intrinsics,
    pose: &Pose,
    stride: usize,
    trunk: Option<[f64; 4]>,
) -> Vec<SampledPoint> {
    let Some(info) = mask.instances().into_iter().find(|i| i.code == code) else {
        return Vec::new();
    };
    let cam_to_world = pose.inverse();
    let first = |lo: usize| lo.div_ceil(stride) * stride;
    let mut out = Vec::new();
    let mut y = first(info.min_y);
    while y <= info.max_y {
        let mut x = first(info.min_x);
        while x <= info.max_x {
            let inside_trunk = trunk.is_none_or(|[u0, u1, v0, v1]| {
                let (u, v) = (x as f64, y as f64);
                u >= u0 && u <= u1 && v >= v0 && v <= v1
            });
            if inside_trunk && mask.code_at(x, y) == code {
                let raw = depth.get(x, y);
                let px = Pixel::new(x as f64, y as f64);
                if let Some(pc) = k.back_project(px, raw as f64) {
                    out.push(SampledPoint {
                        px,
                        p_world: cam_to_world.transform(&pc),
                        raw_depth: raw,
                        status: PointStatus::Fresh,
                    });
                }
            }
            x += stride;
        }
        y += stride;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::LabelImage;
    use crate::io::ClassRegistry;
    use std::sync::Arc;

    fn registry() -> Arc<ClassRegistry> {
        let mut r = ClassRegistry::new();
        r.insert(1, "person", true);
        Arc::new(r)
    }

    fn square_mask(x0: usize, y0: usize, side: usize) -> PanopticMask {
        let mut l = LabelImage::filled(120, 100, 0);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                l.set(x, y, 1001);
            }
        }
        PanopticMask::new(l, registry()).unwrap()
    }

    fn k() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 60.0, 50.0, 120, 100, 5000.0).unwrap()
    }

    #[test]
    fn fifty_square_stride_five_gives_one_hundred() {
        let mask = square_mask(20, 30, 50);
        let depth = DepthImage::filled(120, 100, 10000);
        let s = sample_object(&mask, 1001, &depth, &k(), &Pose::identity(), 5, None);
        assert_eq!(s.len(), 100);
        assert!(s.iter().all(|p| p.status == PointStatus::Fresh && (p.p_world.z - 2.0).abs() < 1e-12));
    }

    #[test]
    fn invalid_depth_gives_nothing() {
        let mask = square_mask(20, 30, 50);
        let depth = DepthImage::filled(120, 100, 0);
        assert!(sample_object(&mask, 1001, &depth, &k(), &Pose::identity(), 5, None).is_empty());
        assert!(sample_object(&mask, 1002, &depth, &k(), &Pose::identity(), 5, None).is_empty());
    }

    #[test]
    fn trunk_box_restricts_samples() {
        let mask = square_mask(20, 30, 50);
        let depth = DepthImage::filled(120, 100, 10000);
        let kp = |joint: &str, u: f64, v: f64| Keypoint {
            instance: 1001,
            joint: joint.into(),
            px: Pixel::new(u, v),
            confidence: 1.0,
        };
        // Trunk covering the upper half of the square.
        let kps = vec![kp("left_shoulder", 60.0, 35.0), kp("right_shoulder", 25.0, 35.0), kp("mid_hip", 42.0, 55.0)];
        let b = trunk_box(&kps, 1001, 0.2).unwrap();
        assert_eq!(b, [21.5, 63.5, 33.0, 57.0]);
        let s = sample_object(&mask, 1001, &depth, &k(), &Pose::identity(), 5, Some(b));
        assert!(!s.is_empty() && s.len() < 100);
        assert!(s.iter().all(|p| p.px.u >= b[0] && p.px.u <= b[1] && p.px.v >= b[2] && p.px.v <= b[3]));
        assert!(trunk_box(&kps[..2], 1001, 0.2).is_none());
    }
}
