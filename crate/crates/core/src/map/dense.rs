//! Offline dense fusion of keyframe depth into a colored world cloud.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pixel, Point3, Pose};
use crate::io::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseConfig {
    /// Octree resolution; the cloud is de-duplicated at half of it.
    pub resolution: f64,
    /// Drop prior-dynamic pixels and instances flagged at the keyframe.
    pub filter_dynamic: bool,
    pub pixel_stride: usize,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            resolution: super::octree::DEFAULT_RESOLUTION,
            filter_dynamic: true,
            pixel_stride: 1,
        }
    }
}

/// A keyframe as fusion input.
#[derive(Debug, Clone, Copy)]
pub struct DenseKeyframe<'a> {
    pub frame: &'a Frame,
    /// World to camera.
    pub pose: Pose,
    /// Non-prior instances flagged dynamic at this keyframe.
    pub flagged: &'a BTreeSet<u32>,
    /// Keyframe ordinal.
    pub keyframe: usize,
}

/// A voxel center with the color and provenance of its first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Point3,
    pub color: [u8; 3],
    pub keyframe: usize,
    pub frame_index: usize,
    pub pixel: (u32, u32),
    /// Panoptic code under the source pixel.
    pub code: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseCloud {
    pub voxel: f64,
    pub points: Vec<CloudPoint>,
}

impl DenseCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn colored(&self) -> Vec<(Point3, [u8; 3])> {
        self.points.iter().map(|p| (p.position, p.color)).collect()
    }
}

fn voxel_key(p: &Point3, voxel: f64) -> [i64; 3] {
    [
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    ]
}

/// Back-projects every eligible pixel of every keyframe and keeps one point
/// per `resolution / 2` voxel, at the voxel center. Order follows the first
/// sample of each voxel, so the output is deterministic.
pub fn fuse_dense(keyframes: &[DenseKeyframe<'_>], k: &Intrinsics, cfg: &DenseConfig) -> Result<DenseCloud> {
    if keyframes.is_empty() {
        return Err(Error::NotEnoughData("dense fusion needs at least one keyframe".into()));
    }
    if !(cfg.resolution > 0.0) || cfg.pixel_stride == 0 {
        return Err(Error::Config(format!("invalid dense config {cfg:?}")));
    }
    let voxel = cfg.resolution / 2.0;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut points = Vec::new();
    for kf in keyframes {
        let f = kf.frame;
        let to_world = kf.pose.inverse();
        for y in (0..f.height()).step_by(cfg.pixel_stride) {
            for x in (0..f.width()).step_by(cfg.pixel_stride) {
                let code = f.mask.code_at(x, y);
                if cfg.filter_dynamic && code != 0 && (f.mask.is_prior_dynamic(code) || kf.flagged.contains(&code)) {
                    continue;
                }
                let Some(pc) = k.back_project(Pixel::new(x as f64, y as f64), f.depth.get(x, y) as f64) else {
                    continue;
                };
                let key = voxel_key(&to_world.transform(&pc), voxel);
                index.entry(key).or_insert_with(|| {
                    points.push(CloudPoint {
                        position: Point3::new(
                            (key[0] as f64 + 0.5) * voxel,
                            (key[1] as f64 + 0.5) * voxel,
                            (key[2] as f64 + 0.5) * voxel,
                        ),
                        color: f.rgb.get(x, y),
                        keyframe: kf.keyframe,
                        frame_index: f.index,
                        pixel: (x as u32, y as u32),
                        code,
                    });
                    points.len() - 1
                });
            }
        }
    }
    Ok(DenseCloud { voxel, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{DepthImage, LabelImage, RgbImage};
    use crate::io::{ClassRegistry, PanopticMask};
    use std::sync::Arc;

    fn k() -> Intrinsics {
        Intrinsics::new(50.0, 50.0, 20.0, 15.0, 40, 30, 5000.0).unwrap()
    }

    fn frame(depth: DepthImage, labels: LabelImage) -> Frame {
        let mut r = ClassRegistry::new();
        r.insert(1, "person", true);
        r.insert(2, "box", false);
        let mask = PanopticMask::new(labels, Arc::new(r)).unwrap();
        Frame::new(0, 0.0, RgbImage::filled(40, 30, [10, 20, 30]), depth, mask).unwrap()
    }

    /// Depth of a tilted plane so neighboring pixels land in distinct voxels.
    fn slanted() -> DepthImage {
        let mut d = DepthImage::filled(40, 30, 0);
        for y in 0..30 {
            for x in 0..40 {
                d.set(x, y, 5000 + (x as u16) * 400 + (y as u16) * 17);
            }
        }
        d
    }

    #[test]
    fn no_dynamics_fuses_every_valid_pixel() {
        let mut d = slanted();
        d.set(3, 3, 0);
        let f = frame(d.clone(), LabelImage::filled(40, 30, 0));
        let none = BTreeSet::new();
        let kf = DenseKeyframe { frame: &f, pose: Pose::identity(), flagged: &none, keyframe: 0 };
        let cfg = DenseConfig { resolution: 0.004, ..DenseConfig::default() };
        let cloud = fuse_dense(&[kf], &k(), &cfg).unwrap();
        // Brute-force distinct voxel count over the valid pixels.
        let mut keys = BTreeSet::new();
        for y in 0..30 {
            for x in 0..40 {
                if let Some(p) = k().back_project(Pixel::new(x as f64, y as f64), d.get(x, y) as f64) {
                    keys.insert(voxel_key(&p, 0.002));
                }
            }
        }
        assert_eq!(cloud.len(), keys.len());
        assert!(cloud.len() > 1000);
        assert!(cloud.points.iter().all(|p| p.color == [10, 20, 30]));
    }

    #[test]
    fn dynamic_pixels_are_excluded_and_provenance_is_clean() {
        let mut l = LabelImage::filled(40, 30, 0);
        for y in 0..30 {
            for x in 0..10 {
                l.set(x, y, 1001);
                l.set(x + 20, y, 2001);
                l.set(x + 30, y, 2002);
            }
        }
        let f = frame(slanted(), l);
        let flagged: BTreeSet<u32> = [2001].into();
        let kf = DenseKeyframe { frame: &f, pose: Pose::identity(), flagged: &flagged, keyframe: 0 };
        let cfg = DenseConfig { resolution: 0.004, ..DenseConfig::default() };
        let on = fuse_dense(&[kf], &k(), &cfg).unwrap();
        assert!(on.points.iter().all(|p| p.code == 0 || p.code == 2002));
        assert!(on.points.iter().any(|p| p.code == 2002));
        let off = fuse_dense(&[kf], &k(), &DenseConfig { filter_dynamic: false, ..cfg }).unwrap();
        assert!(off.points.iter().any(|p| p.code == 1001) && off.points.iter().any(|p| p.code == 2001));
        assert!(off.len() > on.len());
    }

    #[test]
    fn fully_masked_frame_gives_empty_cloud() {
        let f = frame(slanted(), LabelImage::filled(40, 30, 1001));
        let none = BTreeSet::new();
        let kf = DenseKeyframe { frame: &f, pose: Pose::identity(), flagged: &none, keyframe: 0 };
        assert!(fuse_dense(&[kf], &k(), &DenseConfig::default()).unwrap().is_empty());
        assert!(fuse_dense(&[], &k(), &DenseConfig::default()).is_err());
    }

    #[test]
    fn points_are_voxel_centers_far_apart() {
        let f = frame(slanted(), LabelImage::filled(40, 30, 0));
        let none = BTreeSet::new();
        let pose = Pose::from_translation(0.01, -0.02, 0.3);
        let kfs = [
            DenseKeyframe { frame: &f, pose: Pose::identity(), flagged: &none, keyframe: 0 },
            DenseKeyframe { frame: &f, pose, flagged: &none, keyframe: 1 },
        ];
        let cfg = DenseConfig { resolution: 0.02, ..DenseConfig::default() };
        let cloud = fuse_dense(&kfs, &k(), &cfg).unwrap();
        let pts = cloud.positions();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!((pts[i] - pts[j]).norm() > cfg.resolution / 4.0);
            }
        }
        assert!(cloud.points.iter().any(|p| p.keyframe == 1));
    }
}
