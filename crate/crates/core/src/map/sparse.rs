//! Sparse landmark map used by the ego tracker.

use crate::features::{Descriptor, FeaturePoint};
use crate::geometry::{Intrinsics, Point3, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: u64,
    pub position: Point3,
    pub descriptor: Descriptor,
    pub observations: u32,
    /// Frame index of the latest observation.
    pub last_seen: usize,
    /// Ordinal of the latest keyframe that observed the point.
    pub last_keyframe: usize,
    /// Panoptic code of the pixel the point was created from.
    pub source_code: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SparseMap {
    points: Vec<MapPoint>,
    next_id: u64,
}

/// Bookkeeping of a keyframe visit for [`SparseMap::insert_map_points`].
#[derive(Debug, Clone, Copy)]
pub struct KeyframeStamp {
    pub frame_index: usize,
    pub keyframe: usize,
}

impl SparseMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MapPoint] {
        &self.points
    }

    pub fn get(&self, idx: usize) -> &MapPoint {
        &self.points[idx]
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    pub fn insert(&mut self, position: Point3, descriptor: Descriptor, source_code: u32, stamp: KeyframeStamp) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.points.push(MapPoint {
            id,
            position,
            descriptor,
            observations: 1,
            last_seen: stamp.frame_index,
            last_keyframe: stamp.keyframe,
            source_code,
        });
        id
    }

    /// Re-observation at a keyframe: running-average position, latest
    /// descriptor.
    pub fn observe(&mut self, idx: usize, measured: Option<Point3>, descriptor: Descriptor, stamp: KeyframeStamp) {
        let p = &mut self.points[idx];
        if let Some(m) = measured {
            let n = p.observations as f64;
            p.position = (p.position * n + m) / (n + 1.0);
        }
        p.observations += 1;
        p.descriptor = descriptor;
        p.last_seen = stamp.frame_index;
        p.last_keyframe = stamp.keyframe;
    }

    /// Marks a point as tracked in a non-keyframe.
    pub fn touch(&mut self, idx: usize, frame_index: usize) {
        self.points[idx].last_seen = frame_index;
    }

    /// Indices of points observed by one of the last `window` keyframes.
    pub fn local(&self, current_keyframe: usize, window: usize) -> Vec<usize> {
        let min_kf = current_keyframe.saturating_sub(window.saturating_sub(1));
        (0..self.points.len())
            .filter(|&i| self.points[i].last_keyframe >= min_kf)
            .collect()
    }

    /// Removes points not observed for more than `max_age` keyframes.
    /// Returns the number removed.
    pub fn cull(&mut self, current_keyframe: usize, max_age: usize) -> usize {
        let before = self.points.len();
        self.points
            .retain(|p| current_keyframe.saturating_sub(p.last_keyframe) <= max_age);
        before - self.points.len()
    }

    /// Keyframe update: matched features refresh their map points, unmatched
    /// features with valid depth become new points. `excluded` rejects
    /// features by panoptic code. `matched[i]` is the map index of feature
    /// `i`, if any. `pose` is world to camera. Returns the insertion count.
    pub fn insert_map_points(
        &mut self,
        pose: &Pose,
        features: &[FeaturePoint],
        matched: &[Option<usize>],
        excluded: impl Fn(u32) -> bool,
        k: &Intrinsics,
        stamp: KeyframeStamp,
    ) -> usize {
        let cam_to_world = pose.inverse();
        let mut inserted = 0;
        for (f, m) in features.iter().zip(matched) {
            if excluded(f.label_code) {
                continue;
            }
            let world = k
                .back_project(f.px, f.raw_depth as f64)
                .map(|pc| cam_to_world.transform(&pc));
            match (m, world) {
                (Some(idx), w) => self.observe(*idx, w, f.descriptor, stamp),
                (None, Some(w)) => {
                    self.insert(w, f.descriptor, f.label_code, stamp);
                    inserted += 1;
                }
                (None, None) => {}
            }
        }
        inserted
    }
}
