//! Prior-dynamic object tracking: lattice samples on instance masks are
//! carried across frames by sparse flow, voted dynamic by scene flow, and
//! given a rigid motion and speed.
//!
//! Work per frame is split so point tracking (which needs only the images)
//! can overlap ego-motion estimation: [`DynamicTracker::flow_stage`] is
//! `&self`, [`DynamicTracker::update`] needs the finished camera pose.

pub mod classify;
pub mod flow;
pub mod motion;
pub mod sampling;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ego::Correspondence;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pixel, Point3, Pose};
use crate::io::mask::class_of;
use crate::io::Frame;

pub use classify::{classify_prior, scene_flow, Classification};
pub use flow::{track_points, FlowConfig, FlowStatus, Pyramid};
pub use motion::{centroid_speed, estimate_object_motion, motion_speed, MotionEstimate, SpeedWindow};
pub use sampling::{sample_object, trunk_box, PointStatus, SampledPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct DynConfig {
    pub sample_stride: usize,
    /// Scene-flow norm above which a point moved, meters per frame pair.
    pub sf_threshold: f64,
    pub dyn_fraction: f64,
    pub min_tracked_points: usize,
    pub replenish_fraction: f64,
    pub max_lost_frames: usize,
    pub speed_window: usize,
    /// Share of a track's live points that must fall in an instance to match.
    pub assoc_fraction: f64,
    /// Growth of the trunk keypoint box (fraction of its size).
    pub trunk_dilation: f64,
    pub use_keypoints: bool,
    /// Look displacements up in the frame's dense flow when it has one.
    pub use_dense_flow: bool,
    /// Minimum distance of a replenished point from live ones, pixels.
    pub replenish_gap_px: f64,
    pub refine_iters: usize,
    pub seed: u64,
    /// Voxel size of the per-track point model used to re-acquire a track
    /// after full occlusion, meters.
    pub model_voxel: f64,
    /// Minimum predicted model points landing on an instance to re-acquire.
    pub reacquire_min_points: usize,
    /// Depth agreement for a predicted model point to count, meters.
    pub reacquire_depth_tol: f64,
    /// Largest plausible object rotation between frames, radians; anything
    /// above it is a degenerate fit and the previous motion is kept.
    pub max_motion_rotation: f64,
    pub flow: FlowConfig,
}

impl Default for DynConfig {
    fn default() -> Self {
        Self {
            sample_stride: 5,
            sf_threshold: 0.02,
            dyn_fraction: 0.30,
            min_tracked_points: 30,
            replenish_fraction: 0.5,
            max_lost_frames: 5,
            speed_window: 3,
            assoc_fraction: 0.30,
            trunk_dilation: 0.2,
            use_keypoints: true,
            use_dense_flow: true,
            replenish_gap_px: 2.0,
            refine_iters: 10,
            seed: 0,
            model_voxel: 0.02,
            reacquire_min_points: 5,
            reacquire_depth_tol: 0.3,
            max_motion_rotation: 0.2,
            flow: FlowConfig::default(),
        }
    }
}

impl DynConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sample_stride > 0
            && self.sf_threshold > 0.0
            && self.dyn_fraction > 0.0
            && self.dyn_fraction < 1.0
            && self.min_tracked_points > 0
            && self.replenish_fraction > 0.0
            && self.max_lost_frames > 0
            && self.speed_window > 0
            && self.assoc_fraction > 0.0
            && self.assoc_fraction <= 1.0
            && self.trunk_dilation >= 0.0
            && self.replenish_gap_px >= 0.0
            && self.refine_iters > 0
            && self.model_voxel > 0.0
            && self.reacquire_min_points > 0
            && self.reacquire_depth_tol > 0.0
            && self.max_motion_rotation > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid dynamic config {self:?}")));
        }
        self.flow.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    pub track_id: u64,
    pub class_id: u32,
    /// Panoptic code of the instance last matched.
    pub code: u32,
    pub points: Vec<SampledPoint>,
    /// Last image displacement per point, the next flow guess.
    guesses: Vec<[f64; 2]>,
    /// World motion between the last two frames.
    pub motion: Pose,
    /// Smoothed speed, m/s.
    pub speed: f64,
    /// Unsmoothed speed of the last frame pair.
    pub instant_speed: f64,
    pub centroid_speed: f64,
    /// Mean world position of the live points.
    pub centroid: Point3,
    pub last_seen: usize,
    pub dynamic: bool,
    pub no_evidence: bool,
    pub initial_count: usize,
    pub lost_frames: usize,
    window: SpeedWindow,
    last_depth: Option<f64>,
    /// Every surface point seen so far, carried along by `step`.
    model: Vec<Point3>,
    /// Per-frame displacement of the centroid under `motion`; predicts the
    /// model while the track is unobserved. Translation only, since motion
    /// fits on slivers of a half-hidden object are poorly constrained in
    /// rotation.
    step: Point3,
}

impl ObjectTrack {
    pub fn live(&self) -> usize {
        self.points.len()
    }
}

/// Per-frame state of one track as seen from the current camera.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    pub frame_index: usize,
    pub track_id: u64,
    pub class_id: u32,
    pub code: u32,
    /// Matched a mask instance this frame.
    pub matched: bool,
    pub dynamic: bool,
    pub no_evidence: bool,
    pub dynamic_fraction: f64,
    pub speed: f64,
    pub instant_speed: f64,
    pub centroid_speed: f64,
    /// Mean camera depth of the live points, meters.
    pub depth: f64,
    /// Bearing of the camera-frame centroid, `atan2(x, z)` in degrees.
    pub bearing_deg: f64,
    /// Depth change per second, negative when closing.
    pub range_rate: f64,
    pub n_points: usize,
    pub centroid_world: Point3,
    pub centroid_cam: Point3,
    pub motion: Pose,
    pub low_confidence: bool,
}

pub const DIAG_HEADER: &str =
    "# frame track_id class dynamic speed_mps depth_m bearing_deg n_points instant_speed_mps centroid_speed_mps";

impl TrackReport {
    /// One diagnostics line (no newline).
    pub fn diag_line(&self) -> String {
        format!(
            "{} {} {} {} {:.4} {:.4} {:.3} {} {:.4} {:.4}",
            self.frame_index,
            self.track_id,
            self.class_id,
            self.dynamic as u8,
            self.speed,
            self.depth,
            self.bearing_deg,
            self.n_points,
            self.instant_speed,
            self.centroid_speed
        )
    }
}

pub fn diag_text(reports: &[TrackReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "{}", r.diag_line());
    }
    s
}

/// Flow results of one frame, produced before the camera pose is known.
#[derive(Debug, Clone)]
pub struct FlowBatch {
    pub frame_index: usize,
    pyramid: Pyramid,
    /// Per track (same order as the tracker's tracks): destination + status.
    results: Vec<Vec<(Pixel, FlowStatus)>>,
}

#[derive(Debug, Clone)]
struct PrevFrame {
    index: usize,
    timestamp: f64,
    pyramid: Pyramid,
}

#[derive(Debug, Clone)]
pub struct DynamicTracker {
    cfg: DynConfig,
    k: Intrinsics,
    tracks: Vec<ObjectTrack>,
    next_id: u64,
    prev: Option<PrevFrame>,
}

fn mean(points: impl Iterator<Item = Point3>) -> Option<Point3> {
    let mut n = 0usize;
    let mut acc = Point3::zeros();
    for p in points {
        acc += p;
        n += 1;
    }
    (n > 0).then(|| acc / n as f64)
}

/// Live points first, then model points whose voxel is still free.
fn merge_model(live: &[SampledPoint], model: &[Point3], voxel: f64) -> Vec<Point3> {
    let key = |p: &Point3| {
        (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        )
    };
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(live.len() + model.len());
    for p in live.iter().map(|s| &s.p_world).chain(model) {
        if seen.insert(key(p)) {
            out.push(*p);
        }
    }
    out
}

impl DynamicTracker {
    pub fn new(cfg: DynConfig, k: Intrinsics) -> Self {
        Self {
            cfg,
            k,
            tracks: Vec::new(),
            next_id: 1,
            prev: None,
        }
    }

    pub fn config(&self) -> &DynConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[ObjectTrack] {
        &self.tracks
    }

    /// Carries every live point into `frame`. Pure; may run concurrently
    /// with ego-motion estimation for the same frame.
    pub fn flow_stage(&self, frame: &Frame) -> FlowBatch {
        let pyramid = Pyramid::new(&frame.gray(), self.cfg.flow.levels);
        let dense = if self.cfg.use_dense_flow { frame.flow.as_ref() } else { None };
        let results = match &self.prev {
            Some(prev) => self
                .tracks
                .iter()
                .map(|t| {
                    let px: Vec<Pixel> = t.points.iter().map(|p| p.px).collect();
                    track_points(&prev.pyramid, &pyramid, &px, &t.guesses, dense, &self.cfg.flow)
                })
                .collect(),
            None => vec![Vec::new(); self.tracks.len()],
        };
        FlowBatch {
            frame_index: frame.index,
            pyramid,
            results,
        }
    }

    fn trunk(&self, frame: &Frame, code: u32) -> Option<[f64; 4]> {
        if !self.cfg.use_keypoints {
            return None;
        }
        trunk_box(frame.keypoints.as_deref()?, code, self.cfg.trunk_dilation)
    }

    fn sample(&self, frame: &Frame, code: u32, pose: &Pose) -> Vec<SampledPoint> {
        sample_object(
            &frame.mask,
            code,
            &frame.depth,
            &self.k,
            pose,
            self.cfg.sample_stride,
            self.trunk(frame, code),
        )
    }

    /// Finishes frame `frame` given its camera pose (world to camera).
    pub fn update(&mut self, batch: FlowBatch, frame: &Frame, pose: &Pose) -> Result<Vec<TrackReport>> {
        if batch.frame_index != frame.index || batch.results.len() != self.tracks.len() {
            return Err(Error::Config("flow batch does not belong to this frame".into()));
        }
        let dt = match &self.prev {
            Some(p) => {
                let dt = frame.timestamp - p.timestamp;
                if !(dt > 0.0) {
                    return Err(Error::Format(format!(
                        "non-increasing timestamps {} -> {} at frame {}",
                        p.timestamp, frame.timestamp, frame.index
                    )));
                }
                Some(dt)
            }
            None => None,
        };
        let world_from_cam = pose.inverse();
        let (w, h) = (frame.depth.width, frame.depth.height);

        // Flow-tracked points with valid destination depth.
        struct Moved {
            prev_world: Point3,
            point: SampledPoint,
            disp: [f64; 2],
        }
        let mut moved: Vec<Vec<Moved>> = Vec::with_capacity(self.tracks.len());
        for (t, res) in self.tracks.iter().zip(&batch.results) {
            let mut v = Vec::new();
            for (p, &(q, status)) in t.points.iter().zip(res) {
                if status != FlowStatus::Tracked {
                    continue;
                }
                let Some((x, y)) = q.to_index(w, h) else { continue };
                let raw = frame.depth.get(x, y);
                let Some(pc) = self.k.back_project(q, raw as f64) else { continue };
                v.push(Moved {
                    prev_world: p.p_world,
                    point: SampledPoint {
                        px: q,
                        p_world: world_from_cam.transform(&pc),
                        raw_depth: raw,
                        status: PointStatus::Tracked,
                    },
                    disp: [q.u - p.px.u, q.v - p.px.v],
                });
            }
            moved.push(v);
        }

        // Instance association: plurality vote with a minimum share.
        let instances: Vec<u32> = frame
            .mask
            .instances()
            .into_iter()
            .map(|i| i.code)
            .filter(|&c| frame.mask.is_prior_dynamic(c))
            .collect();
        let mut votes: Vec<(usize, u64, u32, usize)> = Vec::new();
        for (ti, (t, mv)) in self.tracks.iter().zip(&moved).enumerate() {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for m in mv {
                if let Some((x, y)) = m.point.px.to_index(w, h) {
                    let c = frame.mask.code_at(x, y);
                    if instances.contains(&c) {
                        *counts.entry(c).or_default() += 1;
                    }
                }
            }
            for (code, n) in counts {
                if n as f64 >= self.cfg.assoc_fraction * mv.len() as f64 && n > 0 {
                    votes.push((n, t.track_id, code, ti));
                }
            }
        }
        votes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_match: Vec<Option<u32>> = vec![None; self.tracks.len()];
        let mut taken: Vec<u32> = Vec::new();
        for (_, _, code, ti) in votes {
            if track_match[ti].is_none() && !taken.contains(&code) {
                track_match[ti] = Some(code);
                taken.push(code);
            }
        }

        // Re-acquisition of tracks without a vote: project each point model
        // one step ahead and count depth-consistent hits per free instance.
        let mut reacq: Vec<(usize, u64, u32, usize)> = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            if track_match[ti].is_some() || t.model.is_empty() {
                continue;
            }
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for p in &t.model {
                let pc = pose.transform(&(p + t.step));
                let Some(q) = self.k.project(&pc) else { continue };
                let Some((x, y)) = q.to_index(w, h) else { continue };
                let c = frame.mask.code_at(x, y);
                if class_of(c) != t.class_id || taken.contains(&c) || !instances.contains(&c) {
                    continue;
                }
                let z = frame.depth.get(x, y) as f64 / self.k.depth_scale;
                if z > 0.0 && (z - pc.z).abs() < self.cfg.reacquire_depth_tol {
                    *counts.entry(c).or_default() += 1;
                }
            }
            for (code, n) in counts {
                if n >= self.cfg.reacquire_min_points {
                    reacq.push((n, t.track_id, code, ti));
                }
            }
        }
        reacq.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, _, code, ti) in reacq {
            if track_match[ti].is_none() && !taken.contains(&code) {
                track_match[ti] = Some(code);
                taken.push(code);
            }
        }

        let mut reports = Vec::new();
        let old_tracks = std::mem::take(&mut self.tracks);
        for ((mut t, mv), matched) in old_tracks.into_iter().zip(moved).zip(track_match) {
            let flows: Vec<Point3> = mv.iter().map(|m| m.point.p_world - m.prev_world).collect();
            let cls = classify_prior(&flows, self.cfg.sf_threshold, self.cfg.dyn_fraction);
            let mut low_confidence = true;
            if let Some(dt) = dt {
                let corr: Vec<Correspondence> = mv.iter().map(|m| Correspondence::new(m.prev_world, m.point.px)).collect();
                let est = estimate_object_motion(
                    &corr,
                    &self.k,
                    pose,
                    &t.motion,
                    self.cfg.seed ^ t.track_id.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ frame.index as u64,
                    self.cfg.refine_iters,
                );
                low_confidence = est.low_confidence || est.motion.rotation_angle() > self.cfg.max_motion_rotation;
                if !low_confidence {
                    t.motion = est.motion;
                }
                if let (Some(c_prev), Some(c_curr)) =
                    (mean(mv.iter().map(|m| m.prev_world)), mean(mv.iter().map(|m| m.point.p_world)))
                {
                    t.instant_speed = motion_speed(&t.motion, &c_prev, dt)?;
                    t.centroid_speed = centroid_speed(&c_prev, &c_curr, dt)?;
                    t.speed = t.window.push(t.instant_speed);
                    if !low_confidence {
                        t.step = t.motion.transform(&c_prev) - c_prev;
                    }
                }
                let step = t.step;
                t.model.iter_mut().for_each(|p| *p += step);
            }
            t.dynamic = cls.dynamic;
            t.no_evidence = cls.no_evidence;

            let mut pts: Vec<SampledPoint> = Vec::with_capacity(mv.len());
            let mut guesses = Vec::with_capacity(mv.len());
            let inside = |p: &SampledPoint, code: u32| p.px.to_index(w, h).is_some_and(|(x, y)| frame.mask.code_at(x, y) == code);
            for m in &mv {
                if matched.is_none_or(|code| inside(&m.point, code)) {
                    pts.push(m.point);
                    guesses.push(m.disp);
                }
            }
            if let Some(code) = matched {
                t.code = code;
                t.lost_frames = 0;
                t.last_seen = frame.index;
                let need = (self.cfg.min_tracked_points as f64).max(self.cfg.replenish_fraction * t.initial_count as f64);
                if (pts.len() as f64) < need {
                    let gap = self.cfg.replenish_gap_px;
                    // New points start from the mean image motion of the old ones.
                    let g = if guesses.is_empty() {
                        [0.0; 2]
                    } else {
                        let n = guesses.len() as f64;
                        let s = guesses.iter().fold([0.0; 2], |a, d| [a[0] + d[0], a[1] + d[1]]);
                        [s[0] / n, s[1] / n]
                    };
                    let fresh: Vec<SampledPoint> = self
                        .sample(frame, code, pose)
                        .into_iter()
                        .filter(|s| pts.iter().all(|p| p.px.distance(&s.px) > gap))
                        .collect();
                    for s in fresh {
                        pts.push(s);
                        guesses.push(g);
                    }
                }
                t.model = merge_model(&pts, &t.model, self.cfg.model_voxel);
            } else {
                t.lost_frames += 1;
            }
            t.points = pts;
            t.guesses = guesses;
            if t.lost_frames > self.cfg.max_lost_frames {
                continue;
            }
            if let Some(c) = mean(t.points.iter().map(|p| p.p_world)) {
                t.centroid = c;
            }
            let report = self.report(&mut t, frame, pose, matched.is_some(), &cls, low_confidence, dt);
            reports.push(report);
            self.tracks.push(t);
        }

        for code in instances {
            if taken.contains(&code) {
                continue;
            }
            let pts = self.sample(frame, code, pose);
            if pts.is_empty() {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let centroid = mean(pts.iter().map(|p| p.p_world)).expect("nonempty");
            let mut t = ObjectTrack {
                track_id: id,
                class_id: class_of(code),
                code,
                guesses: vec![[0.0; 2]; pts.len()],
                initial_count: pts.len(),
                points: pts,
                motion: Pose::identity(),
                speed: 0.0,
                instant_speed: 0.0,
                centroid_speed: 0.0,
                centroid,
                last_seen: frame.index,
                dynamic: false,
                no_evidence: true,
                lost_frames: 0,
                window: SpeedWindow::new(self.cfg.speed_window),
                last_depth: None,
                model: Vec::new(),
                step: Point3::zeros(),
            };
            t.model = merge_model(&t.points, &[], self.cfg.model_voxel);
            let cls = classify_prior(&[], self.cfg.sf_threshold, self.cfg.dyn_fraction);
            reports.push(self.report(&mut t, frame, pose, true, &cls, true, None));
            self.tracks.push(t);
        }

        self.prev = Some(PrevFrame {
            index: frame.index,
            timestamp: frame.timestamp,
            pyramid: batch.pyramid,
        });
        Ok(reports)
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &self,
        t: &mut ObjectTrack,
        frame: &Frame,
        pose: &Pose,
        matched: bool,
        cls: &Classification,
        low_confidence: bool,
        dt: Option<f64>,
    ) -> TrackReport {
        let cam_pts: Vec<Point3> = t.points.iter().map(|p| pose.transform(&p.p_world)).collect();
        let centroid_cam = mean(cam_pts.iter().copied()).unwrap_or_else(|| pose.transform(&t.centroid));
        let depth = centroid_cam.z;
        let range_rate = match (t.last_depth, dt) {
            (Some(d0), Some(dt)) => (depth - d0) / dt,
            _ => 0.0,
        };
        t.last_depth = Some(depth);
        TrackReport {
            frame_index: frame.index,
            track_id: t.track_id,
            class_id: t.class_id,
            code: t.code,
            matched,
            dynamic: t.dynamic,
            no_evidence: cls.no_evidence,
            dynamic_fraction: cls.fraction(),
            speed: t.speed,
            instant_speed: t.instant_speed,
            centroid_speed: t.centroid_speed,
            depth,
            bearing_deg: centroid_cam.x.atan2(centroid_cam.z).to_degrees(),
            range_rate,
            n_points: t.points.len(),
            centroid_world: t.centroid,
            centroid_cam,
            motion: t.motion,
            low_confidence,
        }
    }

    /// Sequential convenience: flow then update.
    pub fn process(&mut self, frame: &Frame, pose: &Pose) -> Result<Vec<TrackReport>> {
        let batch = self.flow_stage(frame);
        self.update(batch, frame, pose)
    }

    /// Index of the frame last processed.
    pub fn last_frame(&self) -> Option<usize> {
        self.prev.as_ref().map(|p| p.index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{frames, ground_truth, presets, SceneSpec};

    fn run(spec: &SceneSpec, cfg: DynConfig, mut check: impl FnMut(&DynamicTracker, &Frame, &[TrackReport])) {
        let gt = ground_truth(spec);
        let mut tr = DynamicTracker::new(cfg, spec.intrinsics);
        for f in frames(spec) {
            let pose = gt.camera.entries[f.index].1.inverse();
            let reps = tr.process(&f, &pose).unwrap();
            check(&tr, &f, &reps);
        }
    }

    fn walker(n: usize) -> SceneSpec {
        let mut s = presets::constant_walker();
        s.frames = n;
        s
    }

    #[test]
    fn one_person_keeps_one_id() {
        let mut ids = Vec::new();
        run(&walker(10), DynConfig::default(), |_, _, reps| {
            assert_eq!(reps.len(), 1);
            assert!(reps[0].matched);
            ids.push(reps[0].track_id);
        });
        assert!(ids.iter().all(|&i| i == ids[0]), "{ids:?}");
    }

    #[test]
    fn mask_dropout_keeps_the_id() {
        let mut s = walker(8);
        s.mask_dropout = vec![4];
        let mut seen = Vec::new();
        run(&s, DynConfig::default(), |_, f, reps| {
            assert_eq!(reps.len(), 1, "frame {}", f.index);
            assert_eq!(reps[0].matched, f.index != 4);
            seen.push(reps[0].track_id);
        });
        assert!(seen.iter().all(|&i| i == seen[0]));
    }

    #[test]
    fn walker_is_dynamic_with_true_speed() {
        let mut last = None;
        run(&walker(8), DynConfig::default(), |_, f, reps| {
            if f.index > 0 {
                assert!(reps[0].dynamic, "frame {}", f.index);
            }
            last = Some(reps[0].speed);
        });
        assert!((last.unwrap() - 0.9).abs() < 0.09);
    }

    #[test]
    fn replenished_points_lie_in_the_mask() {
        // A high floor forces replenishment every frame.
        let cfg = DynConfig {
            min_tracked_points: 100_000,
            ..DynConfig::default()
        };
        let mut fresh_total = 0;
        run(&walker(6), cfg, |tr, f, _| {
            for t in tr.tracks() {
                for p in &t.points {
                    let (x, y) = p.px.to_index(f.width(), f.height()).unwrap();
                    assert_eq!(f.mask.code_at(x, y), t.code);
                    fresh_total += (p.status == PointStatus::Fresh) as usize;
                }
            }
        });
        assert!(fresh_total > 0);
    }

    #[test]
    fn still_person_is_static() {
        let mut s = presets::still_person();
        s.frames = 10;
        run(&s, DynConfig::default(), |_, _, reps| {
            assert_eq!(reps.len(), 1);
            assert!(!reps[0].dynamic);
        });
    }

    #[test]
    fn batch_from_another_frame_is_rejected() {
        let s = walker(2);
        let fr: Vec<Frame> = frames(&s).collect();
        let mut tr = DynamicTracker::new(DynConfig::default(), s.intrinsics);
        let b = tr.flow_stage(&fr[1]);
        assert!(tr.update(b, &fr[0], &Pose::identity()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DynConfig::default().validate().is_ok());
        for bad in [
            DynConfig { sample_stride: 0, ..DynConfig::default() },
            DynConfig { dyn_fraction: 1.0, ..DynConfig::default() },
            DynConfig { speed_window: 0, ..DynConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn diag_line_layout() {
        let r = TrackReport {
            frame_index: 7,
            track_id: 2,
            class_id: 1,
            code: 1001,
            matched: true,
            dynamic: true,
            no_evidence: false,
            dynamic_fraction: 0.9,
            speed: 0.9,
            instant_speed: 0.91,
            centroid_speed: 0.89,
            depth: 2.2,
            bearing_deg: -12.5,
            range_rate: 0.0,
            n_points: 120,
            centroid_world: Point3::zeros(),
            centroid_cam: Point3::zeros(),
            motion: Pose::identity(),
            low_confidence: false,
        };
        assert_eq!(r.diag_line(), "7 2 1 1 0.9000 2.2000 -12.500 120 0.9100 0.8900");
        assert_eq!(DIAG_HEADER.split_whitespace().count(), 11);
    }
}
