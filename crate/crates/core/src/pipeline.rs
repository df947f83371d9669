//! End-to-end processing: ego-motion, object tracking, feedback, and the
//! offline dense map over keyframes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{debug, info};

use crate::config::RunConfig;
use crate::dynamic::{DynamicTracker, TrackReport, DIAG_HEADER};
use crate::ego::{EgoResult, EgoTracker, KeyframeRecord, SystemMode};
use crate::error::{Error, Result};
use crate::feedback::{describe_static, make_messages, observe_instance, FeedbackLine, FeedbackMessage};
use crate::geometry::Pose;
use crate::io::{Frame, Sequence, Trajectory};
use crate::map::dense::{fuse_dense, DenseCloud, DenseConfig, DenseKeyframe};
use crate::map::octree::OctreeMap;

/// Share of lost frames at which a run is reported as failed (exit code 2).
pub const LOST_FAIL_FRACTION: f64 = 0.2;

pub const STAGES: [&str; 5] = ["ego", "flow", "dynamic", "feedback", "frame"];

/// Per-stage wall times in seconds, one sample per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingReport {
    pub samples: Vec<[f64; 5]>,
}

impl TimingReport {
    pub fn mean(&self, stage: &str) -> f64 {
        let Some(i) = STAGES.iter().position(|s| *s == stage) else {
            return 0.0;
        };
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s[i]).sum::<f64>() / self.samples.len() as f64
    }

    pub fn fps(&self) -> f64 {
        let m = self.mean("frame");
        if m > 0.0 {
            1.0 / m
        } else {
            0.0
        }
    }

    /// `dynamic` covers flow plus the pose-dependent update.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# stage mean_ms total_ms\n");
        for (i, name) in STAGES.iter().enumerate() {
            let total: f64 = self.samples.iter().map(|x| x[i]).sum();
            let _ = writeln!(s, "{name} {:.3} {:.3}", 1e3 * self.mean(name), 1e3 * total);
        }
        let _ = writeln!(s, "frames {}", self.samples.len());
        let _ = writeln!(s, "fps {:.3}", self.fps());
        s
    }
}

/// Everything one frame produced.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub ego: EgoResult,
    pub tracks: Vec<TrackReport>,
    pub feedback: Vec<FeedbackMessage>,
}

pub struct Pipeline {
    cfg: RunConfig,
    ego: EgoTracker,
    dynamic: Option<DynamicTracker>,
    timing: TimingReport,
    lost: usize,
    frames: usize,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let ego = EgoTracker::new(cfg.tracker.clone(), cfg.intrinsics, cfg.mode);
        // Object tracking belongs to the full system only.
        let dynamic = (cfg.mode == SystemMode::Full).then(|| DynamicTracker::new(cfg.dynamic.clone(), cfg.intrinsics));
        Ok(Self {
            cfg,
            ego,
            dynamic,
            timing: TimingReport::default(),
            lost: 0,
            frames: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn ego(&self) -> &EgoTracker {
        &self.ego
    }

    pub fn timing(&self) -> &TimingReport {
        &self.timing
    }

    pub fn lost_frames(&self) -> usize {
        self.lost
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn step(&mut self, frame: &Frame) -> Result<FrameOutput> {
        let k = self.cfg.intrinsics;
        if frame.width() != k.width || frame.height() != k.height {
            return Err(Error::Config(format!(
                "frame {} is {}x{}, intrinsics say {}x{}",
                frame.index,
                frame.width(),
                frame.height(),
                k.width,
                k.height
            )));
        }
        let t0 = Instant::now();
        let mut t_flow = 0.0;
        let (ego, batch, t_ego) = match &self.dynamic {
            Some(dt) if self.cfg.overlap => std::thread::scope(|s| {
                let h = s.spawn(|| {
                    let t = Instant::now();
                    (dt.flow_stage(frame), t.elapsed().as_secs_f64())
                });
                let t = Instant::now();
                let ego = self.ego.track(frame);
                let t_ego = t.elapsed().as_secs_f64();
                let (batch, tf) = h.join().expect("flow thread panicked");
                t_flow = tf;
                (ego, Some(batch), t_ego)
            }),
            Some(dt) => {
                let t = Instant::now();
                let ego = self.ego.track(frame);
                let t_ego = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let batch = dt.flow_stage(frame);
                t_flow = t.elapsed().as_secs_f64();
                (ego, Some(batch), t_ego)
            }
            None => {
                let t = Instant::now();
                let ego = self.ego.track(frame);
                (ego, None, t.elapsed().as_secs_f64())
            }
        };
        let t = Instant::now();
        let tracks = match (&mut self.dynamic, batch) {
            (Some(dt), Some(b)) => dt.update(b, frame, &ego.pose)?,
            _ => Vec::new(),
        };
        let t_dyn = t_flow + t.elapsed().as_secs_f64();

        let t = Instant::now();
        let feedback = self.feedback(frame, &ego, &tracks);
        let t_fb = t.elapsed().as_secs_f64();

        self.frames += 1;
        self.lost += ego.lost as usize;
        self.timing
            .samples
            .push([t_ego, t_flow, t_dyn, t_fb, t0.elapsed().as_secs_f64()]);
        debug!(
            "frame {}: inliers {} tracks {} lost {}",
            frame.index,
            ego.inlier_matches.len(),
            tracks.len(),
            ego.lost
        );
        Ok(FrameOutput { ego, tracks, feedback })
    }

    fn feedback(&self, frame: &Frame, ego: &EgoResult, tracks: &[TrackReport]) -> Vec<FeedbackMessage> {
        let k = &self.cfg.intrinsics;
        let fb = &self.cfg.feedback;
        let mut msgs = make_messages(tracks, &frame.mask.registry, fb);
        // Static prior objects and moving non-prior ones: direction and depth.
        let mut still: Vec<_> = tracks
            .iter()
            .filter(|r| r.matched && !r.dynamic && !r.no_evidence)
            .filter_map(|r| observe_instance(frame, r.code, k))
            .collect();
        if self.cfg.mode == SystemMode::Full {
            still.extend(ego.nonprior_dynamic_ids.iter().filter_map(|&c| observe_instance(frame, c, k)));
        }
        msgs.extend(describe_static(&still, fb));
        msgs.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        msgs
    }
}

/// Collected results of a whole run.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    /// Camera to world per frame.
    pub trajectory: Trajectory,
    pub tracks: Vec<TrackReport>,
    pub feedback: Vec<(usize, FeedbackMessage)>,
    pub keyframes: Vec<KeyframeRecord>,
    /// Keyframe frames, kept only when asked for.
    pub keyframe_frames: Vec<Frame>,
    pub timing: TimingReport,
    pub frames: usize,
    pub lost: usize,
}

impl RunOutput {
    pub fn lost_fraction(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.lost as f64 / self.frames as f64
        }
    }

    /// 0 on success, 2 if tracking was lost in at least 20% of frames.
    pub fn exit_code(&self) -> i32 {
        if self.frames > 0 && self.lost_fraction() >= LOST_FAIL_FRACTION {
            2
        } else {
            0
        }
    }

    pub fn diag_text(&self) -> String {
        let mut s = format!("{DIAG_HEADER}\n");
        for r in &self.tracks {
            let _ = writeln!(s, "{}", r.diag_line());
        }
        s
    }

    pub fn feedback_text(&self) -> String {
        let mut s = String::new();
        for (frame, m) in &self.feedback {
            let _ = writeln!(s, "{}", FeedbackLine { frame: *frame, message: m });
        }
        s
    }

    pub fn keyframes_text(&self) -> String {
        keyframes_to_text(&self.keyframes)
    }

    /// Dense cloud and octree over the retained keyframe frames.
    pub fn build_map(&self, cfg: &RunConfig) -> Result<(DenseCloud, OctreeMap)> {
        if self.keyframe_frames.len() != self.keyframes.len() {
            return Err(Error::NotEnoughData("keyframe frames were not retained".into()));
        }
        build_map(&self.keyframes, &self.keyframe_frames, cfg, &cfg.map)
    }
}

/// Runs every frame in order. `keep_keyframes` retains keyframe images for
/// an in-memory map.
pub fn run(cfg: &RunConfig, frames: impl IntoIterator<Item = Frame>, keep_keyframes: bool) -> Result<RunOutput> {
    let mut p = Pipeline::new(cfg.clone())?;
    let mut out = RunOutput::default();
    for frame in frames {
        let fo = p.step(&frame)?;
        out.trajectory.push(fo.ego.timestamp, fo.ego.pose.inverse());
        out.feedback.extend(fo.feedback.into_iter().map(|m| (frame.index, m)));
        out.tracks.extend(fo.tracks);
        if keep_keyframes && fo.ego.keyframe {
            out.keyframe_frames.push(frame);
        }
    }
    out.keyframes = p.ego().keyframes().to_vec();
    out.timing = p.timing().clone();
    out.frames = p.frames();
    out.lost = p.lost_frames();
    info!(
        "{} frames, {} lost, {} keyframes, {:.2} fps",
        out.frames,
        out.lost,
        out.keyframes.len(),
        out.timing.fps()
    );
    Ok(out)
}

pub fn run_sequence(cfg: &RunConfig, seq: &Sequence, keep_keyframes: bool) -> Result<RunOutput> {
    run(cfg, seq.frames(), keep_keyframes)
}

/// Fuses `frames` (one per record, same order) and builds the octree.
pub fn build_map(records: &[KeyframeRecord], frames: &[Frame], cfg: &RunConfig, dense: &DenseConfig) -> Result<(DenseCloud, OctreeMap)> {
    if records.is_empty() {
        return Err(Error::NotEnoughData("no keyframe records".into()));
    }
    let inputs: Vec<DenseKeyframe> = records
        .iter()
        .zip(frames)
        .enumerate()
        .map(|(i, (r, f))| DenseKeyframe {
            frame: f,
            pose: r.pose,
            flagged: &r.flagged,
            keyframe: i,
        })
        .collect();
    let cloud = fuse_dense(&inputs, &cfg.intrinsics, dense)?;
    let octree = OctreeMap::build(&cloud.positions(), dense.resolution)?;
    Ok((cloud, octree))
}

/// Loads the recorded keyframes from `seq` and builds the map.
pub fn map_from_sequence(seq: &Sequence, records: &[KeyframeRecord], cfg: &RunConfig, dense: &DenseConfig) -> Result<(DenseCloud, OctreeMap)> {
    let mut frames = Vec::with_capacity(records.len());
    for r in records {
        let f = seq.load_frame(r.frame_index)?;
        if (f.timestamp - r.timestamp).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "keyframe {} has timestamp {} but the sequence frame has {}",
                r.frame_index, r.timestamp, f.timestamp
            )));
        }
        frames.push(f);
    }
    build_map(records, &frames, cfg, dense)
}

/// `frame_index timestamp tx ty tz qx qy qz qw flagged`, camera-to-world
/// pose, flagged codes comma-separated or `-`.
pub fn keyframes_to_text(records: &[KeyframeRecord]) -> String {
    let mut s = String::from("# frame_index timestamp tx ty tz qx qy qz qw flagged\n");
    for r in records {
        let (t, q) = r.pose.inverse().to_quaternion();
        let flagged = if r.flagged.is_empty() {
            "-".to_string()
        } else {
            r.flagged.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(
            s,
            "{} {:.6} {} {} {} {} {} {} {} {}",
            r.frame_index, r.timestamp, t[0], t[1], t[2], q[0], q[1], q[2], q[3], flagged
        );
    }
    s
}

pub fn parse_keyframes(text: &str, path: &Path) -> Result<Vec<KeyframeRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 10 {
            return Err(Error::parse(path, i + 1, "expected 10 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(path, i + 1, format!("bad number {s:?}")));
        let frame_index = f[0].parse().map_err(|_| Error::parse(path, i + 1, "bad frame index"))?;
        let mut v = [0.0; 8];
        for (j, x) in v.iter_mut().enumerate() {
            *x = num(f[j + 1])?;
        }
        let pose = Pose::from_quaternion([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]])
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?
            .inverse();
        let flagged: BTreeSet<u32> = if f[9] == "-" {
            BTreeSet::new()
        } else {
            f[9].split(',')
                .map(|c| c.parse().map_err(|_| Error::parse(path, i + 1, format!("bad code {c:?}"))))
                .collect::<Result<_>>()?
        };
        out.push(KeyframeRecord {
            frame_index,
            timestamp: v[0],
            pose,
            flagged,
        });
    }
    Ok(out)
}

pub fn read_keyframes(path: &Path) -> Result<Vec<KeyframeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keyframes(&text, path)
}
