//! Sequence generation: in-memory frames, ground truth and TUM-layout
//! directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::render::{forward_flow, render, Hit, Snapshot};
use super::spec::SceneSpec;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};
use nalgebra::Vector3;
use crate::io::flow::write_flow;
use crate::io::images::{write_rgb, write_u16};
use crate::io::keypoints::keypoints_to_text;
use crate::io::mask::write_mask;
use crate::io::{ClassRegistry, Frame, PanopticMask, Trajectory};

/// Ground-truth state of one object in one frame, in the world of the
/// first camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub timestamp: f64,
    /// Local to world.
    pub pose: Pose,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Camera to world, frame 0 at the identity.
    pub camera: Trajectory,
    pub objects: BTreeMap<u32, Vec<ObjectState>>,
}

pub fn registry(spec: &SceneSpec) -> ClassRegistry {
    let mut r = ClassRegistry::new();
    for (id, c) in &spec.classes {
        r.insert(*id, c.name.clone(), c.prior);
    }
    r
}

/// World re-anchoring so that frame 0's camera is the origin.
fn anchor(spec: &SceneSpec) -> Pose {
    spec.camera.pose_at(0.0).inverse()
}

pub fn ground_truth(spec: &SceneSpec) -> GroundTruth {
    let a = anchor(spec);
    let mut camera = Trajectory::new();
    let mut objects: BTreeMap<u32, Vec<ObjectState>> = BTreeMap::new();
    for i in 0..spec.frames {
        let t = spec.time_of(i);
        let snap = Snapshot::at(spec, t);
        camera.push(t, a.compose(&snap.camera));
        for (p, body) in spec.primitives.iter().zip(&snap.bodies) {
            if p.code == 0 {
                continue;
            }
            objects.entry(p.code).or_default().push(ObjectState {
                timestamp: t,
                pose: a.compose(body),
                speed: p.motion.speed_at(t),
            });
        }
    }
    GroundTruth { camera, objects }
}

/// Renders frames in order, carrying center-ray hits for the flow.
pub struct FrameSource<'a> {
    spec: &'a SceneSpec,
    registry: Arc<ClassRegistry>,
    next: usize,
    prev_hits: Option<Vec<Option<Hit>>>,
}

impl<'a> FrameSource<'a> {
    pub fn new(spec: &'a SceneSpec) -> Self {
        Self {
            spec,
            registry: Arc::new(registry(spec)),
            next: 0,
            prev_hits: None,
        }
    }
}

impl Iterator for FrameSource<'_> {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        if self.next >= self.spec.frames {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let r = render(self.spec, i);
        let flow = match &self.prev_hits {
            Some(prev) if self.spec.emit_flow => Some(forward_flow(self.spec, prev, i)),
            None if self.spec.emit_flow => Some(forward_flow(self.spec, &[], 0)),
            _ => None,
        };
        self.prev_hits = Some(r.hits);
        let mask = PanopticMask::new(r.labels, self.registry.clone()).expect("spec classes are registered");
        let mut frame = Frame::new(i, self.spec.time_of(i), r.rgb, r.depth, mask).expect("consistent sizes");
        frame.flow = flow;
        frame.keypoints = self.spec.emit_keypoints.then_some(r.keypoints);
        Some(frame)
    }
}

pub fn frames(spec: &SceneSpec) -> FrameSource<'_> {
    FrameSource::new(spec)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// True if world point `p` lies inside object `code`'s box, grown by
/// `margin` meters, at any frame: the swept volume sampled at frame times.
pub fn in_swept_volume(spec: &SceneSpec, gt: &GroundTruth, code: u32, p: &Point3, margin: f64) -> bool {
    let Some(prim) = spec.primitives.iter().find(|q| q.code == code) else {
        return false;
    };
    let half = prim.size / 2.0 + Vector3::repeat(margin);
    gt.objects.get(&code).is_some_and(|states| {
        states.iter().any(|s| {
            let local = s.pose.inverse().transform(p);
            (0..3).all(|a| local[a].abs() <= half[a])
        })
    })
}

pub fn objects_gt_text(gt: &GroundTruth) -> String {
    let mut s = String::from("# timestamp code tx ty tz qx qy qz qw speed_mps\n");
    let mut rows: Vec<(f64, u32, ObjectState)> = gt
        .objects
        .iter()
        .flat_map(|(code, v)| v.iter().map(move |o| (o.timestamp, *code, *o)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (t, code, o) in rows {
        let (tr, q) = o.pose.to_quaternion();
        let _ = writeln!(
            s,
            "{t:.6} {code} {} {} {} {} {} {} {} {}",
            tr[0], tr[1], tr[2], q[0], q[1], q[2], q[3], o.speed
        );
    }
    s
}

/// Writes a TUM-layout sequence for `spec` into `out`.
pub fn emit_sequence(spec: &SceneSpec, out: &Path) -> Result<()> {
    spec.validate()?;
    for d in ["rgb", "depth", "masks"] {
        mkdir(&out.join(d))?;
    }
    if spec.emit_flow {
        mkdir(&out.join("flow"))?;
    }
    if spec.emit_keypoints {
        mkdir(&out.join("keypoints"))?;
    }
    let mut idx: BTreeMap<&str, String> = BTreeMap::new();
    for frame in frames(spec) {
        let name = format!("{:06}", frame.index);
        let ts = format!("{:.6}", frame.timestamp);
        write_rgb(&frame.rgb, &out.join(format!("rgb/{name}.png")))?;
        write_u16(&frame.depth, &out.join(format!("depth/{name}.png")))?;
        write_mask(&frame.mask.labels, &out.join(format!("masks/{name}.png")))?;
        let _ = writeln!(idx.entry("rgb.txt").or_default(), "{ts} rgb/{name}.png");
        let _ = writeln!(idx.entry("depth.txt").or_default(), "{ts} depth/{name}.png");
        let _ = writeln!(idx.entry("masks.txt").or_default(), "{ts} masks/{name}.png");
        if let Some(flow) = &frame.flow {
            write_flow(flow, &out.join(format!("flow/{name}.flo")))?;
            let _ = writeln!(idx.entry("flow.txt").or_default(), "{ts} flow/{name}.flo");
        }
        if let Some(kps) = &frame.keypoints {
            write_text(&out.join(format!("keypoints/{name}.txt")), &keypoints_to_text(kps))?;
            let _ = writeln!(idx.entry("keypoints.txt").or_default(), "{ts} keypoints/{name}.txt");
        }
    }
    for (file, body) in &idx {
        write_text(&out.join(file), &format!("# timestamp filename\n{body}"))?;
    }
    let gt = ground_truth(spec);
    write_text(&out.join("groundtruth.txt"), &gt.camera.to_text())?;
    write_text(&out.join("objects_gt.txt"), &objects_gt_text(&gt))?;
    write_text(&out.join("classes.txt"), &registry(spec).to_text())?;
    write_text(&out.join("scene.txt"), &spec.to_text())?;
    Ok(())
}
