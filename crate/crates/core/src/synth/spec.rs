//! Scene descriptions and their `[section]` / `key=value` text form.
//!
//! ```text
//! [scene]
//! width=640
//! frames=100
//! [camera]
//! motion=arc
//! center=0,0,2.5
//! radius=2.5
//! [static wall]
//! size=4,3,0.1
//! position=0,0,3
//! [object walker]
//! class=1
//! class_name=person
//! prior=true
//! person=true
//! motion=linear
//! velocity=0.9,0,0
//! ```
//!
//! Vectors are comma separated. Rotations are rotation vectors in degrees,
//! angular rates in degrees per second. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Point3, Pose};
use crate::io::mask::make_code;

#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub seed: u64,
    /// Edge length of one texture cell in meters.
    pub cell: f64,
    pub tint: [f64; 3],
}

impl Default for Texture {
    fn default() -> Self {
        Self {
            seed: 1,
            cell: 0.1,
            tint: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static {
        pose: Pose,
    },
    /// Constant linear velocity (m/s) and angular rate about the own origin
    /// (rotation vector, rad/s).
    Linear {
        start: Pose,
        velocity: Vector3<f64>,
        angular: Vector3<f64>,
    },
    /// Circular path in the x-z plane around `center`, looking at `look_at`.
    Arc {
        center: Point3,
        radius: f64,
        start: f64,
        rate: f64,
        look_at: Point3,
    },
}

/// Rotation whose z axis points from `from` to `to`, with +y (down) kept
/// as close to world +y as possible.
pub fn look_at(from: &Point3, to: &Point3) -> Matrix3<f64> {
    let z = (to - from).normalize();
    let down = Vector3::new(0.0, 1.0, 0.0);
    let x = down.cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

impl Motion {
    /// Local-to-world pose at time `t` seconds.
    pub fn pose_at(&self, t: f64) -> Pose {
        match self {
            Motion::Static { pose } => *pose,
            Motion::Linear {
                start,
                velocity,
                angular,
            } => {
                let r = Pose::from_axis_angle(&(angular * t), Vector3::zeros());
                Pose::new(r.rotation * start.rotation, start.translation + velocity * t)
            }
            Motion::Arc {
                center,
                radius,
                start,
                rate,
                look_at: target,
            } => {
                let th = start + rate * t;
                let pos = center + Vector3::new(th.sin(), 0.0, -th.cos()) * *radius;
                Pose::new(look_at(&pos, target), pos)
            }
        }
    }

    /// Linear speed of the local origin at time `t`, m/s.
    pub fn speed_at(&self, _t: f64) -> f64 {
        match self {
            Motion::Static { .. } => 0.0,
            Motion::Linear { velocity, .. } => velocity.norm(),
            Motion::Arc { radius, rate, .. } => (radius * rate).abs(),
        }
    }
}

/// A textured box. `size` holds the full extents along the local axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub name: String,
    pub size: Vector3<f64>,
    pub texture: Texture,
    /// Rendered from inside (a room enclosing the camera).
    pub inside: bool,
    /// Panoptic code written to the mask, 0 for stuff.
    pub code: u32,
    pub motion: Motion,
    /// Emits trunk keypoints.
    pub person: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub prior: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub intrinsics: Intrinsics,
    pub fps: f64,
    pub frames: usize,
    pub seed: u64,
    /// Additive Gaussian depth noise before quantization, meters.
    pub depth_noise: f64,
    /// Additive Gaussian intensity noise, 8-bit units.
    pub pixel_noise: f64,
    /// 2x2 supersampling of color.
    pub supersample: bool,
    pub emit_flow: bool,
    pub emit_keypoints: bool,
    /// Frames whose masks lose every prior-dynamic instance.
    pub mask_dropout: Vec<usize>,
    pub camera: Motion,
    pub primitives: Vec<Primitive>,
    pub classes: BTreeMap<u32, ClassDef>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        classes.insert(
            1,
            ClassDef {
                name: "person".into(),
                prior: true,
            },
        );
        Self {
            intrinsics: Intrinsics::tum_default(),
            fps: 30.0,
            frames: 10,
            seed: 1,
            depth_noise: 0.0,
            pixel_noise: 0.0,
            supersample: true,
            emit_flow: true,
            emit_keypoints: true,
            mask_dropout: Vec::new(),
            camera: Motion::Static {
                pose: Pose::identity(),
            },
            primitives: Vec::new(),
            classes,
        }
    }
}

impl SceneSpec {
    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !(self.fps > 0.0) || self.frames == 0 {
            return Err(Error::Config("fps and frames must be positive".into()));
        }
        for p in &self.primitives {
            if p.size.iter().any(|s| !(*s > 0.0)) || !(p.texture.cell > 0.0) {
                return Err(Error::Config(format!("primitive `{}` is degenerate", p.name)));
            }
            if p.code != 0 && !self.classes.contains_key(&(p.code / 1000)) {
                return Err(Error::Config(format!("primitive `{}` has an undeclared class", p.name)));
            }
        }
        Ok(())
    }

    /// Parses the text form; errors carry line numbers.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        Parser::new(path).run(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let k = &self.intrinsics;
        let _ = writeln!(s, "[scene]");
        let _ = writeln!(s, "width={}\nheight={}", k.width, k.height);
        let _ = writeln!(s, "fx={}\nfy={}\ncx={}\ncy={}\ndepth_scale={}", k.fx, k.fy, k.cx, k.cy, k.depth_scale);
        let _ = writeln!(s, "fps={}\nframes={}\nseed={}", self.fps, self.frames, self.seed);
        let _ = writeln!(s, "depth_noise={}\npixel_noise={}", self.depth_noise, self.pixel_noise);
        let _ = writeln!(
            s,
            "supersample={}\nflow={}\nkeypoints={}",
            self.supersample, self.emit_flow, self.emit_keypoints
        );
        if !self.mask_dropout.is_empty() {
            let list: Vec<String> = self.mask_dropout.iter().map(|f| f.to_string()).collect();
            let _ = writeln!(s, "mask_dropout={}", list.join(","));
        }
        for (id, c) in &self.classes {
            let _ = writeln!(s, "\n[class {id}]\nname={}\nprior={}", c.name, c.prior);
        }
        let _ = writeln!(s, "\n[camera]");
        write_motion(&mut s, &self.camera);
        for p in &self.primitives {
            let kind = if p.code == 0 { "static" } else { "object" };
            let _ = writeln!(s, "\n[{kind} {}]", p.name);
            let _ = writeln!(s, "size={}", vec3(&p.size));
            let t = &p.texture;
            let _ = writeln!(s, "texture_seed={}\ncell={}", t.seed, t.cell);
            let _ = writeln!(s, "tint={},{},{}", t.tint[0], t.tint[1], t.tint[2]);
            if p.inside {
                let _ = writeln!(s, "inside=true");
            }
            if p.code != 0 {
                let _ = writeln!(s, "class={}\ninstance={}", p.code / 1000, p.code % 1000);
            }
            if p.person {
                let _ = writeln!(s, "person=true");
            }
            write_motion(&mut s, &p.motion);
        }
        s
    }
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

fn rotvec_deg(r: &Matrix3<f64>) -> Vector3<f64> {
    crate::geometry::log_so3(r).map(f64::to_degrees)
}

fn write_motion(s: &mut String, m: &Motion) {
    match m {
        Motion::Static { pose } => {
            let _ = writeln!(s, "motion=static\nposition={}", vec3(&pose.translation));
            let _ = writeln!(s, "rotation={}", vec3(&rotvec_deg(&pose.rotation)));
        }
        Motion::Linear {
            start,
            velocity,
            angular,
        } => {
            let _ = writeln!(s, "motion=linear\nposition={}", vec3(&start.translation));
            let _ = writeln!(s, "rotation={}", vec3(&rotvec_deg(&start.rotation)));
            let _ = writeln!(s, "velocity={}", vec3(velocity));
            let _ = writeln!(s, "angular={}", vec3(&angular.map(f64::to_degrees)));
        }
        Motion::Arc {
            center,
            radius,
            start,
            rate,
            look_at,
        } => {
            let _ = writeln!(s, "motion=arc\ncenter={}\nradius={radius}", vec3(center));
            let _ = writeln!(s, "start_deg={}\nrate_deg={}", start.to_degrees(), rate.to_degrees());
            let _ = writeln!(s, "look_at={}", vec3(look_at));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Scene,
    Camera,
    Class(u32),
    Static(usize),
    Object(usize),
}

/// Raw key/value lines of one motion-bearing section.
#[derive(Debug, Default, Clone)]
struct Fields {
    values: BTreeMap<String, (usize, String)>,
    header_line: usize,
}

struct Parser<'a> {
    path: &'a Path,
    spec: SceneSpec,
    camera: Fields,
    bodies: Vec<(String, bool, Fields)>,
    classes: BTreeMap<u32, (String, bool)>,
}

impl<'a> Parser<'a> {
    fn new(path: &'a Path) -> Self {
        let mut spec = SceneSpec::default();
        spec.classes.clear();
        Self {
            path,
            spec,
            camera: Fields::default(),
            bodies: Vec::new(),
            classes: BTreeMap::new(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.path, line, msg)
    }

    fn run(mut self, text: &str) -> Result<SceneSpec> {
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head
                    .strip_suffix(']')
                    .ok_or_else(|| self.err(ln, "unterminated section header"))?
                    .trim();
                let mut parts = head.split_whitespace();
                let kind = parts.next().unwrap_or("");
                let name = parts.next();
                section = match (kind, name) {
                    ("scene", None) => Section::Scene,
                    ("camera", None) => {
                        self.camera.header_line = ln;
                        Section::Camera
                    }
                    ("class", Some(id)) => {
                        let id: u32 = id.parse().map_err(|_| self.err(ln, format!("bad class id `{id}`")))?;
                        if !(1..=65).contains(&id) {
                            return Err(self.err(ln, "class id must be in 1..=65"));
                        }
                        self.classes.insert(id, (String::new(), false));
                        Section::Class(id)
                    }
                    ("static", Some(n)) | ("object", Some(n)) => {
                        let obj = kind == "object";
                        self.bodies.push((
                            n.to_string(),
                            obj,
                            Fields {
                                values: BTreeMap::new(),
                                header_line: ln,
                            },
                        ));
                        let idx = self.bodies.len() - 1;
                        if obj {
                            Section::Object(idx)
                        } else {
                            Section::Static(idx)
                        }
                    }
                    _ => return Err(self.err(ln, format!("unknown section `[{head}]`"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| self.err(ln, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            match section {
                Section::None => return Err(self.err(ln, "key outside of a section")),
                Section::Scene => self.scene_key(ln, key, value)?,
                Section::Class(id) => {
                    let entry = self.classes.get_mut(&id).expect("declared");
                    match key {
                        "name" => entry.0 = value.to_string(),
                        "prior" => entry.1 = parse_bool(value).ok_or_else(|| Error::parse(self.path, ln, "bad bool"))?,
                        _ => return Err(self.err(ln, format!("unknown key `{key}`"))),
                    }
                }
                Section::Camera => {
                    self.camera.values.insert(key.to_string(), (ln, value.to_string()));
                }
                Section::Static(i) | Section::Object(i) => {
                    self.bodies[i].2.values.insert(key.to_string(), (ln, value.to_string()));
                }
            }
        }
        self.finish()
    }

    fn scene_key(&mut self, ln: usize, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> { v.parse::<f64>().map_err(|_| Error::parse(self.path, ln, format!("bad number `{v}`"))) };
        let int = |v: &str| -> Result<usize> { v.parse::<usize>().map_err(|_| Error::parse(self.path, ln, format!("bad integer `{v}`"))) };
        let boolean = |v: &str| parse_bool(v).ok_or_else(|| Error::parse(self.path, ln, format!("bad bool `{v}`")));
        let s = &mut self.spec;
        match key {
            "width" => s.intrinsics.width = int(value)?,
            "height" => s.intrinsics.height = int(value)?,
            "fx" => s.intrinsics.fx = num(value)?,
            "fy" => s.intrinsics.fy = num(value)?,
            "cx" => s.intrinsics.cx = num(value)?,
            "cy" => s.intrinsics.cy = num(value)?,
            "depth_scale" => s.intrinsics.depth_scale = num(value)?,
            "fps" => s.fps = num(value)?,
            "frames" => s.frames = int(value)?,
            "seed" => s.seed = int(value)? as u64,
            "depth_noise" => s.depth_noise = num(value)?,
            "pixel_noise" => s.pixel_noise = num(value)?,
            "supersample" => s.supersample = boolean(value)?,
            "flow" => s.emit_flow = boolean(value)?,
            "keypoints" => s.emit_keypoints = boolean(value)?,
            "mask_dropout" => {
                s.mask_dropout = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| int(v.trim()))
                    .collect::<Result<_>>()?
            }
            _ => return Err(self.err(ln, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<SceneSpec> {
        for (id, (name, prior)) in &self.classes {
            if name.is_empty() {
                return Err(Error::parse(self.path, 0, format!("class {id} has no name")));
            }
            self.spec.classes.insert(
                *id,
                ClassDef {
                    name: name.clone(),
                    prior: *prior,
                },
            );
        }
        let camera = self.camera.clone();
        self.spec.camera = if camera.values.is_empty() {
            Motion::Static {
                pose: Pose::identity(),
            }
        } else {
            self.motion(&camera, &["motion"])?
        };
        let bodies = std::mem::take(&mut self.bodies);
        for (name, is_object, fields) in bodies {
            let p = self.primitive(name, is_object, &fields)?;
            self.spec.primitives.push(p);
        }
        self.spec
            .validate()
            .map_err(|e| Error::parse(self.path, 0, e.to_string()))?;
        Ok(self.spec)
    }

    fn get<'f>(&self, f: &'f Fields, key: &str) -> Option<(usize, &'f str)> {
        f.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn num(&self, f: &Fields, key: &str, default: Option<f64>) -> Result<f64> {
        match self.get(f, key) {
            Some((ln, v)) => v.parse().map_err(|_| self.err(ln, format!("bad number `{v}`"))),
            None => default.ok_or_else(|| self.err(f.header_line, format!("missing `{key}`"))),
        }
    }

    fn vec(&self, f: &Fields, key: &str, default: Option<Vector3<f64>>) -> Result<Vector3<f64>> {
        match self.get(f, key) {
            Some((ln, v)) => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| self.err(ln, format!("bad vector `{v}`")))?;
                if parts.len() != 3 {
                    return Err(self.err(ln, format!("expected 3 components in `{v}`")));
                }
                Ok(Vector3::new(parts[0], parts[1], parts[2]))
            }
            None => default.ok_or_else(|| self.err(f.header_line, format!("missing `{key}`"))),
        }
    }

    fn boolean(&self, f: &Fields, key: &str) -> Result<bool> {
        match self.get(f, key) {
            Some((ln, v)) => parse_bool(v).ok_or_else(|| self.err(ln, format!("bad bool `{v}`"))),
            None => Ok(false),
        }
    }

    /// Parses the motion keys, rejecting anything not in the motion set or
    /// `extra`.
    fn motion(&self, f: &Fields, extra: &[&str]) -> Result<Motion> {
        let kind = self.get(f, "motion").map(|(_, v)| v).unwrap_or("static");
        let allowed: &[&str] = match kind {
            "static" => &["position", "rotation"],
            "linear" => &["position", "rotation", "velocity", "angular"],
            "arc" => &["center", "radius", "start_deg", "rate_deg", "look_at"],
            other => {
                let ln = self.get(f, "motion").map(|x| x.0).unwrap_or(f.header_line);
                return Err(self.err(ln, format!("unknown motion `{other}`")));
            }
        };
        for (key, (ln, _)) in &f.values {
            if !allowed.contains(&key.as_str()) && !extra.contains(&key.as_str()) && key != "motion" {
                return Err(self.err(*ln, format!("unknown key `{key}` for motion `{kind}`")));
            }
        }
        let zero = Some(Vector3::zeros());
        Ok(match kind {
            "static" | "linear" => {
                let rot = self.vec(f, "rotation", zero)?.map(f64::to_radians);
                let start = Pose::from_axis_angle(&rot, self.vec(f, "position", zero)?);
                if kind == "static" {
                    Motion::Static { pose: start }
                } else {
                    Motion::Linear {
                        start,
                        velocity: self.vec(f, "velocity", zero)?,
                        angular: self.vec(f, "angular", zero)?.map(f64::to_radians),
                    }
                }
            }
            _ => Motion::Arc {
                center: self.vec(f, "center", None)?,
                radius: self.num(f, "radius", None)?,
                start: self.num(f, "start_deg", Some(0.0))?.to_radians(),
                rate: self.num(f, "rate_deg", Some(0.0))?.to_radians(),
                look_at: self.vec(f, "look_at", None)?,
            },
        })
    }

    fn primitive(&self, name: String, is_object: bool, f: &Fields) -> Result<Primitive> {
        let mut extra = vec!["size", "texture_seed", "cell", "tint", "inside"];
        if is_object {
            extra.extend(["class", "instance", "person"]);
        }
        let motion = self.motion(f, &extra)?;
        let tint = self.vec(f, "tint", Some(Vector3::new(1.0, 1.0, 1.0)))?;
        let code = if is_object {
            let class = self.num(f, "class", None)? as u32;
            if !self.spec.classes.contains_key(&class) {
                let ln = self.get(f, "class").map(|x| x.0).unwrap_or(f.header_line);
                return Err(self.err(ln, format!("class {class} is not declared")));
            }
            make_code(class, self.num(f, "instance", Some(1.0))? as u32)
        } else {
            0
        };
        Ok(Primitive {
            name,
            size: self.vec(f, "size", None)?,
            texture: Texture {
                seed: self.num(f, "texture_seed", Some(1.0))? as u64,
                cell: self.num(f, "cell", Some(0.1))?,
                tint: [tint.x, tint.y, tint.z],
            },
            inside: self.boolean(f, "inside")?,
            code,
            motion,
            person: is_object && self.boolean(f, "person")?,
        })
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}
