//! Per-pixel ray casting of textured boxes.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{Primitive, SceneSpec};
use crate::geometry::{Pixel, Point3, Pose};
use crate::image::{DepthImage, FlowField, LabelImage, RgbImage};
use crate::io::Keypoint;

/// Surface hit of the center ray of a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub primitive: usize,
    /// Hit point in the primitive's local frame.
    pub local: Point3,
    /// Camera-frame depth, meters.
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub rgb: RgbImage,
    pub depth: DepthImage,
    pub labels: LabelImage,
    pub hits: Vec<Option<Hit>>,
    pub keypoints: Vec<Keypoint>,
}

/// World poses of the camera and every primitive at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Camera to world.
    pub camera: Pose,
    /// Local to world, per primitive.
    pub bodies: Vec<Pose>,
}

impl Snapshot {
    pub fn at(spec: &SceneSpec, t: f64) -> Self {
        Self {
            camera: spec.camera.pose_at(t),
            bodies: spec.primitives.iter().map(|p| p.motion.pose_at(t)).collect(),
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Face-cell intensity of a local hit point.
fn texture_value(p: &Primitive, local: &Point3) -> f64 {
    let h = p.size * 0.5;
    let mut axis = 0;
    let mut best = -1.0;
    for i in 0..3 {
        let r = local[i].abs() / h[i];
        if r > best {
            best = r;
            axis = i;
        }
    }
    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
    let iu = ((local[a] + h[a]) / p.texture.cell).floor() as i64;
    let iv = ((local[b] + h[b]) / p.texture.cell).floor() as i64;
    let side = (local[axis] > 0.0) as u64;
    let key = splitmix(p.texture.seed)
        ^ splitmix((axis as u64) << 1 | side)
        ^ splitmix(iu as u64).rotate_left(21)
        ^ splitmix(iv as u64).rotate_left(42);
    30.0 + (splitmix(key) % 196) as f64
}

fn shade(p: &Primitive, local: &Point3) -> [f64; 3] {
    let v = texture_value(p, local);
    p.texture.tint.map(|t| v * t)
}

/// Ray parameter of the visible surface of a box, if any.
fn intersect(origin: &Vector3<f64>, dir: &Vector3<f64>, half: &Vector3<f64>, inside: bool) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if dir[i].abs() < 1e-15 {
            if origin[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let a = (-half[i] - origin[i]) * inv;
        let b = (half[i] - origin[i]) * inv;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    if t0 > t1 {
        return None;
    }
    if inside {
        (t1 > 1e-9 && t0 <= 1e-9).then_some(t1)
    } else {
        (t0 > 1e-9).then_some(t0)
    }
}

struct Caster<'a> {
    spec: &'a SceneSpec,
    /// Camera center in each primitive's local frame.
    origins: Vec<Point3>,
    /// Camera-ray to local-direction rotation per primitive.
    to_local_dir: Vec<nalgebra::Matrix3<f64>>,
    halves: Vec<Vector3<f64>>,
    /// Pixel bounds of each primitive's projection, `None` when the
    /// primitive must be tested for every ray.
    bounds: Vec<Option<[f64; 4]>>,
}

impl<'a> Caster<'a> {
    fn new(spec: &'a SceneSpec, snap: &Snapshot) -> Self {
        let cam = snap.camera;
        let world_to_cam = cam.inverse();
        let mut origins = Vec::new();
        let mut to_local_dir = Vec::new();
        let mut halves = Vec::new();
        let mut bounds = Vec::new();
        for (p, body) in spec.primitives.iter().zip(&snap.bodies) {
            let tl = body.inverse();
            origins.push(tl.transform(&cam.translation));
            to_local_dir.push(tl.rotation * cam.rotation);
            let h = p.size * 0.5;
            halves.push(h);
            bounds.push(if p.inside {
                None
            } else {
                screen_bounds(spec, &world_to_cam.compose(body), &h)
            });
        }
        Self {
            spec,
            origins,
            to_local_dir,
            halves,
            bounds,
        }
    }

    /// Nearest hit of the ray through `(u, v)`; `t` equals camera depth.
    fn cast(&self, u: f64, v: f64) -> Option<Hit> {
        let ray = self.spec.intrinsics.ray(u, v);
        let mut best: Option<Hit> = None;
        for (i, p) in self.spec.primitives.iter().enumerate() {
            if let Some([u0, u1, v0, v1]) = self.bounds[i] {
                if u < u0 || u > u1 || v < v0 || v > v1 {
                    continue;
                }
            }
            let o = self.origins[i];
            let d = self.to_local_dir[i] * ray;
            if let Some(t) = intersect(&o, &d, &self.halves[i], p.inside) {
                if best.is_none_or(|b| t < b.z) {
                    best = Some(Hit {
                        primitive: i,
                        local: o + d * t,
                        z: t,
                    });
                }
            }
        }
        best
    }
}

/// Pixel rectangle covering the projection of a box, padded by a pixel.
/// `None` if any corner is near or behind the camera plane.
fn screen_bounds(spec: &SceneSpec, local_to_cam: &Pose, h: &Vector3<f64>) -> Option<[f64; 4]> {
    let k = &spec.intrinsics;
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for c in 0..8 {
        let corner = Vector3::new(
            if c & 1 == 0 { -h.x } else { h.x },
            if c & 2 == 0 { -h.y } else { h.y },
            if c & 4 == 0 { -h.z } else { h.z },
        );
        let pc = local_to_cam.transform(&corner);
        if pc.z < 1e-3 {
            return None;
        }
        let px = k.project(&pc)?;
        b = [b[0].min(px.u), b[1].max(px.u), b[2].min(px.v), b[3].max(px.v)];
    }
    Some([b[0] - 1.0, b[1] + 1.0, b[2] - 1.0, b[3] + 1.0])
}

/// Trunk joints on the face of a person box that faces the camera, in the
/// local frame: two shoulder corners and the mid-hip point.
pub fn trunk_joints_local(p: &Primitive, body: &Pose, camera_center: &Point3) -> [(&'static str, Point3); 3] {
    let h = p.size * 0.5;
    let to_cam = body.inverse().transform(camera_center);
    let zf = if to_cam.z >= 0.0 { h.z } else { -h.z };
    // Local -y is up; shoulders sit 18% of the height below the top.
    let shoulder_y = -h.y + 0.18 * p.size.y;
    [
        ("left_shoulder", Point3::new(h.x, shoulder_y, zf)),
        ("right_shoulder", Point3::new(-h.x, shoulder_y, zf)),
        ("mid_hip", Point3::new(0.0, 0.0, zf)),
    ]
}

/// Renders frame `index` of `spec`.
pub fn render(spec: &SceneSpec, index: usize) -> Rendered {
    let snap = Snapshot::at(spec, spec.time_of(index));
    let k = &spec.intrinsics;
    let (w, h) = (k.width, k.height);
    let caster = Caster::new(spec, &snap);
    let mut rgb = RgbImage::filled(w, h, [0; 3]);
    let mut depth = DepthImage::filled(w, h, 0);
    let mut labels = LabelImage::filled(w, h, 0);
    let mut hits = vec![None; w * h];

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ splitmix(index as u64));
    let depth_noise = (spec.depth_noise > 0.0).then(|| Normal::new(0.0, spec.depth_noise).expect("sigma"));
    let pixel_noise = (spec.pixel_noise > 0.0).then(|| Normal::new(0.0, spec.pixel_noise).expect("sigma"));
    let dropout = spec.mask_dropout.contains(&index);
    let offsets: &[(f64, f64)] = if spec.supersample {
        &[(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)]
    } else {
        &[(0.0, 0.0)]
    };

    for y in 0..h {
        for x in 0..w {
            let center = caster.cast(x as f64, y as f64);
            hits[y * w + x] = center;
            let mut acc = [0.0f64; 3];
            for &(dx, dy) in offsets {
                let sub = if dx == 0.0 && dy == 0.0 {
                    center
                } else {
                    caster.cast(x as f64 + dx, y as f64 + dy)
                };
                if let Some(hit) = sub {
                    let c = shade(&spec.primitives[hit.primitive], &hit.local);
                    for ch in 0..3 {
                        acc[ch] += c[ch];
                    }
                }
            }
            let n = offsets.len() as f64;
            let noise = pixel_noise.map(|d| d.sample(&mut rng)).unwrap_or(0.0);
            rgb.set(x, y, acc.map(|c| (c / n + noise).round().clamp(0.0, 255.0) as u8));
            if let Some(hit) = center {
                let z = hit.z + depth_noise.map(|d| d.sample(&mut rng)).unwrap_or(0.0);
                let raw = (z * k.depth_scale).round();
                depth.set(x, y, raw.clamp(0.0, u16::MAX as f64) as u16);
                let p = &spec.primitives[hit.primitive];
                let prior = spec.classes.get(&(p.code / 1000)).is_some_and(|c| c.prior);
                if !(dropout && prior) {
                    labels.set(x, y, p.code);
                }
            }
        }
    }

    let mut keypoints = Vec::new();
    if spec.emit_keypoints && !dropout {
        let world_to_cam = snap.camera.inverse();
        for (i, p) in spec.primitives.iter().enumerate() {
            if !p.person {
                continue;
            }
            for (joint, local) in trunk_joints_local(p, &snap.bodies[i], &snap.camera.translation) {
                let pc = world_to_cam.transform(&snap.bodies[i].transform(&local));
                if let Some(px) = k.project(&pc) {
                    if k.in_bounds(&px) {
                        keypoints.push(Keypoint {
                            instance: p.code,
                            joint: joint.to_string(),
                            px,
                            confidence: 0.9,
                        });
                    }
                }
            }
        }
    }

    Rendered {
        rgb,
        depth,
        labels,
        hits,
        keypoints,
    }
}

/// Ground-truth forward flow from frame `index - 1` to `index`, sampled on
/// the grid of `index - 1` (whose center-ray hits are `prev_hits`).
pub fn forward_flow(spec: &SceneSpec, prev_hits: &[Option<Hit>], index: usize) -> FlowField {
    let k = &spec.intrinsics;
    let (w, h) = (k.width, k.height);
    let mut flow = FlowField::filled(w, h, [0.0; 2]);
    if index == 0 {
        return flow;
    }
    let now = Snapshot::at(spec, spec.time_of(index));
    let world_to_cam = now.camera.inverse();
    for y in 0..h {
        for x in 0..w {
            let Some(hit) = prev_hits[y * w + x] else {
                continue;
            };
            let world = now.bodies[hit.primitive].transform(&hit.local);
            if let Some(px) = k.project(&world_to_cam.transform(&world)) {
                flow.set(x, y, [(px.u - x as f64) as f32, (px.v - y as f64) as f32]);
            }
        }
    }
    flow
}

/// Projection of a world point into frame `index`, for oracle checks.
pub fn project_world(spec: &SceneSpec, index: usize, world: &Point3) -> Option<Pixel> {
    let cam = spec.camera.pose_at(spec.time_of(index));
    spec.intrinsics.project(&cam.inverse().transform(world))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::spec::{Motion, Texture};

    fn small_spec() -> SceneSpec {
        SceneSpec {
            intrinsics: crate::geometry::Intrinsics::new(100.0, 100.0, 39.5, 29.5, 80, 60, 5000.0).unwrap(),
            supersample: false,
            ..SceneSpec::default()
        }
    }

    fn wall(z: f64) -> Primitive {
        Primitive {
            name: "wall".into(),
            size: Vector3::new(10.0, 10.0, 0.1),
            texture: Texture::default(),
            inside: false,
            code: 0,
            motion: Motion::Static {
                pose: Pose::from_translation(0.0, 0.0, z + 0.05),
            },
            person: false,
        }
    }

    #[test]
    fn wall_depth_is_constant() {
        let mut spec = small_spec();
        spec.primitives.push(wall(2.0));
        let r = render(&spec, 0);
        assert!(r.depth.data.iter().all(|&d| d == 10000));
    }

    #[test]
    fn occluding_box_owns_its_pixels() {
        let mut spec = small_spec();
        spec.primitives.push(wall(2.0));
        spec.primitives.push(Primitive {
            name: "box".into(),
            size: Vector3::new(0.4, 0.4, 0.4),
            texture: Texture::default(),
            inside: false,
            code: 1001,
            motion: Motion::Static {
                pose: Pose::from_translation(0.0, 0.0, 1.2),
            },
            person: false,
        });
        let r = render(&spec, 0);
        for i in 0..r.depth.data.len() {
            let on_box = r.labels.data[i] == 1001;
            assert_eq!(on_box, r.depth.data[i] < 10000, "pixel {i}");
            let hit = r.hits[i].unwrap();
            assert_eq!(on_box, hit.primitive == 1);
        }
        assert!(r.labels.data.contains(&1001));
    }

    #[test]
    fn static_flow_equals_parallax() {
        let mut spec = small_spec();
        spec.primitives.push(wall(2.0));
        spec.primitives.push(Primitive {
            name: "box".into(),
            size: Vector3::new(0.4, 0.4, 0.4),
            texture: Texture::default(),
            inside: false,
            code: 0,
            motion: Motion::Static {
                pose: Pose::from_translation(0.1, 0.0, 1.2),
            },
            person: false,
        });
        spec.camera = Motion::Linear {
            start: Pose::identity(),
            velocity: Vector3::new(0.3, 0.05, 0.1),
            angular: Vector3::new(0.0, 0.05, 0.0),
        };
        let prev = render(&spec, 0);
        let flow = forward_flow(&spec, &prev.hits, 1);
        let k = &spec.intrinsics;
        let c0 = spec.camera.pose_at(0.0);
        let c1 = spec.camera.pose_at(spec.time_of(1));
        let rel = c1.inverse().compose(&c0);
        for y in 0..k.height {
            for x in 0..k.width {
                let hit = prev.hits[y * k.width + x].unwrap();
                let p0 = k.back_project_metric(Pixel::new(x as f64, y as f64), hit.z);
                let px = k.project(&rel.transform(&p0)).unwrap();
                let f = flow.get(x, y);
                assert!((px.u - x as f64 - f[0] as f64).abs() < 1e-3);
                assert!((px.v - y as f64 - f[1] as f64).abs() < 1e-3);
            }
        }
    }
}
