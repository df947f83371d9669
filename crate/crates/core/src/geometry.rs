//! Rigid transforms, the pinhole camera and quaternion conversions.
//!
//! Camera convention: z forward, x right, y down. A [`Pose`] is a plain
//! rotation matrix plus translation; quaternions only appear at file
//! boundaries.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// A 3D point in meters. The frame (camera or world) is implied by context.
pub type Point3 = Vector3<f64>;

const ORTHO_DRIFT: f64 = 1e-12;

/// Sub-pixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        ((self.u - other.u).powi(2) + (self.v - other.v).powi(2)).sqrt()
    }

    /// Nearest integer pixel, if it lies inside a `width` x `height` image.
    pub fn to_index(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        let x = self.u.round();
        let y = self.v.round();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 || !x.is_finite() {
            return None;
        }
        Some((x as usize, y as usize))
    }
}

/// Rigid SE(3) transform acting as `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, projecting `rotation` back onto SO(3) if it has
    /// drifted.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: orthonormalize_if_needed(rotation),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation about the z axis by `theta` radians.
    pub fn rot_z(theta: f64) -> Self {
        Self::from_axis_angle(&Vector3::new(0.0, 0.0, theta), Vector3::zeros())
    }

    pub fn rot_y(theta: f64) -> Self {
        Self::from_axis_angle(&Vector3::new(0.0, theta, 0.0), Vector3::zeros())
    }

    pub fn rot_x(theta: f64) -> Self {
        Self::from_axis_angle(&Vector3::new(theta, 0.0, 0.0), Vector3::zeros())
    }

    /// Rotation given as an axis-angle vector (Rodrigues) plus translation.
    pub fn from_axis_angle(omega: &Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: exp_so3(omega),
            translation,
        }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        // atan2 keeps precision near zero where acos does not.
        let r = &self.rotation;
        let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() * 0.5;
        s.atan2((r.trace() - 1.0) * 0.5)
    }

    /// Axis-angle vector of the rotation part.
    pub fn log_rotation(&self) -> Vector3<f64> {
        log_so3(&self.rotation)
    }

    /// `‖RᵀR − I‖∞`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max()
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() < 1e-9
            && self.rotation.determinant() > 0.0
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// Builds a pose from a TUM-style translation and quaternion. The
    /// quaternion is normalized; a zero quaternion is rejected.
    pub fn from_quaternion(t: [f64; 3], q: [f64; 4]) -> Result<Pose> {
        let [qx, qy, qz, qw] = q;
        let n = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Format(format!(
                "zero or non-finite quaternion ({qx}, {qy}, {qz}, {qw})"
            )));
        }
        let (x, y, z, w) = (qx / n, qy / n, qz / n, qw / n);
        let rotation = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Pose::new(rotation, Vector3::new(t[0], t[1], t[2])))
    }

    /// Returns `([tx, ty, tz], [qx, qy, qz, qw])` with `qw >= 0`.
    pub fn to_quaternion(&self) -> ([f64; 3], [f64; 4]) {
        let r = &self.rotation;
        let trace = r.trace();
        let (x, y, z, w);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (r[(2, 1)] - r[(1, 2)]) / s;
            y = (r[(0, 2)] - r[(2, 0)]) / s;
            z = (r[(1, 0)] - r[(0, 1)]) / s;
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            w = (r[(2, 1)] - r[(1, 2)]) / s;
            x = 0.25 * s;
            y = (r[(0, 1)] + r[(1, 0)]) / s;
            z = (r[(0, 2)] + r[(2, 0)]) / s;
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            w = (r[(0, 2)] - r[(2, 0)]) / s;
            x = (r[(0, 1)] + r[(1, 0)]) / s;
            y = 0.25 * s;
            z = (r[(1, 2)] + r[(2, 1)]) / s;
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            w = (r[(1, 0)] - r[(0, 1)]) / s;
            x = (r[(0, 2)] + r[(2, 0)]) / s;
            y = (r[(1, 2)] + r[(2, 1)]) / s;
            z = 0.25 * s;
        }
        let n = (x * x + y * y + z * z + w * w).sqrt();
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        let t = self.translation;
        (
            [t.x, t.y, t.z],
            [sign * x / n, sign * y / n, sign * z / n, sign * w / n],
        )
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp_so3(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < 1e-10 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = c.acos();
    let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if theta < 1e-8 {
        return 0.5 * w;
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Near pi the antisymmetric part vanishes; take the axis from R + I.
        let m = r + Matrix3::identity();
        let mut best = 0;
        for c in 1..3 {
            if m.column(c).norm() > m.column(best).norm() {
                best = c;
            }
        }
        let axis = m.column(best).normalize();
        return axis * theta;
    }
    w * (theta / (2.0 * theta.sin()))
}

/// Least-squares rigid transform with `dst ≈ R src + t` (Kabsch; scale
/// fixed to one). `None` for fewer than three pairs or a failed SVD.
pub fn rigid_align(src: &[Point3], dst: &[Point3]) -> Option<Pose> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (d - cd) * (s - cs).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut diag = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        diag[(2, 2)] = -1.0;
    }
    let r = u * diag * v_t;
    Some(Pose::new(r, cd - r * cs))
}

fn orthonormalize_if_needed(r: Matrix3<f64>) -> Matrix3<f64> {
    let drift = (r.transpose() * r - Matrix3::identity()).abs().max();
    if drift <= ORTHO_DRIFT {
        return r;
    }
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return r,
    };
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

/// Pinhole intrinsics plus the raw-depth scale of the sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Raw depth units per meter.
    pub depth_scale: f64,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        depth_scale: f64,
    ) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_scale,
        };
        k.validate()?;
        Ok(k)
    }

    /// TUM freiburg-style defaults for a 640x480 sensor.
    pub fn tum_default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
            depth_scale: 5000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64
            && self.depth_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Camera-frame point from a pixel and a raw sensor depth. `None` for
    /// non-positive depth.
    pub fn back_project(&self, px: Pixel, raw_depth: f64) -> Option<Point3> {
        if !(raw_depth > 0.0) {
            return None;
        }
        let z = raw_depth / self.depth_scale;
        Some(self.back_project_metric(px, z))
    }

    pub fn back_project_metric(&self, px: Pixel, z: f64) -> Point3 {
        Point3::new((px.u - self.cx) * z / self.fx, (px.v - self.cy) * z / self.fy, z)
    }

    /// `None` when the point is on or behind the image plane.
    pub fn project(&self, p: &Point3) -> Option<Pixel> {
        if !(p.z > 0.0) {
            return None;
        }
        Some(Pixel::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    pub fn in_bounds(&self, px: &Pixel) -> bool {
        px.u >= 0.0
            && px.v >= 0.0
            && px.u <= (self.width - 1) as f64
            && px.v <= (self.height - 1) as f64
    }

    /// Ray direction through a pixel with unit z.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}
