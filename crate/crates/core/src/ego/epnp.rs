//! Closed-form EPnP.
//!
//! World points are written as barycentric combinations of control points
//! (the centroid plus the principal directions). The camera-frame control
//! points live in the null space of `MᵀM`; the null-space weights (betas) are
//! found for N = 1..4 by linearization, polished by Gauss-Newton on the
//! inter-control-point distances, and the candidate with the lowest
//! reprojection error is kept. Coplanar inputs use three control points.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{Correspondence, PnpError};
use crate::geometry::{rigid_align, Intrinsics, Point3, Pose};

const BETA_GN_ITERS: usize = 10;
const COLLINEAR_RATIO: f64 = 1e-10;
const PLANAR_RATIO: f64 = 1e-8;

pub const MIN_CORRESPONDENCES: usize = 6;

struct ControlFrame {
    world: Vec<Point3>,
    alphas: Vec<Vec<f64>>,
}

fn control_frame(points: &[Point3]) -> Result<ControlFrame, PnpError> {
    let n = points.len() as f64;
    let c0 = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c0;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    if !(lambda[0] > 0.0) || lambda[1] / lambda[0] < COLLINEAR_RATIO {
        return Err(PnpError::Degenerate);
    }
    let dims = if lambda[2] / lambda[0] < PLANAR_RATIO { 2 } else { 3 };
    let dirs: Vec<Vector3<f64>> = order[..dims]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let scales: Vec<f64> = lambda[..dims].iter().map(|l| l.sqrt()).collect();

    let mut world = vec![c0];
    world.extend(dirs.iter().zip(&scales).map(|(d, s)| c0 + d * *s));
    let alphas = points
        .iter()
        .map(|p| {
            let d = p - c0;
            let mut a = vec![0.0; dims + 1];
            for j in 0..dims {
                a[j + 1] = dirs[j].dot(&d) / scales[j];
            }
            a[0] = 1.0 - a[1..].iter().sum::<f64>();
            a
        })
        .collect();
    Ok(ControlFrame { world, alphas })
}

fn pairs(nc: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..nc {
        for b in a + 1..nc {
            out.push((a, b));
        }
    }
    out
}

/// Difference of control points `a` and `b` inside a stacked null vector.
fn diff(v: &DVector<f64>, a: usize, b: usize) -> Vector3<f64> {
    Vector3::new(
        v[3 * a] - v[3 * b],
        v[3 * a + 1] - v[3 * b + 1],
        v[3 * a + 2] - v[3 * b + 2],
    )
}

fn initial_betas(
    null: &[DVector<f64>],
    pair_list: &[(usize, usize)],
    dist_w: &[f64],
) -> Option<Vec<f64>> {
    let n = null.len();
    if n == 1 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&(a, b), dw) in pair_list.iter().zip(dist_w) {
            let dc = diff(&null[0], a, b).norm();
            num += dc * dw.sqrt();
            den += dc * dc;
        }
        return (den > 0.0).then(|| vec![num / den]);
    }
    // Unknowns are the products beta_k * beta_l; fall back to the first
    // row (beta_1 * beta_k) when the full set is underdetermined.
    let mut products: Vec<(usize, usize)> = Vec::new();
    for k in 0..n {
        for l in k..n {
            products.push((k, l));
        }
    }
    if products.len() > pair_list.len() {
        products = (0..n).map(|l| (0, l)).collect();
    }
    let mut lmat = DMatrix::zeros(pair_list.len(), products.len());
    let rho = DVector::from_column_slice(dist_w);
    for (r, &(a, b)) in pair_list.iter().enumerate() {
        let d: Vec<Vector3<f64>> = null.iter().map(|v| diff(v, a, b)).collect();
        for (c, &(k, l)) in products.iter().enumerate() {
            let f = if k == l { 1.0 } else { 2.0 };
            lmat[(r, c)] = f * d[k].dot(&d[l]);
        }
    }
    let sol = lmat.svd(true, true).solve(&rho, 1e-14).ok()?;
    let b11 = sol[0];
    let beta1 = b11.abs().sqrt();
    if !(beta1 > 0.0) {
        return None;
    }
    let mut betas = vec![0.0; n];
    betas[0] = beta1;
    for (c, &(k, l)) in products.iter().enumerate() {
        if k == 0 && l > 0 {
            betas[l] = sol[c] / beta1;
        }
    }
    if b11 < 0.0 {
        // Only the product signs are observable; flip into a consistent set.
        for b in betas.iter_mut().skip(1) {
            *b = -*b;
        }
    }
    Some(betas)
}

fn refine_betas(
    null: &[DVector<f64>],
    pair_list: &[(usize, usize)],
    dist_w: &[f64],
    betas: &mut [f64],
) {
    let n = null.len();
    let diffs: Vec<Vec<Vector3<f64>>> = pair_list
        .iter()
        .map(|&(a, b)| null.iter().map(|v| diff(v, a, b)).collect())
        .collect();
    for _ in 0..BETA_GN_ITERS {
        let mut jac = DMatrix::zeros(pair_list.len(), n);
        let mut res = DVector::zeros(pair_list.len());
        for (r, d) in diffs.iter().enumerate() {
            let s: Vector3<f64> = d.iter().zip(betas.iter()).map(|(v, b)| v * *b).sum();
            res[r] = s.norm_squared() - dist_w[r];
            for k in 0..n {
                jac[(r, k)] = 2.0 * s.dot(&d[k]);
            }
        }
        let Ok(step) = jac.svd(true, true).solve(&res, 1e-14) else {
            return;
        };
        for k in 0..n {
            betas[k] -= step[k];
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
}

fn pose_from_betas(
    null: &[DVector<f64>],
    betas: &[f64],
    frame: &ControlFrame,
    world: &[Point3],
) -> Option<Pose> {
    let nc = frame.world.len();
    let mut ctrl = vec![Vector3::zeros(); nc];
    for (v, b) in null.iter().zip(betas) {
        for (j, c) in ctrl.iter_mut().enumerate() {
            *c += Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]) * *b;
        }
    }
    let mut cam: Vec<Point3> = frame
        .alphas
        .iter()
        .map(|a| a.iter().zip(&ctrl).map(|(w, c)| c * *w).sum())
        .collect();
    let behind = cam.iter().filter(|p| p.z < 0.0).count();
    if 2 * behind > cam.len() {
        for p in cam.iter_mut() {
            *p = -*p;
        }
    }
    let pose = rigid_align(world, &cam)?;
    pose.is_valid().then_some(pose)
}

/// Mean reprojection error in pixels; infinite if a point is behind the
/// camera.
pub fn mean_reprojection_error(pose: &Pose, corr: &[Correspondence], k: &Intrinsics) -> f64 {
    let mut sum = 0.0;
    for c in corr {
        match k.project(&pose.transform(&c.world)) {
            Some(px) => sum += px.distance(&c.px),
            None => return f64::INFINITY,
        }
    }
    sum / corr.len().max(1) as f64
}

/// Camera pose (world to camera) from at least six 3D-2D correspondences.
pub fn epnp(corr: &[Correspondence], k: &Intrinsics) -> Result<Pose, PnpError> {
    if corr.len() < MIN_CORRESPONDENCES {
        return Err(PnpError::NotEnoughPoints(corr.len()));
    }
    let world: Vec<Point3> = corr.iter().map(|c| c.world).collect();
    let frame = control_frame(&world)?;
    let nc = frame.world.len();

    let mut m = DMatrix::zeros(2 * corr.len(), 3 * nc);
    for (i, (c, a)) in corr.iter().zip(&frame.alphas).enumerate() {
        for (j, &aj) in a.iter().enumerate() {
            m[(2 * i, 3 * j)] = aj * k.fx;
            m[(2 * i, 3 * j + 2)] = aj * (k.cx - c.px.u);
            m[(2 * i + 1, 3 * j + 1)] = aj * k.fy;
            m[(2 * i + 1, 3 * j + 2)] = aj * (k.cy - c.px.v);
        }
    }
    let mtm = m.transpose() * &m;
    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..3 * nc).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let pair_list = pairs(nc);
    let dist_w: Vec<f64> = pair_list
        .iter()
        .map(|&(a, b)| (frame.world[a] - frame.world[b]).norm_squared())
        .collect();

    let max_n = if nc == 4 { 4 } else { 3 };
    let mut best: Option<(f64, Pose)> = None;
    for n in 1..=max_n {
        let null: Vec<DVector<f64>> = order[..n]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let Some(mut betas) = initial_betas(&null, &pair_list, &dist_w) else {
            continue;
        };
        refine_betas(&null, &pair_list, &dist_w, &mut betas);
        let Some(pose) = pose_from_betas(&null, &betas, &frame, &world) else {
            continue;
        };
        let err = mean_reprojection_error(&pose, corr, k);
        if err.is_finite() && best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, pose));
        }
    }
    best.map(|(_, p)| p).ok_or(PnpError::Degenerate)
}
