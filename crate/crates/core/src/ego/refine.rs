//! Motion-only pose refinement: Huber-weighted Gauss-Newton on reprojection
//! error with a left-multiplied axis-angle + translation update.

use nalgebra::{Matrix2x6, Matrix3, Matrix6, Vector2, Vector3, Vector6};

use super::Correspondence;
use crate::geometry::{exp_so3, skew, Intrinsics, Pixel, Point3, Pose};

pub const HUBER_DELTA: f64 = 2.45;

/// Cost charged for a point that ends up behind the camera.
const BEHIND_PENALTY_PX: f64 = 1e3;
const MAX_STALLS: usize = 3;

fn huber(r: f64) -> f64 {
    if r <= HUBER_DELTA {
        0.5 * r * r
    } else {
        HUBER_DELTA * (r - 0.5 * HUBER_DELTA)
    }
}

/// Total robust reprojection cost of `pose` over `corr`.
pub fn robust_cost(pose: &Pose, corr: &[Correspondence], k: &Intrinsics) -> f64 {
    corr.iter()
        .map(|c| match k.project(&pose.transform(&c.world)) {
            Some(px) => huber(px.distance(&c.px) / c.sigma),
            None => huber(BEHIND_PENALTY_PX),
        })
        .sum()
}

/// Projected pixel and the 2x6 Jacobian of the projection with respect to a
/// left perturbation `(omega, v)`: `p_c' = exp(omega) p_c + v`.
pub fn reprojection_jacobian(
    pose: &Pose,
    world: &Point3,
    k: &Intrinsics,
) -> Option<(Pixel, Matrix2x6<f64>)> {
    let pc = pose.transform(world);
    let px = k.project(&pc)?;
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let iz = 1.0 / z;
    let jp = nalgebra::Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * y * iz * iz,
    );
    let rot_part: Matrix3<f64> = -skew(&pc);
    let mut j = Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(jp * rot_part));
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&jp);
    Some((px, j))
}

/// Applies the left perturbation `(omega, v)` to a pose.
pub fn apply_update(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let v = Vector3::new(delta[3], delta[4], delta[5]);
    let r = exp_so3(&omega);
    Pose::new(r * pose.rotation, r * pose.translation + v)
}

#[derive(Debug, Clone)]
pub struct RefineTrace {
    pub pose: Pose,
    /// Cost of the initial pose followed by the cost after every iteration.
    pub costs: Vec<f64>,
    /// True if refinement stopped after repeated non-decreasing steps.
    pub stalled: bool,
}

/// Refines `initial` for at most `iters` iterations, keeping the best pose.
pub fn refine_pose_traced(
    initial: &Pose,
    corr: &[Correspondence],
    k: &Intrinsics,
    iters: usize,
) -> RefineTrace {
    let mut pose = *initial;
    let mut cost = robust_cost(&pose, corr, k);
    let mut costs = vec![cost];
    let mut lambda = 1e-6;
    let mut stalls = 0;
    let mut stalled = false;
    for _ in 0..iters {
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for c in corr {
            let Some((px, j)) = reprojection_jacobian(&pose, &c.world, k) else {
                continue;
            };
            let e = Vector2::new(px.u - c.px.u, px.v - c.px.v) / c.sigma;
            let j = j / c.sigma;
            let r = e.norm();
            let w = if r <= HUBER_DELTA { 1.0 } else { HUBER_DELTA / r };
            h += w * j.transpose() * j;
            g += w * j.transpose() * e;
        }
        if g.norm() < 1e-14 {
            costs.push(cost);
            break;
        }
        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-9);
        }
        let Some(step) = damped.cholesky().map(|ch| -ch.solve(&g)) else {
            lambda *= 10.0;
            stalls += 1;
            costs.push(cost);
            if stalls >= MAX_STALLS {
                stalled = true;
                break;
            }
            continue;
        };
        let candidate = apply_update(&pose, &step);
        let new_cost = robust_cost(&candidate, corr, k);
        if new_cost < cost {
            pose = candidate;
            stalls = 0;
            lambda = (lambda * 0.1).max(1e-12);
            let converged = step.norm() < 1e-12 || cost - new_cost < 1e-15 * cost.max(1.0);
            cost = new_cost;
            costs.push(cost);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            stalls += 1;
            costs.push(cost);
            if stalls >= MAX_STALLS {
                stalled = true;
                break;
            }
        }
    }
    RefineTrace {
        pose,
        costs,
        stalled,
    }
}

/// Refined camera pose; never worse than `initial` under the robust cost.
pub fn refine_pose(initial: &Pose, corr: &[Correspondence], k: &Intrinsics, iters: usize) -> Pose {
    refine_pose_traced(initial, corr, k, iters).pose
}
