//! Trajectory error metrics: rigid alignment, ATE and per-frame RPE.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{rigid_align, Point3, Pose};
use crate::io::{associate, Trajectory};

pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ate_rmse: f64,
    pub rpe_t_rmse: f64,
    pub rpe_r_rmse_deg: f64,
    pub n_matched: usize,
    /// Maps estimated positions onto ground truth.
    pub alignment: Pose,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ATE_RMSE m {:.6}", self.ate_rmse)?;
        writeln!(f, "RPE_T m/frame {:.6}", self.rpe_t_rmse)?;
        writeln!(f, "RPE_R deg/frame {:.6}", self.rpe_r_rmse_deg)?;
        writeln!(f, "matched {}", self.n_matched)
    }
}

/// Timestamp-associated `(est, gt)` pose pairs in time order.
pub fn associated_pairs(est: &Trajectory, gt: &Trajectory, tolerance: f64) -> Vec<(Pose, Pose)> {
    let est = est.clone().sorted();
    let gt = gt.clone().sorted();
    associate(&est.timestamps(), &gt.timestamps(), tolerance)
        .into_iter()
        .map(|(i, j)| (est.entries[i].1, gt.entries[j].1))
        .collect()
}

fn positions(pairs: &[(Pose, Pose)]) -> (Vec<Point3>, Vec<Point3>) {
    pairs.iter().map(|(e, g)| (e.translation, g.translation)).unzip()
}

/// Least-squares rigid transform (no scale) taking estimated positions onto
/// ground-truth positions.
pub fn align_rigid(est: &Trajectory, gt: &Trajectory) -> Result<Pose> {
    let pairs = associated_pairs(est, gt, DEFAULT_TOLERANCE);
    align_pairs(&pairs)
}

fn align_pairs(pairs: &[(Pose, Pose)]) -> Result<Pose> {
    if pairs.is_empty() {
        return Err(Error::NoAssociations);
    }
    if pairs.len() < 3 {
        return Err(Error::NotEnoughData(format!("{} associated poses, need 3", pairs.len())));
    }
    let (e, g) = positions(pairs);
    rigid_align(&e, &g).ok_or_else(|| Error::NotEnoughData("alignment is degenerate".into()))
}

fn ate_pairs(pairs: &[(Pose, Pose)], align: &Pose) -> f64 {
    let sum: f64 = pairs
        .iter()
        .map(|(e, g)| (align.transform(&e.translation) - g.translation).norm_squared())
        .sum();
    (sum / pairs.len() as f64).sqrt()
}

pub fn ate_rmse(est: &Trajectory, gt: &Trajectory) -> Result<f64> {
    let pairs = associated_pairs(est, gt, DEFAULT_TOLERANCE);
    let align = align_pairs(&pairs)?;
    Ok(ate_pairs(&pairs, &align))
}

/// Relative pose error over frame offset `delta`: `(m/frame, deg/frame)`.
fn rpe_pairs(pairs: &[(Pose, Pose)], delta: usize) -> Result<(f64, f64)> {
    if delta == 0 || pairs.len() < delta + 1 {
        return Err(Error::NotEnoughData(format!(
            "{} associated poses for delta {delta}",
            pairs.len()
        )));
    }
    let mut st = 0.0;
    let mut sr = 0.0;
    let n = pairs.len() - delta;
    for i in 0..n {
        let (e0, g0) = &pairs[i];
        let (e1, g1) = &pairs[i + delta];
        let dg = g0.inverse().compose(g1);
        let de = e0.inverse().compose(e1);
        let err = dg.inverse().compose(&de);
        st += err.translation.norm_squared();
        sr += err.rotation_angle().to_degrees().powi(2);
    }
    Ok(((st / n as f64).sqrt(), (sr / n as f64).sqrt()))
}

pub fn rpe(est: &Trajectory, gt: &Trajectory, delta: usize) -> Result<(f64, f64)> {
    rpe_pairs(&associated_pairs(est, gt, DEFAULT_TOLERANCE), delta)
}

/// Full report with association tolerance `tolerance` and RPE delta 1.
pub fn evaluate(est: &Trajectory, gt: &Trajectory, tolerance: f64) -> Result<EvalReport> {
    let pairs = associated_pairs(est, gt, tolerance);
    let alignment = align_pairs(&pairs)?;
    let (rpe_t_rmse, rpe_r_rmse_deg) = rpe_pairs(&pairs, 1)?;
    Ok(EvalReport {
        ate_rmse: ate_pairs(&pairs, &alignment),
        rpe_t_rmse,
        rpe_r_rmse_deg,
        n_matched: pairs.len(),
        alignment,
    })
}

/// Per-pair aligned position residuals, `timestamp residual_m` lines.
pub fn residual_dump(est: &Trajectory, gt: &Trajectory, tolerance: f64) -> Result<String> {
    use std::fmt::Write as _;
    let est_s = est.clone().sorted();
    let gt_s = gt.clone().sorted();
    let idx = associate(&est_s.timestamps(), &gt_s.timestamps(), tolerance);
    let pairs: Vec<(Pose, Pose)> = idx.iter().map(|&(i, j)| (est_s.entries[i].1, gt_s.entries[j].1)).collect();
    let align = align_pairs(&pairs)?;
    let mut s = String::new();
    for (&(i, _), (e, g)) in idx.iter().zip(&pairs) {
        let r = (align.transform(&e.translation) - g.translation).norm();
        let _ = writeln!(s, "{:.6} {r:.6}", est_s.entries[i].0);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_pose(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> Pose {
        Pose::from_axis_angle(
            &Vector3::new(
                rng.random_range(-rot..rot),
                rng.random_range(-rot..rot),
                rng.random_range(-rot..rot),
            ),
            Vector3::new(
                rng.random_range(-trans..trans),
                rng.random_range(-trans..trans),
                rng.random_range(-trans..trans),
            ),
        )
    }

    fn random_traj(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
        let mut t = Trajectory::new();
        let mut p = Pose::identity();
        for i in 0..n {
            t.push(i as f64 / 30.0, p);
            p = p.compose(&random_pose(rng, 0.05, 0.05));
        }
        t
    }

    #[test]
    fn identical_trajectories_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = random_traj(&mut rng, 50);
        let r = evaluate(&gt, &gt, DEFAULT_TOLERANCE).unwrap();
        assert!(r.ate_rmse < 1e-12 && r.rpe_t_rmse < 1e-12 && r.rpe_r_rmse_deg < 1e-6);
        assert_eq!(r.n_matched, 50);
        let a = align_rigid(&gt, &gt).unwrap();
        assert!(a.translation.norm() < 1e-12 && a.rotation_angle() < 1e-9);
    }

    #[test]
    fn alignment_recovers_planted_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let gt = random_traj(&mut rng, 30);
            let g = random_pose(&mut rng, 3.0, 5.0);
            let est = gt.transformed(&g);
            let a = align_rigid(&est, &gt).unwrap();
            let inv = g.inverse();
            assert!((a.translation - inv.translation).norm() < 1e-9);
            assert!((a.rotation - inv.rotation).norm() < 1e-9);
            assert!(ate_rmse(&est, &gt).unwrap() < 1e-9);
        }
    }

    #[test]
    fn noise_residual_matches_expected_level() {
        // After a 6-dof fit of n points with isotropic noise sigma the
        // expected residual RMSE is sigma * sqrt(3 - 6/n) per point.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = 0.01;
        let normal = Normal::new(0.0, sigma).unwrap();
        let n = 200;
        let mut total = 0.0;
        for _ in 0..100 {
            let gt = random_traj(&mut rng, n);
            let mut est = Trajectory::new();
            for (t, p) in &gt.entries {
                let noise = Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
                est.push(*t, Pose::new(p.rotation, p.translation + noise));
            }
            total += ate_rmse(&est, &gt).unwrap();
        }
        let mean = total / 100.0;
        let expected = sigma * (3.0 - 6.0 / n as f64).sqrt();
        assert!((mean - expected).abs() < 0.2 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn alternating_offset_has_closed_form_rmse() {
        // gt on a line; est offset alternately by +-0.1 m along y. The
        // optimal alignment is the identity, leaving RMSE 0.1.
        let mut gt = Trajectory::new();
        let mut est = Trajectory::new();
        for i in 0..20 {
            let x = i as f64 * 0.1;
            gt.push(i as f64, Pose::from_translation(x, 0.0, 0.0));
            let s = if i % 2 == 0 { 0.1 } else { -0.1 };
            est.push(i as f64, Pose::from_translation(x, s, 0.0));
        }
        // Brute-force check of the residual formula with the identity.
        let brute: f64 = (0..20).map(|_| 0.01).sum::<f64>() / 20.0;
        let ate = ate_rmse(&est, &gt).unwrap();
        assert!(ate <= brute.sqrt() + 1e-12);
        assert!((ate - 0.1).abs() < 1e-3, "{ate}");
    }

    #[test]
    fn planted_drift_gives_exact_rpe() {
        let mut gt = Trajectory::new();
        let mut est = Trajectory::new();
        for i in 0..30 {
            gt.push(i as f64, Pose::identity());
            est.push(i as f64, Pose::from_translation(0.01 * i as f64, 0.0, 0.0));
        }
        let (t, r) = rpe(&est, &gt, 1).unwrap();
        assert!((t - 0.01).abs() < 1e-15, "{t}");
        assert_eq!(r, 0.0);
    }

    #[test]
    fn too_few_pairs_and_no_associations() {
        let mut a = Trajectory::new();
        let mut b = Trajectory::new();
        a.push(0.0, Pose::identity());
        b.push(5.0, Pose::identity());
        assert!(matches!(align_rigid(&a, &b), Err(Error::NoAssociations)));
        b = a.clone();
        assert!(matches!(align_rigid(&a, &b), Err(Error::NotEnoughData(_))));
    }

    #[test]
    fn report_text_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = random_traj(&mut rng, 10);
        let text = evaluate(&gt, &gt, DEFAULT_TOLERANCE).unwrap().to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("ATE_RMSE m "));
        assert!(lines[1].starts_with("RPE_T m/frame "));
        assert!(lines[2].starts_with("RPE_R deg/frame "));
        assert_eq!(lines[3], "matched 10");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metrics_are_invariant_to_rigid_transforms(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_traj(&mut rng, 20);
            let est = random_traj(&mut rng, 20);
            let g = random_pose(&mut rng, 3.0, 5.0);
            let h = random_pose(&mut rng, 3.0, 5.0);
            let base = ate_rmse(&est, &gt).unwrap();
            prop_assert!((ate_rmse(&est.transformed(&g), &gt).unwrap() - base).abs() < 1e-9);
            let (t0, r0) = rpe(&est, &gt, 1).unwrap();
            let (t1, r1) = rpe(&est.transformed(&g), &gt.transformed(&h), 1).unwrap();
            prop_assert!((t0 - t1).abs() < 1e-9);
            prop_assert!((r0 - r1).abs() < 1e-6);
        }

        #[test]
        fn metrics_ignore_storage_order(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_traj(&mut rng, 15);
            let est = random_traj(&mut rng, 15);
            let mut shuffled = est.clone();
            shuffled.entries.reverse();
            let a = evaluate(&est, &gt, DEFAULT_TOLERANCE).unwrap();
            let b = evaluate(&shuffled, &gt, DEFAULT_TOLERANCE).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
