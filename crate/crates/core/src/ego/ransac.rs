//! Seeded RANSAC around EPnP with refit and refinement on the consensus set.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::epnp::{epnp, MIN_CORRESPONDENCES};
use super::refine::refine_pose;
use super::{Correspondence, PnpError};
use crate::geometry::{Intrinsics, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct PnpConfig {
    pub ransac_iters: usize,
    /// Inlier reprojection threshold in pixels (strict).
    pub inlier_px: f64,
    pub min_inliers: usize,
    pub refine_iters: usize,
    pub seed: u64,
    /// Success probability driving adaptive termination.
    pub confidence: f64,
}

impl Default for PnpConfig {
    fn default() -> Self {
        Self {
            ransac_iters: 300,
            inlier_px: 2.5,
            min_inliers: 15,
            refine_iters: 10,
            seed: 0,
            confidence: 0.999,
        }
    }
}

impl PnpConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.ransac_iters > 0
            && self.inlier_px > 0.0
            && self.min_inliers > 0
            && self.refine_iters > 0
            && self.confidence > 0.0
            && self.confidence < 1.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid pnp config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpResult {
    pub pose: Pose,
    /// Indices into the input, ascending.
    pub inliers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    count: usize,
    total: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.count > other.count || (self.count == other.count && self.total < other.total)
    }
}

fn score(pose: &Pose, corr: &[Correspondence], k: &Intrinsics, thr: f64) -> (Score, Vec<usize>) {
    let mut s = Score {
        count: 0,
        total: 0.0,
    };
    let mut inl = Vec::new();
    for (i, c) in corr.iter().enumerate() {
        if let Some(px) = k.project(&pose.transform(&c.world)) {
            let e = px.distance(&c.px);
            if e < thr {
                s.count += 1;
                s.total += e;
                inl.push(i);
            }
        }
    }
    (s, inl)
}

fn required_iterations(inlier_ratio: f64, confidence: f64) -> usize {
    let w = inlier_ratio.powi(MIN_CORRESPONDENCES as i32);
    if w >= 1.0 - 1e-12 {
        return 1;
    }
    if w <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w).ln();
    n.ceil().max(1.0) as usize
}

/// Robust camera pose from correspondences. `prior`, when given, is scored
/// as the first hypothesis. Deterministic for a fixed seed.
pub fn ransac_pnp(
    corr: &[Correspondence],
    k: &Intrinsics,
    cfg: &PnpConfig,
    prior: Option<&Pose>,
) -> Result<PnpResult, PnpError> {
    let lost = |inliers: usize| PnpError::TrackingLost {
        inliers,
        required: cfg.min_inliers,
    };
    if corr.len() < cfg.min_inliers.max(MIN_CORRESPONDENCES) {
        return Err(lost(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Score, Pose, Vec<usize>)> = None;
    let consider = |pose: Pose, best: &mut Option<(Score, Pose, Vec<usize>)>| {
        let (s, inl) = score(&pose, corr, k, cfg.inlier_px);
        if best.as_ref().is_none_or(|(b, _, _)| s.better_than(b)) {
            *best = Some((s, pose, inl));
        }
    };
    if let Some(p) = prior {
        consider(*p, &mut best);
    }
    let mut needed = cfg.ransac_iters;
    let mut it = 0;
    let mut sample_buf = Vec::with_capacity(MIN_CORRESPONDENCES);
    while it < needed.min(cfg.ransac_iters) {
        it += 1;
        sample_buf.clear();
        sample_buf.extend(
            sample(&mut rng, corr.len(), MIN_CORRESPONDENCES)
                .into_iter()
                .map(|i| corr[i]),
        );
        if let Ok(pose) = epnp(&sample_buf, k) {
            consider(pose, &mut best);
        }
        if let Some((s, _, _)) = &best {
            needed = required_iterations(s.count as f64 / corr.len() as f64, cfg.confidence);
        }
    }
    let Some((_best_score, best_pose, best_inl)) = best else {
        return Err(lost(0));
    };
    if best_inl.len() < MIN_CORRESPONDENCES {
        return Err(lost(best_inl.len()));
    }

    let refit_and_refine = |inl: &[usize], start: &Pose| -> Pose {
        let subset: Vec<Correspondence> = inl.iter().map(|&i| corr[i]).collect();
        let refit = epnp(&subset, k).unwrap_or(*start);
        let seed = if score(&refit, &subset, k, cfg.inlier_px).0.better_than(
            &score(start, &subset, k, cfg.inlier_px).0,
        ) {
            refit
        } else {
            *start
        };
        refine_pose(&seed, &subset, k, cfg.refine_iters)
    };

    let mut pose = best_pose;
    let mut inliers = best_inl;
    // Two refit passes; the refined model always replaces the raw hypothesis
    // and the consensus set is rescored around it.
    for _ in 0..2 {
        pose = refit_and_refine(&inliers, &pose);
        let (_, inl) = score(&pose, corr, k, cfg.inlier_px);
        let same = inl == inliers;
        inliers = inl;
        if same {
            break;
        }
    }
    if inliers.len() < cfg.min_inliers {
        return Err(lost(inliers.len()));
    }
    Ok(PnpResult { pose, inliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pixel, Point3};
    use nalgebra::Vector3;
    use rand::Rng;

    fn make(rng: &mut ChaCha8Rng, truth: &Pose, k: &Intrinsics, n: usize) -> Vec<Correspondence> {
        let inv = truth.inverse();
        (0..n)
            .map(|_| {
                let pc = Point3::new(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(2.0..6.0),
                );
                Correspondence {
                    world: inv.transform(&pc),
                    px: k.project(&pc).unwrap(),
                    sigma: 1.0,
                }
            })
            .collect()
    }

    fn err(a: &Pose, b: &Pose) -> f64 {
        a.inverse().compose(b).rotation_angle().max((a.translation - b.translation).norm())
    }

    fn truth() -> Pose {
        Pose::from_axis_angle(&Vector3::new(0.05, -0.1, 0.02), Vector3::new(0.2, 0.05, -0.1))
    }

    #[test]
    fn perfect_correspondences_are_all_inliers() {
        let k = Intrinsics::tum_default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let corr = make(&mut rng, &truth(), &k, 100);
        let r = ransac_pnp(&corr, &k, &PnpConfig::default(), None).unwrap();
        assert_eq!(r.inliers.len(), 100);
        assert!(err(&r.pose, &truth()) < 1e-9);
    }

    #[test]
    fn planted_outliers_are_rejected() {
        let k = Intrinsics::tum_default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut corr = make(&mut rng, &truth(), &k, 100);
        for c in corr.iter_mut().skip(70) {
            c.px = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        }
        let r = ransac_pnp(&corr, &k, &PnpConfig::default(), None).unwrap();
        assert!(r.inliers.len() >= 70);
        assert!((0..70).all(|i| r.inliers.contains(&i)));
        assert!(err(&r.pose, &truth()) < 1e-4);
    }

    #[test]
    fn all_corrupted_is_tracking_lost() {
        let k = Intrinsics::tum_default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut corr = make(&mut rng, &truth(), &k, 10);
        for c in corr.iter_mut() {
            c.px = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        }
        let r = ransac_pnp(&corr, &k, &PnpConfig::default(), None);
        assert!(matches!(r, Err(PnpError::TrackingLost { .. })));

        let mut many = make(&mut rng, &truth(), &k, 60);
        for c in many.iter_mut() {
            c.px = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        }
        let r = ransac_pnp(&many, &k, &PnpConfig::default(), None);
        assert!(matches!(r, Err(PnpError::TrackingLost { .. })));
    }

    #[test]
    fn deterministic_for_seed() {
        let k = Intrinsics::tum_default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut corr = make(&mut rng, &truth(), &k, 80);
        for c in corr.iter_mut().skip(50) {
            c.px = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        }
        let cfg = PnpConfig {
            seed: 99,
            ..PnpConfig::default()
        };
        let a = ransac_pnp(&corr, &k, &cfg, None).unwrap();
        let b = ransac_pnp(&corr, &k, &cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inliers_respect_threshold() {
        let k = Intrinsics::tum_default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut corr = make(&mut rng, &truth(), &k, 100);
        for c in corr.iter_mut() {
            c.px.u += rng.random_range(-1.5..1.5);
        }
        let cfg = PnpConfig::default();
        let r = ransac_pnp(&corr, &k, &cfg, None).unwrap();
        for &i in &r.inliers {
            let px = k.project(&r.pose.transform(&corr[i].world)).unwrap();
            assert!(px.distance(&corr[i].px) < cfg.inlier_px);
        }
    }
}
