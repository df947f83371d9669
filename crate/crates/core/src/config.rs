//! Run configuration: every module's settings in one `key=value` file with
//! section prefixes (`feature.n_features=1000`). Unknown keys are errors.

use std::path::Path;

use crate::dynamic::DynConfig;
use crate::ego::{SystemMode, TrackerConfig};
use crate::error::{Error, Result};
use crate::feedback::FeedbackConfig;
use crate::geometry::Intrinsics;
use crate::io::SequenceConfig;
use crate::map::dense::DenseConfig;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: SystemMode,
    /// Seeds both the ego RANSAC and the object-motion RANSAC.
    pub seed: u64,
    pub intrinsics: Intrinsics,
    pub sequence: SequenceConfig,
    pub tracker: TrackerConfig,
    pub dynamic: DynConfig,
    pub map: DenseConfig,
    pub feedback: FeedbackConfig,
    /// Run point flow concurrently with ego-motion estimation.
    pub overlap: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: SystemMode::Full,
            seed: 0,
            intrinsics: Intrinsics::tum_default(),
            sequence: SequenceConfig::default(),
            tracker: TrackerConfig::default(),
            dynamic: DynConfig::default(),
            map: DenseConfig::default(),
            feedback: FeedbackConfig::default(),
            overlap: true,
        }
    }
}

/// A scalar that can be read from and written to config text.
trait Field {
    fn set(&mut self, s: &str) -> std::result::Result<(), String>;
    fn show(&self) -> String;
}

macro_rules! parsed_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn set(&mut self, s: &str) -> std::result::Result<(), String> {
                *self = s.parse().map_err(|e| format!("{e}"))?;
                Ok(())
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

parsed_field!(usize, u64, u32, u8, f64, bool);

impl Field for SystemMode {
    fn set(&mut self, s: &str) -> std::result::Result<(), String> {
        *self = s.parse().map_err(|e: Error| e.to_string())?;
        Ok(())
    }
    fn show(&self) -> String {
        self.to_string()
    }
}

impl RunConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn Field)> {
        let k = &mut self.intrinsics;
        let t = &mut self.tracker;
        let d = &mut self.dynamic;
        vec![
            ("mode", &mut self.mode),
            ("seed", &mut self.seed),
            ("camera.fx", &mut k.fx),
            ("camera.fy", &mut k.fy),
            ("camera.cx", &mut k.cx),
            ("camera.cy", &mut k.cy),
            ("camera.width", &mut k.width),
            ("camera.height", &mut k.height),
            ("camera.depth_scale", &mut k.depth_scale),
            ("sequence.assoc_tolerance", &mut self.sequence.assoc_tolerance),
            ("sequence.require_masks", &mut self.sequence.require_masks),
            ("feature.n_features", &mut t.feature.n_features),
            ("feature.levels", &mut t.feature.levels),
            ("feature.scale_factor", &mut t.feature.scale_factor),
            ("feature.fast_threshold", &mut t.feature.fast_threshold),
            ("feature.cell_size", &mut t.feature.cell_size),
            ("feature.match_threshold", &mut t.feature.match_threshold),
            ("feature.match_ratio", &mut t.feature.match_ratio),
            ("pnp.ransac_iters", &mut t.pnp.ransac_iters),
            ("pnp.inlier_px", &mut t.pnp.inlier_px),
            ("pnp.min_inliers", &mut t.pnp.min_inliers),
            ("pnp.refine_iters", &mut t.pnp.refine_iters),
            ("pnp.confidence", &mut t.pnp.confidence),
            ("tracker.local_window", &mut t.local_window),
            ("tracker.search_radius", &mut t.search_radius),
            ("tracker.kf_track_ratio", &mut t.kf_track_ratio),
            ("tracker.kf_translation", &mut t.kf_translation),
            ("tracker.kf_rotation_deg", &mut t.kf_rotation_deg),
            ("tracker.cull_age", &mut t.cull_age),
            ("tracker.flag_hold", &mut t.flag_hold),
            ("tracker.depth_lag", &mut t.depth_lag),
            ("depth.tau_z", &mut t.depth.tau_z),
            ("depth.stride", &mut t.depth.stride),
            ("depth.fraction", &mut t.depth.fraction),
            ("depth.min_samples", &mut t.depth.min_samples),
            ("dyn.sample_stride", &mut d.sample_stride),
            ("dyn.sf_threshold", &mut d.sf_threshold),
            ("dyn.dyn_fraction", &mut d.dyn_fraction),
            ("dyn.min_tracked_points", &mut d.min_tracked_points),
            ("dyn.replenish_fraction", &mut d.replenish_fraction),
            ("dyn.max_lost_frames", &mut d.max_lost_frames),
            ("dyn.speed_window", &mut d.speed_window),
            ("dyn.assoc_fraction", &mut d.assoc_fraction),
            ("dyn.trunk_dilation", &mut d.trunk_dilation),
            ("dyn.use_keypoints", &mut d.use_keypoints),
            ("dyn.use_dense_flow", &mut d.use_dense_flow),
            ("dyn.replenish_gap_px", &mut d.replenish_gap_px),
            ("dyn.refine_iters", &mut d.refine_iters),
            ("dyn.model_voxel", &mut d.model_voxel),
            ("dyn.reacquire_min_points", &mut d.reacquire_min_points),
            ("dyn.reacquire_depth_tol", &mut d.reacquire_depth_tol),
            ("dyn.max_motion_rotation", &mut d.max_motion_rotation),
            ("flow.levels", &mut d.flow.levels),
            ("flow.patch", &mut d.flow.patch),
            ("flow.max_iters", &mut d.flow.max_iters),
            ("flow.epsilon", &mut d.flow.epsilon),
            ("flow.max_residual", &mut d.flow.max_residual),
            ("map.resolution", &mut self.map.resolution),
            ("map.filter_dynamic", &mut self.map.filter_dynamic),
            ("map.pixel_stride", &mut self.map.pixel_stride),
            ("feedback.front_half_angle_deg", &mut self.feedback.front_half_angle_deg),
            ("feedback.high_speed", &mut self.feedback.high_speed),
            ("feedback.risk_distance", &mut self.feedback.risk_distance),
            ("pipeline.overlap", &mut self.overlap),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Self::default().fields().into_iter().map(|(k, _)| k).collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut fields = self.fields();
        let (_, f) = fields
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        f.set(value).map_err(|e| Error::Config(format!("`{key}`: bad value {value:?}: {e}")))?;
        if key == "seed" {
            self.apply_seed();
        }
        Ok(())
    }

    pub fn get(&mut self, key: &str) -> Option<String> {
        self.fields().into_iter().find(|(k, _)| *k == key).map(|(_, f)| f.show())
    }

    pub fn apply_seed(&mut self) {
        self.tracker.pnp.seed = self.seed;
        self.dynamic.seed = self.seed;
    }

    /// Applies `key=value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key=value`"))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Every key with its current value, in a form `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut c = self.clone();
        c.fields().into_iter().map(|(k, f)| format!("{k}={}\n", f.show())).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.tracker.validate()?;
        self.dynamic.validate()?;
        self.feedback.validate()?;
        if !(self.sequence.assoc_tolerance > 0.0) {
            return Err(Error::Config("sequence.assoc_tolerance must be positive".into()));
        }
        if !(self.map.resolution > 0.0) || self.map.pixel_stride == 0 {
            return Err(Error::Config("map.resolution and map.pixel_stride must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_text(), Path::new("c.cfg")).unwrap();
        assert_eq!(back.to_text(), c.to_text());
        assert_eq!(back.tracker, c.tracker);
        assert_eq!(back.dynamic, c.dynamic);
    }

    #[test]
    fn sections_and_comments() {
        let text = "# tuning\nfeature.n_features = 500\nmode=baseline\n\ndyn.sf_threshold=0.03 # looser\nseed=7\n";
        let c = RunConfig::parse(text, Path::new("c.cfg")).unwrap();
        assert_eq!(c.tracker.feature.n_features, 500);
        assert_eq!(c.mode, SystemMode::Baseline);
        assert_eq!(c.dynamic.sf_threshold, 0.03);
        assert_eq!((c.tracker.pnp.seed, c.dynamic.seed), (7, 7));
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let e = RunConfig::parse("feature.n_feature=5\n", Path::new("c.cfg")).unwrap_err();
        assert!(e.to_string().contains("c.cfg:1") && e.to_string().contains("unknown key"), "{e}");
        assert!(RunConfig::parse("ok\n", Path::new("c.cfg")).is_err());
        assert!(RunConfig::parse("feature.levels=many\n", Path::new("c.cfg")).is_err());
        assert!(RunConfig::parse("mode=fast\n", Path::new("c.cfg")).is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(RunConfig::parse("dyn.dyn_fraction=1.5\n", Path::new("c.cfg")).is_err());
        assert!(RunConfig::parse("map.resolution=0\n", Path::new("c.cfg")).is_err());
        assert!(RunConfig::parse("camera.fx=-1\n", Path::new("c.cfg")).is_err());
    }

    #[test]
    fn keys_are_unique() {
        let keys = RunConfig::keys();
        let set: std::collections::BTreeSet<_> = keys.iter().collect();
        assert_eq!(set.len(), keys.len());
    }
}
