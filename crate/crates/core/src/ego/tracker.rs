//! Frame-to-local-map camera tracking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::debug;

use super::depth_diff::{identify_nonprior_dynamic, DepthDiffConfig, DepthView};
use super::ransac::{ransac_pnp, PnpConfig};
use super::refine::refine_pose;
use super::{Correspondence, SystemMode};
use crate::features::{
    attach_depth_and_labels, detect, hamming, match_descriptors, Descriptor, FeatureConfig, FeaturePoint,
};
use crate::geometry::{Intrinsics, Pixel, Point3, Pose};
use crate::image::DepthImage;
use crate::io::{Frame, PanopticMask};
use crate::map::sparse::{KeyframeStamp, SparseMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub feature: FeatureConfig,
    pub pnp: PnpConfig,
    pub depth: DepthDiffConfig,
    /// Keyframes whose points form the local map.
    pub local_window: usize,
    /// Guided-matching search radius around the predicted projection, px.
    pub search_radius: f64,
    pub kf_track_ratio: f64,
    pub kf_translation: f64,
    pub kf_rotation_deg: f64,
    /// Map points unseen for this many keyframes are culled.
    pub cull_age: usize,
    /// Frames an instance stays excluded after being flagged.
    pub flag_hold: usize,
    /// Frame lag of the depth-difference reference.
    pub depth_lag: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            feature: FeatureConfig::default(),
            pnp: PnpConfig::default(),
            depth: DepthDiffConfig::default(),
            local_window: 10,
            search_radius: 15.0,
            kf_track_ratio: 0.7,
            kf_translation: 0.1,
            kf_rotation_deg: 5.0,
            cull_age: 30,
            flag_hold: 10,
            depth_lag: 30,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.feature.validate()?;
        self.pnp.validate()?;
        let d = &self.depth;
        let ok = d.tau_z > 0.0
            && d.stride > 0
            && d.fraction > 0.0
            && d.fraction < 1.0
            && self.local_window > 0
            && self.search_radius > 0.0
            && self.kf_track_ratio > 0.0
            && self.kf_translation > 0.0
            && self.kf_rotation_deg > 0.0
            && self.cull_age > 0
            && self.depth_lag > 0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid tracker config {self:?}")))
        }
    }
}

/// A feature matched to a map point and consistent with the pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlierMatch {
    pub feature: usize,
    pub map_point: u64,
    pub world: Point3,
    pub px: Pixel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoResult {
    pub frame_index: usize,
    pub timestamp: f64,
    /// World to camera.
    pub pose: Pose,
    pub inlier_matches: Vec<InlierMatch>,
    /// Non-prior instances treated as moving in this frame.
    pub nonprior_dynamic_ids: BTreeSet<u32>,
    pub tracked_feature_count: usize,
    pub lost: bool,
    pub keyframe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeRecord {
    pub frame_index: usize,
    pub timestamp: f64,
    /// World to camera.
    pub pose: Pose,
    pub flagged: BTreeSet<u32>,
}

struct PastFrame {
    depth: DepthImage,
    mask: PanopticMask,
    pose: Pose,
}

pub struct EgoTracker {
    cfg: TrackerConfig,
    k: Intrinsics,
    mode: SystemMode,
    map: SparseMap,
    keyframes: Vec<KeyframeRecord>,
    kf_ordinal: usize,
    last_kf_pose: Pose,
    ref_tracked: usize,
    last_pose: Option<Pose>,
    velocity: Pose,
    history: VecDeque<PastFrame>,
    sticky: BTreeMap<u32, usize>,
    need_init: bool,
}

const GRID: f64 = 16.0;

/// Features bucketed on a coarse grid for radius queries.
struct FeatureGrid {
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl FeatureGrid {
    fn new(feats: &[FeaturePoint], allowed: &[bool], w: usize, h: usize) -> Self {
        let cols = (w as f64 / GRID).ceil() as usize + 1;
        let rows = (h as f64 / GRID).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); cols * rows];
        for (i, f) in feats.iter().enumerate() {
            if !allowed[i] {
                continue;
            }
            let cx = ((f.px.u.max(0.0) / GRID) as usize).min(cols - 1);
            let cy = ((f.px.v.max(0.0) / GRID) as usize).min(rows - 1);
            cells[cy * cols + cx].push(i);
        }
        Self { cols, rows, cells }
    }

    fn query(&self, px: &Pixel, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let x0 = ((px.u - r).max(0.0) / GRID) as usize;
        let y0 = ((px.v - r).max(0.0) / GRID) as usize;
        let x1 = (((px.u + r).max(0.0) / GRID) as usize).min(self.cols - 1);
        let y1 = (((px.v + r).max(0.0) / GRID) as usize).min(self.rows - 1);
        for cy in y0.min(self.rows - 1)..=y1 {
            for cx in x0.min(self.cols - 1)..=x1 {
                out.extend_from_slice(&self.cells[cy * self.cols + cx]);
            }
        }
    }
}

impl EgoTracker {
    pub fn new(cfg: TrackerConfig, k: Intrinsics, mode: SystemMode) -> Self {
        Self {
            cfg,
            k,
            mode,
            map: SparseMap::new(),
            keyframes: Vec::new(),
            kf_ordinal: 0,
            last_kf_pose: Pose::identity(),
            ref_tracked: 0,
            last_pose: None,
            velocity: Pose::identity(),
            history: VecDeque::new(),
            sticky: BTreeMap::new(),
            need_init: true,
        }
    }

    pub fn mode(&self) -> SystemMode {
        self.mode
    }

    pub fn map(&self) -> &SparseMap {
        &self.map
    }

    pub fn keyframes(&self) -> &[KeyframeRecord] {
        &self.keyframes
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.k
    }

    fn active_flags(&self, frame_index: usize) -> BTreeSet<u32> {
        self.sticky
            .iter()
            .filter(|(_, &last)| frame_index.saturating_sub(last) < self.cfg.flag_hold)
            .map(|(&c, _)| c)
            .collect()
    }

    fn excluded(&self, mask: &PanopticMask, flags: &BTreeSet<u32>, code: u32) -> bool {
        match self.mode {
            SystemMode::Baseline => false,
            SystemMode::Semantic => mask.is_prior_dynamic(code),
            SystemMode::Full => mask.is_prior_dynamic(code) || flags.contains(&code),
        }
    }

    fn features(&self, frame: &Frame) -> Vec<FeaturePoint> {
        let mut feats = detect(&frame.gray(), &self.cfg.feature);
        attach_depth_and_labels(&mut feats, &frame.depth, &frame.mask.labels);
        feats
    }

    fn remember(&mut self, frame: &Frame, pose: Pose) {
        self.history.push_back(PastFrame {
            depth: frame.depth.clone(),
            mask: frame.mask.clone(),
            pose,
        });
        while self.history.len() > self.cfg.depth_lag {
            self.history.pop_front();
        }
    }

    fn add_keyframe(
        &mut self,
        frame: &Frame,
        pose: &Pose,
        feats: &[FeaturePoint],
        matched: &[Option<usize>],
        flags: &BTreeSet<u32>,
    ) -> usize {
        self.kf_ordinal += 1;
        let stamp = KeyframeStamp {
            frame_index: frame.index,
            keyframe: self.kf_ordinal,
        };
        let mode = self.mode;
        let mask = &frame.mask;
        let excluded = |code: u32| match mode {
            SystemMode::Baseline => false,
            SystemMode::Semantic => mask.is_prior_dynamic(code),
            SystemMode::Full => mask.is_prior_dynamic(code) || flags.contains(&code),
        };
        let inserted = self.map.insert_map_points(pose, feats, matched, excluded, &self.k, stamp);
        let culled = self.map.cull(self.kf_ordinal, self.cfg.cull_age);
        debug!(
            "keyframe {} at frame {}: +{inserted} -{culled} -> {} points",
            self.kf_ordinal,
            frame.index,
            self.map.len()
        );
        self.last_kf_pose = *pose;
        self.keyframes.push(KeyframeRecord {
            frame_index: frame.index,
            timestamp: frame.timestamp,
            pose: *pose,
            flagged: flags.clone(),
        });
        matched.iter().filter(|m| m.is_some()).count() + inserted
    }

    fn initialize(&mut self, frame: &Frame, feats: Vec<FeaturePoint>, pose: Pose) -> EgoResult {
        self.map.clear();
        let flags = self.active_flags(frame.index);
        let none = vec![None; feats.len()];
        let inserted = self.add_keyframe(frame, &pose, &feats, &none, &flags);
        self.ref_tracked = inserted;
        self.need_init = false;
        if let Some(last) = self.last_pose {
            self.velocity = pose.compose(&last.inverse());
        }
        self.last_pose = Some(pose);
        self.remember(frame, pose);
        EgoResult {
            frame_index: frame.index,
            timestamp: frame.timestamp,
            pose,
            inlier_matches: Vec::new(),
            nonprior_dynamic_ids: if self.mode == SystemMode::Full { flags } else { BTreeSet::new() },
            tracked_feature_count: inserted,
            lost: false,
            keyframe: true,
        }
    }

    /// Guided matching of local map points to features near their predicted
    /// projections; one map point per feature, lowest distance wins.
    fn guided_matches(
        &self,
        local: &[usize],
        feats: &[FeaturePoint],
        allowed: &[bool],
        pose: &Pose,
        radius: f64,
    ) -> Vec<(usize, usize)> {
        let grid = FeatureGrid::new(feats, allowed, self.k.width, self.k.height);
        let max_d = self.cfg.feature.match_threshold;
        let ratio = self.cfg.feature.match_ratio;
        let mut best_for_feature: BTreeMap<usize, (u32, usize)> = BTreeMap::new();
        let mut cand = Vec::new();
        for &mi in local {
            let mp = self.map.get(mi);
            let Some(px) = self.k.project(&pose.transform(&mp.position)) else {
                continue;
            };
            if !self.k.in_bounds(&px) {
                continue;
            }
            grid.query(&px, radius, &mut cand);
            let mut best = (u32::MAX, usize::MAX);
            let mut second = u32::MAX;
            for &fi in &cand {
                if feats[fi].px.distance(&px) > radius {
                    continue;
                }
                let d = hamming(&mp.descriptor, &feats[fi].descriptor);
                if d < best.0 || (d == best.0 && fi < best.1) {
                    second = best.0;
                    best = (d, fi);
                } else if d < second {
                    second = d;
                }
            }
            if best.0 > max_d || (second != u32::MAX && best.0 as f64 > ratio * second as f64) {
                continue;
            }
            let e = best_for_feature.entry(best.1).or_insert((best.0, mi));
            if best.0 < e.0 || (best.0 == e.0 && mi < e.1) {
                *e = (best.0, mi);
            }
        }
        best_for_feature.into_iter().map(|(fi, (_, mi))| (fi, mi)).collect()
    }

    fn global_matches(&self, local: &[usize], feats: &[FeaturePoint], allowed: &[bool]) -> Vec<(usize, usize)> {
        let fidx: Vec<usize> = (0..feats.len()).filter(|&i| allowed[i]).collect();
        let fd: Vec<Descriptor> = fidx.iter().map(|&i| feats[i].descriptor).collect();
        let md: Vec<Descriptor> = local.iter().map(|&i| self.map.get(i).descriptor).collect();
        let mut out: Vec<(usize, usize)> = match_descriptors(
            &fd,
            &md,
            self.cfg.feature.match_threshold,
            self.cfg.feature.match_ratio,
        )
        .into_iter()
        .map(|m| (fidx[m.a], local[m.b]))
        .collect();
        out.sort_unstable();
        out
    }

    fn lost(&mut self, frame: &Frame, predicted: Pose) -> EgoResult {
        debug!("frame {}: tracking lost", frame.index);
        self.need_init = true;
        self.last_pose = Some(predicted);
        EgoResult {
            frame_index: frame.index,
            timestamp: frame.timestamp,
            pose: predicted,
            inlier_matches: Vec::new(),
            nonprior_dynamic_ids: BTreeSet::new(),
            tracked_feature_count: 0,
            lost: true,
            keyframe: false,
        }
    }

    /// Estimates the pose of `frame`. Frame 0 is the world origin.
    pub fn track(&mut self, frame: &Frame) -> EgoResult {
        let feats = self.features(frame);
        let predicted = match self.last_pose {
            Some(p) => self.velocity.compose(&p),
            None => Pose::identity(),
        };
        if self.need_init {
            return self.initialize(frame, feats, predicted);
        }

        let prior_flags = self.active_flags(frame.index);
        let allowed: Vec<bool> = feats
            .iter()
            .map(|f| !self.excluded(&frame.mask, &prior_flags, f.label_code))
            .collect();
        let local = self.map.local(self.kf_ordinal, self.cfg.local_window);
        let min_inl = self.cfg.pnp.min_inliers;
        let mut matches = self.guided_matches(&local, &feats, &allowed, &predicted, self.cfg.search_radius);
        if matches.len() < 3 * min_inl {
            matches = self.guided_matches(&local, &feats, &allowed, &predicted, 4.0 * self.cfg.search_radius);
        }
        if matches.len() < 2 * min_inl {
            let global = self.global_matches(&local, &feats, &allowed);
            if global.len() > matches.len() {
                matches = global;
            }
        }
        let corr: Vec<Correspondence> = matches
            .iter()
            .map(|&(fi, mi)| Correspondence {
                world: self.map.get(mi).position,
                px: feats[fi].px,
                sigma: self.cfg.feature.scale_factor.powi(feats[fi].octave as i32),
            })
            .collect();
        let pnp_cfg = PnpConfig {
            seed: self.cfg.pnp.seed ^ (frame.index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..self.cfg.pnp.clone()
        };
        let Ok(est) = ransac_pnp(&corr, &self.k, &pnp_cfg, Some(&predicted)) else {
            return self.lost(frame, predicted);
        };
        let mut pose = est.pose;
        let mut inliers = est.inliers;

        let mut flags = BTreeSet::new();
        if self.mode == SystemMode::Full {
            if let Some(reference) = self.history.front() {
                let prev = DepthView {
                    depth: &reference.depth,
                    mask: &reference.mask,
                    pose: &reference.pose,
                };
                let curr = DepthView {
                    depth: &frame.depth,
                    mask: &frame.mask,
                    pose: &pose,
                };
                for code in identify_nonprior_dynamic(prev, curr, &self.k, &self.cfg.depth) {
                    self.sticky.insert(code, frame.index);
                }
            }
            flags = self.active_flags(frame.index);
            let on_flagged = |i: &usize| flags.contains(&feats[matches[*i].0].label_code);
            if inliers.iter().any(on_flagged) {
                let kept: Vec<usize> = (0..corr.len()).filter(|i| !on_flagged(i)).collect();
                let kept_inl: Vec<Correspondence> =
                    inliers.iter().filter(|i| !on_flagged(i)).map(|&i| corr[i]).collect();
                pose = refine_pose(&pose, &kept_inl, &self.k, self.cfg.pnp.refine_iters);
                inliers = kept
                    .into_iter()
                    .filter(|&i| {
                        self.k
                            .project(&pose.transform(&corr[i].world))
                            .is_some_and(|px| px.distance(&corr[i].px) < self.cfg.pnp.inlier_px)
                    })
                    .collect();
                if inliers.len() < min_inl {
                    return self.lost(frame, predicted);
                }
            }
        }

        let inlier_matches: Vec<InlierMatch> = inliers
            .iter()
            .map(|&i| InlierMatch {
                feature: matches[i].0,
                map_point: self.map.get(matches[i].1).id,
                world: corr[i].world,
                px: corr[i].px,
            })
            .collect();
        let tracked = inlier_matches.len();

        let rel = pose.compose(&self.last_kf_pose.inverse());
        let is_kf = (tracked as f64) < self.cfg.kf_track_ratio * self.ref_tracked as f64
            || rel.translation.norm() > self.cfg.kf_translation
            || rel.rotation_angle().to_degrees() > self.cfg.kf_rotation_deg;
        if is_kf {
            let mut matched = vec![None; feats.len()];
            for &i in &inliers {
                matched[matches[i].0] = Some(matches[i].1);
            }
            self.ref_tracked = self.add_keyframe(frame, &pose, &feats, &matched, &flags);
        } else {
            for &i in &inliers {
                self.map.touch(matches[i].1, frame.index);
            }
        }

        if let Some(last) = self.last_pose {
            self.velocity = pose.compose(&last.inverse());
        }
        self.last_pose = Some(pose);
        self.remember(frame, pose);
        EgoResult {
            frame_index: frame.index,
            timestamp: frame.timestamp,
            pose,
            inlier_matches,
            nonprior_dynamic_ids: flags,
            tracked_feature_count: tracked,
            lost: false,
            keyframe: is_kf,
        }
    }
}
