//! TUM-layout RGB-D sequence directories.
//!
//! A sequence directory holds `rgb.txt` and `depth.txt` index files (lines
//! `timestamp filename`, `#` comments), the images they reference, and
//! optionally `masks.txt` + `classes.txt`, `flow.txt` and `keypoints.txt`.
//! The mask, flow and keypoint indices may live in separate directories.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;

use super::assoc::associate;
use super::flow::load_flow;
use super::images::{read_rgb, read_u16};
use super::keypoints::{load_keypoints, Keypoint};
use super::mask::{load_mask, ClassRegistry, PanopticMask};
use crate::error::{Error, Result};
use crate::image::{rgb_to_gray, DepthImage, FlowField, GrayImage, RgbImage};

/// One associated RGB-D frame with its side inputs.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Position in the loaded sequence.
    pub index: usize,
    pub timestamp: f64,
    pub rgb: RgbImage,
    pub depth: DepthImage,
    pub mask: PanopticMask,
    /// Forward flow from the previous frame, sampled on the previous grid.
    pub flow: Option<FlowField>,
    pub keypoints: Option<Vec<Keypoint>>,
}

impl Frame {
    pub fn new(
        index: usize,
        timestamp: f64,
        rgb: RgbImage,
        depth: DepthImage,
        mask: PanopticMask,
    ) -> Result<Self> {
        if !rgb.same_size(&depth) || !rgb.same_size(&mask.labels) {
            return Err(Error::Format(format!(
                "frame {timestamp}: rgb {}x{}, depth {}x{}, mask {}x{} differ",
                rgb.width,
                rgb.height,
                depth.width,
                depth.height,
                mask.labels.width,
                mask.labels.height
            )));
        }
        Ok(Self {
            index,
            timestamp,
            rgb,
            depth,
            mask,
            flow: None,
            keypoints: None,
        })
    }

    pub fn gray(&self) -> GrayImage {
        rgb_to_gray(&self.rgb)
    }

    pub fn width(&self) -> usize {
        self.rgb.width
    }

    pub fn height(&self) -> usize {
        self.rgb.height
    }
}

#[derive(Debug, Clone)]
pub struct SequenceConfig {
    /// Maximum timestamp difference for association, seconds.
    pub assoc_tolerance: f64,
    /// Directory with `masks.txt` and `classes.txt`; defaults to the sequence.
    pub masks_dir: Option<PathBuf>,
    pub flow_dir: Option<PathBuf>,
    pub keypoints_dir: Option<PathBuf>,
    /// Skip frames without a mask partner instead of using an empty mask.
    pub require_masks: bool,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            assoc_tolerance: 0.02,
            masks_dir: None,
            flow_dir: None,
            keypoints_dir: None,
            require_masks: true,
        }
    }
}

/// Parses an index file of `timestamp filename` lines.
pub fn read_index(path: &Path) -> Result<Vec<(f64, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_index(&text, path)
}

pub fn parse_index(text: &str, path: &Path) -> Result<Vec<(f64, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(ts), Some(name)) = (it.next(), it.next()) else {
            return Err(Error::parse(path, i + 1, "expected `timestamp filename`"));
        };
        let t: f64 = ts
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad timestamp `{ts}`")))?;
        out.push((t, name.to_string()));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[derive(Debug, Clone)]
struct FrameEntry {
    timestamp: f64,
    rgb: PathBuf,
    depth: PathBuf,
    mask: Option<PathBuf>,
    flow: Option<PathBuf>,
    keypoints: Option<PathBuf>,
}

/// An associated sequence whose frames are decoded on iteration.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub root: PathBuf,
    pub registry: Arc<ClassRegistry>,
    entries: Vec<FrameEntry>,
    /// Frames dropped during association (no depth or mask partner).
    pub skipped_unassociated: usize,
}

fn optional_index(dir: &Path, name: &str) -> Result<Option<Vec<(f64, String)>>> {
    let p = dir.join(name);
    if p.exists() {
        read_index(&p).map(Some)
    } else {
        Ok(None)
    }
}

/// Pairs each rgb timestamp with a side-input entry, if one is close enough.
fn side_lookup(
    rgb_ts: &[f64],
    index: &Option<Vec<(f64, String)>>,
    dir: &Path,
    tol: f64,
) -> Vec<Option<PathBuf>> {
    let mut out = vec![None; rgb_ts.len()];
    if let Some(idx) = index {
        let ts: Vec<f64> = idx.iter().map(|e| e.0).collect();
        for (i, j) in associate(rgb_ts, &ts, tol) {
            out[i] = Some(dir.join(&idx[j].1));
        }
    }
    out
}

/// Opens a TUM-layout sequence. Missing `rgb.txt`/`depth.txt` is fatal;
/// frames without partners are counted and skipped.
pub fn load_sequence(dir: &Path, cfg: &SequenceConfig) -> Result<Sequence> {
    let rgb = read_index(&dir.join("rgb.txt"))?;
    let depth = read_index(&dir.join("depth.txt"))?;
    let masks_dir = cfg.masks_dir.clone().unwrap_or_else(|| dir.to_path_buf());
    let flow_dir = cfg.flow_dir.clone().unwrap_or_else(|| dir.to_path_buf());
    let kp_dir = cfg.keypoints_dir.clone().unwrap_or_else(|| dir.to_path_buf());

    let registry_path = masks_dir.join("classes.txt");
    let registry = if registry_path.exists() {
        ClassRegistry::load(&registry_path)?
    } else {
        ClassRegistry::new()
    };
    let mask_index = optional_index(&masks_dir, "masks.txt")?;
    let flow_index = optional_index(&flow_dir, "flow.txt")?;
    let kp_index = optional_index(&kp_dir, "keypoints.txt")?;

    let rgb_ts: Vec<f64> = rgb.iter().map(|e| e.0).collect();
    let depth_ts: Vec<f64> = depth.iter().map(|e| e.0).collect();
    let pairs = associate(&rgb_ts, &depth_ts, cfg.assoc_tolerance);

    let tol = cfg.assoc_tolerance;
    let masks = side_lookup(&rgb_ts, &mask_index, &masks_dir, tol);
    let flows = side_lookup(&rgb_ts, &flow_index, &flow_dir, tol);
    let kps = side_lookup(&rgb_ts, &kp_index, &kp_dir, tol);

    let mut entries = Vec::with_capacity(pairs.len());
    let mut skipped = rgb.len() - pairs.len();
    for (i, j) in pairs {
        if mask_index.is_some() && cfg.require_masks && masks[i].is_none() {
            skipped += 1;
            continue;
        }
        entries.push(FrameEntry {
            timestamp: rgb[i].0,
            rgb: dir.join(&rgb[i].1),
            depth: dir.join(&depth[j].1),
            mask: masks[i].clone(),
            flow: flows[i].clone(),
            keypoints: kps[i].clone(),
        });
    }
    if skipped > 0 {
        warn!("{}: {skipped} frames without partners skipped", dir.display());
    }
    Ok(Sequence {
        root: dir.to_path_buf(),
        registry: Arc::new(registry),
        entries,
        skipped_unassociated: skipped,
    })
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.timestamp).collect()
    }

    /// Decodes the `i`-th associated frame.
    pub fn load_frame(&self, i: usize) -> Result<Frame> {
        let e = &self.entries[i];
        let rgb = read_rgb(&e.rgb)?;
        let depth = read_u16(&e.depth)?;
        let mask = match &e.mask {
            Some(p) => load_mask(p, self.registry.clone())?,
            None => PanopticMask::empty(rgb.width, rgb.height, self.registry.clone()),
        };
        let mut frame = Frame::new(i, e.timestamp, rgb, depth, mask)?;
        if let Some(p) = &e.flow {
            let flow = load_flow(p)?;
            if !flow.same_size(&frame.rgb) {
                return Err(Error::Format(format!("{}: flow size mismatch", p.display())));
            }
            frame.flow = Some(flow);
        }
        if let Some(p) = &e.keypoints {
            frame.keypoints = Some(load_keypoints(p)?);
        }
        Ok(frame)
    }

    /// Iterates frames in timestamp order. Frames that fail to decode are
    /// skipped and counted in [`FrameIter::skipped`].
    pub fn frames(&self) -> FrameIter<'_> {
        FrameIter {
            seq: self,
            next: 0,
            skipped: 0,
        }
    }
}

pub struct FrameIter<'a> {
    seq: &'a Sequence,
    next: usize,
    pub skipped: usize,
}

impl Iterator for FrameIter<'_> {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        while self.next < self.seq.len() {
            let i = self.next;
            self.next += 1;
            match self.seq.load_frame(i) {
                Ok(f) => return Some(f),
                Err(e) => {
                    warn!("skipping frame {i}: {e}");
                    self.skipped += 1;
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_index_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_sequence(dir.path(), &SequenceConfig::default()).is_err());
    }

    #[test]
    fn empty_index_gives_empty_sequence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("rgb.txt"), "# empty\n").unwrap();
        std::fs::write(dir.path().join("depth.txt"), "").unwrap();
        let seq = load_sequence(dir.path(), &SequenceConfig::default()).unwrap();
        assert!(seq.is_empty());
        assert_eq!(seq.frames().count(), 0);
    }

    #[test]
    fn offset_timestamps_do_not_associate() {
        let dir = tempfile::tempdir().unwrap();
        let rgb: String = (0..5).map(|i| format!("{} rgb/{i}.png\n", i as f64 + 0.5)).collect();
        let depth: String = (0..5).map(|i| format!("{} depth/{i}.png\n", i as f64)).collect();
        std::fs::write(dir.path().join("rgb.txt"), rgb).unwrap();
        std::fs::write(dir.path().join("depth.txt"), depth).unwrap();
        let seq = load_sequence(dir.path(), &SequenceConfig::default()).unwrap();
        assert_eq!(seq.len(), 0);
        assert_eq!(seq.skipped_unassociated, 5);
    }

    #[test]
    fn unreadable_images_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("rgb.txt"), "0.0 rgb/a.png\n").unwrap();
        std::fs::write(dir.path().join("depth.txt"), "0.0 depth/a.png\n").unwrap();
        let seq = load_sequence(dir.path(), &SequenceConfig::default()).unwrap();
        let mut it = seq.frames();
        assert!(it.next().is_none());
        assert_eq!(it.skipped, 1);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let reg = Arc::new(ClassRegistry::new());
        let r = Frame::new(
            0,
            0.0,
            RgbImage::filled(4, 4, [0; 3]),
            DepthImage::filled(4, 3, 0),
            PanopticMask::empty(4, 4, reg),
        );
        assert!(r.is_err());
    }
}
