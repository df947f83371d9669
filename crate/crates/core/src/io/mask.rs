//! Panoptic masks: `code = class_id * 1000 + instance_index`, `0` = unlabeled.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::LabelImage;

pub const CODE_BASE: u32 = 1000;

pub fn class_of(code: u32) -> u32 {
    code / CODE_BASE
}

pub fn instance_of(code: u32) -> u32 {
    code % CODE_BASE
}

pub fn make_code(class_id: u32, instance: u32) -> u32 {
    class_id * CODE_BASE + instance
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub prior_dynamic: bool,
}

/// `class_id -> (name, prior_dynamic)`, loaded from a `classes.txt` sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassRegistry {
    classes: BTreeMap<u32, ClassInfo>,
}

impl ClassRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, class_id: u32, name: impl Into<String>, prior_dynamic: bool) {
        self.classes.insert(
            class_id,
            ClassInfo {
                name: name.into(),
                prior_dynamic,
            },
        );
    }

    pub fn get(&self, class_id: u32) -> Option<&ClassInfo> {
        self.classes.get(&class_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &ClassInfo)> {
        self.classes.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_prior_dynamic_code(&self, code: u32) -> bool {
        code != 0
            && self
                .classes
                .get(&class_of(code))
                .is_some_and(|c| c.prior_dynamic)
    }

    pub fn name_of_code(&self, code: u32) -> &str {
        self.classes
            .get(&class_of(code))
            .map(|c| c.name.as_str())
            .unwrap_or("unknown")
    }

    /// Parses lines `class_id name prior_flag`; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut reg = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::parse(path, i + 1, "expected `class_id name prior_flag`"));
            }
            let id: u32 = f[0]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad class id `{}`", f[0])))?;
            if id == 0 || id > 65 {
                return Err(Error::parse(path, i + 1, "class id must be in 1..=65"));
            }
            let prior = match f[2] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(Error::parse(path, i + 1, format!("bad prior flag `{other}`")))
                }
            };
            reg.insert(id, f[1], prior);
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, c) in &self.classes {
            let _ = writeln!(s, "{} {} {}", id, c.name, u8::from(c.prior_dynamic));
        }
        s
    }
}

/// Per-pixel panoptic labels plus the registry that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticMask {
    pub labels: LabelImage,
    pub registry: Arc<ClassRegistry>,
}

/// Pixel statistics of one labeled region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceInfo {
    pub code: u32,
    pub pixel_count: usize,
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl PanopticMask {
    /// Validates every code against the registry.
    pub fn new(labels: LabelImage, registry: Arc<ClassRegistry>) -> Result<Self> {
        let mut last = u32::MAX;
        for &code in &labels.data {
            if code == 0 || code == last {
                continue;
            }
            last = code;
            if registry.get(class_of(code)).is_none() {
                return Err(Error::UnknownClass {
                    code,
                    class_id: class_of(code),
                });
            }
        }
        Ok(Self { labels, registry })
    }

    pub fn empty(width: usize, height: usize, registry: Arc<ClassRegistry>) -> Self {
        Self {
            labels: LabelImage::filled(width, height, 0),
            registry,
        }
    }

    #[inline]
    pub fn code_at(&self, x: usize, y: usize) -> u32 {
        self.labels.get(x, y)
    }

    pub fn is_prior_dynamic(&self, code: u32) -> bool {
        self.registry.is_prior_dynamic_code(code)
    }

    /// Labeled regions with a nonzero instance index, sorted by code.
    pub fn instances(&self) -> Vec<InstanceInfo> {
        let mut map: BTreeMap<u32, InstanceInfo> = BTreeMap::new();
        let w = self.labels.width;
        for (i, &code) in self.labels.data.iter().enumerate() {
            if code == 0 || instance_of(code) == 0 {
                continue;
            }
            let (x, y) = (i % w, i / w);
            map.entry(code)
                .and_modify(|e| {
                    e.pixel_count += 1;
                    e.min_x = e.min_x.min(x);
                    e.max_x = e.max_x.max(x);
                    e.min_y = e.min_y.min(y);
                    e.max_y = e.max_y.max(y);
                })
                .or_insert(InstanceInfo {
                    code,
                    pixel_count: 1,
                    min_x: x,
                    min_y: y,
                    max_x: x,
                    max_y: y,
                });
        }
        map.into_values().collect()
    }
}

pub fn load_mask(path: &Path, registry: Arc<ClassRegistry>) -> Result<PanopticMask> {
    let labels = super::images::read_u16(path)?.map(u32::from);
    PanopticMask::new(labels, registry)
}

pub fn write_mask(mask: &LabelImage, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(mask.data.len());
    for &c in &mask.data {
        let v = u16::try_from(c)
            .map_err(|_| Error::Format(format!("mask code {c} does not fit 16 bits")))?;
        data.push(v);
    }
    super::images::write_u16(&crate::image::Image::from_vec(mask.width, mask.height, data), path)
}
