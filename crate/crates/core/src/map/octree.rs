//! Hit-only occupancy octree over a fused cloud.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const HIT_LOG_ODDS: f64 = 0.85;
pub const MIN_LOG_ODDS: f64 = -2.0;
pub const MAX_LOG_ODDS: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Inner(Box<[Option<Node>; 8]>),
    Leaf(f64),
}

impl Node {
    fn empty_inner() -> Self {
        Node::Inner(Box::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeMap {
    pub resolution: f64,
    /// Minimum corner of the root cube.
    pub origin: Point3,
    /// Levels below the root; the root cube has side `resolution * 2^depth`.
    pub depth: u32,
    /// Axis-aligned bounds of the inserted points.
    pub bounds: Option<(Point3, Point3)>,
    root: Option<Node>,
    leaves: usize,
}

fn clamp(l: f64) -> f64 {
    l.clamp(MIN_LOG_ODDS, MAX_LOG_ODDS)
}

impl OctreeMap {
    pub fn empty(resolution: f64) -> Self {
        Self {
            resolution,
            origin: Point3::zeros(),
            depth: 0,
            bounds: None,
            root: None,
            leaves: 0,
        }
    }

    /// Tree sized to the cloud's extent, then one hit per point.
    pub fn build(points: &[Point3], resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Config(format!("octree resolution must be positive, got {resolution}")));
        }
        if let Some(p) = points.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Format(format!("non-finite cloud point {p:?}")));
        }
        let mut map = Self::empty(resolution);
        let Some(first) = points.first() else {
            return Ok(map);
        };
        let (mut lo, mut hi) = (*first, *first);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max();
        map.depth = if extent <= resolution {
            0
        } else {
            (extent / resolution).log2().ceil() as u32
        };
        map.origin = lo;
        map.bounds = Some((lo, hi));
        for p in points {
            map.hit(p);
        }
        Ok(map)
    }

    fn side(&self) -> u64 {
        1u64 << self.depth
    }

    /// Leaf index of `p`, clamping the upper faces into the last leaf.
    fn index(&self, p: &Point3) -> Option<[u64; 3]> {
        let n = self.side();
        let mut out = [0u64; 3];
        for (a, o) in out.iter_mut().enumerate() {
            let f = ((p[a] - self.origin[a]) / self.resolution).floor();
            if f < 0.0 || f > n as f64 {
                return None;
            }
            *o = (f as u64).min(n - 1);
        }
        Some(out)
    }

    fn hit(&mut self, p: &Point3) {
        let Some(idx) = self.index(p) else { return };
        let depth = self.depth;
        let mut node = self.root.get_or_insert_with(|| if depth == 0 { Node::Leaf(0.0) } else { Node::empty_inner() });
        for level in (0..depth).rev() {
            let child = (((idx[0] >> level) & 1) | (((idx[1] >> level) & 1) << 1) | (((idx[2] >> level) & 1) << 2)) as usize;
            let Node::Inner(children) = node else { unreachable!("leaves only at the bottom") };
            node = children[child].get_or_insert_with(|| if level == 0 { Node::Leaf(0.0) } else { Node::empty_inner() });
        }
        if let Node::Leaf(l) = node {
            if *l == 0.0 {
                self.leaves += 1;
            }
            *l = clamp(*l + HIT_LOG_ODDS);
        }
    }

    /// Log-odds of the leaf containing `p`, `None` if never hit.
    pub fn log_odds_at(&self, p: &Point3) -> Option<f64> {
        let idx = self.index(p)?;
        let mut node = self.root.as_ref()?;
        for level in (0..self.depth).rev() {
            let child = (((idx[0] >> level) & 1) | (((idx[1] >> level) & 1) << 1) | (((idx[2] >> level) & 1) << 2)) as usize;
            let Node::Inner(children) = node else { return None };
            node = children[child].as_ref()?;
        }
        match node {
            Node::Leaf(l) => Some(*l),
            Node::Inner(_) => None,
        }
    }

    pub fn is_occupied(&self, p: &Point3) -> bool {
        self.log_odds_at(p).is_some_and(|l| l > 0.0)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Occupied leaves as (integer index, center, log-odds), in index order
    /// (z, then y, then x).
    pub fn occupied(&self) -> Vec<([u64; 3], Point3, f64)> {
        let mut out = Vec::with_capacity(self.leaves);
        if let Some(root) = &self.root {
            self.collect(root, [0; 3], self.depth, &mut out);
        }
        out.sort_by_key(|(i, _, _)| (i[2], i[1], i[0]));
        out
    }

    fn collect(&self, node: &Node, base: [u64; 3], level: u32, out: &mut Vec<([u64; 3], Point3, f64)>) {
        match node {
            Node::Leaf(l) => {
                if *l > 0.0 {
                    let c = Point3::new(
                        self.origin.x + (base[0] as f64 + 0.5) * self.resolution,
                        self.origin.y + (base[1] as f64 + 0.5) * self.resolution,
                        self.origin.z + (base[2] as f64 + 0.5) * self.resolution,
                    );
                    out.push((base, c, *l));
                }
            }
            Node::Inner(children) => {
                let half = 1u64 << (level - 1);
                for (i, c) in children.iter().enumerate() {
                    if let Some(c) = c {
                        let b = [
                            base[0] + (i as u64 & 1) * half,
                            base[1] + ((i as u64 >> 1) & 1) * half,
                            base[2] + ((i as u64 >> 2) & 1) * half,
                        ];
                        self.collect(c, b, level - 1, out);
                    }
                }
            }
        }
    }

    /// `resolution <r>` then `cx cy cz log_odds` per occupied leaf.
    pub fn to_text(&self) -> String {
        let mut s = format!("resolution {}\n", self.resolution);
        for (_, c, l) in self.occupied() {
            let _ = writeln!(s, "{:.6} {:.6} {:.6} {:.4}", c.x, c.y, c.z, l);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parsed octree text: resolution and occupied leaf centers with log-odds.
pub fn parse_octree_text(text: &str, path: &Path) -> Result<(f64, Vec<(Point3, f64)>)> {
    let bad = |line: usize, msg: &str| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty octree file"))?;
    let resolution: f64 = header
        .strip_prefix("resolution ")
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| bad(1, "expected `resolution <meters>`"))?;
    let mut leaves = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(i + 1, "non-numeric field"))?;
        if v.len() != 4 {
            return Err(bad(i + 1, "expected 4 fields"));
        }
        leaves.push((Point3::new(v[0], v[1], v[2]), v[3]));
    }
    Ok((resolution, leaves))
}
