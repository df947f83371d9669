//! TUM trajectory text files: `timestamp tx ty tz qx qy qz qw`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Timestamped camera-to-world poses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub entries: Vec<(f64, Pose)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, pose: Pose) {
        self.entries.push((t, pose));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Sorts by timestamp.
    pub fn sorted(mut self) -> Self {
        self.entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }

    /// Left-multiplies every pose by `g`.
    pub fn transformed(&self, g: &Pose) -> Self {
        Self {
            entries: self.entries.iter().map(|(t, p)| (*t, g.compose(p))).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, p) in &self.entries {
            let (tr, q) = p.to_quaternion();
            let _ = writeln!(
                s,
                "{:.6} {} {} {} {} {} {} {}",
                t,
                fmt_num(tr[0]),
                fmt_num(tr[1]),
                fmt_num(tr[2]),
                fmt_num(q[0]),
                fmt_num(q[1]),
                fmt_num(q[2]),
                fmt_num(q[3])
            );
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut traj = Trajectory::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 8 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 8 fields, found {}", fields.len()),
                ));
            }
            let mut v = [0.0f64; 8];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad number `{f}`")))?;
            }
            let pose = Pose::from_quaternion([v[1], v[2], v[3]], [v[4], v[5], v[6], v[7]])
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            traj.push(v[0], pose);
        }
        Ok(traj)
    }
}

/// Shortest round-trip decimal, with negative zero printed as `0`.
pub(crate) fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, traj.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Trajectory::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_line_format() {
        let mut t = Trajectory::new();
        t.push(0.0, Pose::identity());
        assert_eq!(t.to_text(), "0.000000 0 0 0 0 0 0 1\n");
    }

    #[test]
    fn random_trajectory_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = Trajectory::new();
        for i in 0..100 {
            let w = Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let tr = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            t.push(i as f64 / 30.0, Pose::from_axis_angle(&w, tr));
        }
        let back = Trajectory::parse(&t.to_text(), Path::new("t")).unwrap();
        assert_eq!(back.len(), 100);
        for ((ta, pa), (tb, pb)) in t.entries.iter().zip(&back.entries) {
            assert!((ta - tb).abs() < 1e-6);
            assert!((pa.rotation - pb.rotation).abs().max() < 1e-6);
            assert!((pa.translation - pb.translation).abs().max() < 1e-6);
        }
    }

    #[test]
    fn six_field_line_reports_line_number() {
        let text = "# header\n0.0 0 0 0 0 0 0 1\n0.1 0 0 0 0 1\n";
        match Trajectory::parse(text, Path::new("t.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
