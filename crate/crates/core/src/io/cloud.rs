//! ASCII colored point clouds: a count line, then `x y z r g b` per point.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub fn cloud_to_text(points: &[(Point3, [u8; 3])]) -> String {
    let mut s = String::with_capacity(points.len() * 40 + 16);
    let _ = writeln!(s, "{}", points.len());
    for (p, c) in points {
        let _ = writeln!(s, "{:.6} {:.6} {:.6} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    s
}

pub fn write_cloud(points: &[(Point3, [u8; 3])], path: &Path) -> Result<()> {
    std::fs::write(path, cloud_to_text(points)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<Vec<(Point3, [u8; 3])>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let count: usize = match lines.next() {
        Some((_, l)) => l
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, 1, "bad point count header"))?,
        None => return Err(Error::parse(path, 1, "missing point count header")),
    };
    let mut out = Vec::with_capacity(count);
    for (i, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 6 {
            return Err(Error::parse(path, i + 1, "expected `x y z r g b`"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad number `{s}`")))
        };
        let col = |s: &str| -> Result<u8> {
            s.parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad color `{s}`")))
        };
        out.push((
            Point3::new(num(f[0])?, num(f[1])?, num(f[2])?),
            [col(f[3])?, col(f[4])?, col(f[5])?],
        ));
    }
    if out.len() != count {
        return Err(Error::Format(format!(
            "cloud header says {count} points, found {}",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_is_header_only() {
        assert_eq!(cloud_to_text(&[]), "0\n");
    }

    #[test]
    fn known_points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        let pts = vec![
            (Point3::new(0.1, -0.2, 3.0), [1, 2, 3]),
            (Point3::new(1.0, 0.0, 0.5), [255, 0, 9]),
            (Point3::new(-4.25, 2.125, 7.0), [10, 20, 30]),
        ];
        write_cloud(&pts, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = read_cloud(&p).unwrap();
        for (a, b) in pts.iter().zip(&back) {
            assert!((a.0 - b.0).abs().max() < 1e-6);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn large_cloud_line_count() {
        let pts: Vec<_> = (0..100_000)
            .map(|i| (Point3::new(i as f64 * 1e-3, 0.0, 1.0), [0, 0, 0]))
            .collect();
        let text = cloud_to_text(&pts);
        assert_eq!(text.lines().count(), 100_001);
    }
}
