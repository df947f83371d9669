//! Sparse point tracking: pyramidal inverse-compositional patch alignment,
//! or bilinear lookup into a supplied dense flow field.

use crate::geometry::Pixel;
use crate::image::{FloatImage, FlowField, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub levels: usize,
    /// Patch side in pixels (odd).
    pub patch: usize,
    pub max_iters: usize,
    /// Stop when the update is below this many pixels.
    pub epsilon: f64,
    /// Mean absolute intensity residual above which a point is lost.
    pub max_residual: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            patch: 11,
            max_iters: 20,
            epsilon: 0.01,
            max_residual: 12.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.levels == 0 || self.patch < 3 || self.patch.is_multiple_of(2) || self.max_iters == 0 || !(self.epsilon > 0.0) {
            return Err(crate::Error::Config(format!("invalid flow config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Tracked,
    /// Left the image.
    OutOfBounds,
    /// Patch residual above threshold or degenerate texture.
    Failed,
}

#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<FloatImage>,
}

impl Pyramid {
    pub fn new(gray: &GrayImage, levels: usize) -> Self {
        let mut v = vec![FloatImage::from_gray(gray)];
        while v.len() < levels {
            let next = v.last().expect("nonempty").pyr_down();
            v.push(next);
        }
        Self { levels: v }
    }
}

fn inside(img: &FloatImage, x: f64, y: f64, margin: f64) -> bool {
    x >= margin && y >= margin && x <= (img.width - 1) as f64 - margin && y <= (img.height - 1) as f64 - margin
}

/// Tracks one point from `prev` to `curr` starting from displacement
/// `guess` (level-0 pixels).
pub fn track_point(prev: &Pyramid, curr: &Pyramid, p: Pixel, guess: [f64; 2], cfg: &FlowConfig) -> (Pixel, FlowStatus) {
    let r = (cfg.patch / 2) as isize;
    let n_levels = prev.levels.len().min(curr.levels.len());
    let top = n_levels - 1;
    let mut d = [guess[0] / (1 << top) as f64, guess[1] / (1 << top) as f64];
    let side = cfg.patch;
    let mut tpl = vec![0f32; side * side];
    let mut gx = vec![0f32; side * side];
    let mut gy = vec![0f32; side * side];
    let mut last_residual = 0.0;
    for level in (0..n_levels).rev() {
        let scale = (1 << level) as f64;
        let (a, b) = (&prev.levels[level], &curr.levels[level]);
        // pyr_down keeps even pixels, so level-l pixel i sits at 2^l i.
        let px = p.u / scale;
        let py = p.v / scale;
        if !inside(a, px, py, r as f64 + 1.0) {
            if level == 0 {
                return (p, FlowStatus::OutOfBounds);
            }
            d = [d[0] * 2.0, d[1] * 2.0];
            continue;
        }
        let (mut h00, mut h01, mut h11) = (0.0f64, 0.0f64, 0.0f64);
        for j in -r..=r {
            for i in -r..=r {
                let idx = ((j + r) as usize) * side + (i + r) as usize;
                let (x, y) = ((px + i as f64) as f32, (py + j as f64) as f32);
                tpl[idx] = a.bilinear(x, y);
                gx[idx] = 0.5 * (a.bilinear(x + 1.0, y) - a.bilinear(x - 1.0, y));
                gy[idx] = 0.5 * (a.bilinear(x, y + 1.0) - a.bilinear(x, y - 1.0));
                h00 += (gx[idx] * gx[idx]) as f64;
                h01 += (gx[idx] * gy[idx]) as f64;
                h11 += (gy[idx] * gy[idx]) as f64;
            }
        }
        let det = h00 * h11 - h01 * h01;
        if det < 1e-6 * (h00 + h11).powi(2).max(1e-12) || h00 + h11 < 1e-9 {
            return (p, FlowStatus::Failed);
        }
        for _ in 0..cfg.max_iters {
            let (qx, qy) = (px + d[0], py + d[1]);
            if !inside(b, qx, qy, r as f64 + 1.0) {
                if level == 0 {
                    return (Pixel::new(p.u + d[0], p.v + d[1]), FlowStatus::OutOfBounds);
                }
                break;
            }
            let (mut b0, mut b1, mut abs) = (0.0f64, 0.0f64, 0.0f64);
            for j in -r..=r {
                for i in -r..=r {
                    let idx = ((j + r) as usize) * side + (i + r) as usize;
                    let e = b.bilinear((qx + i as f64) as f32, (qy + j as f64) as f32) - tpl[idx];
                    b0 += (gx[idx] * e) as f64;
                    b1 += (gy[idx] * e) as f64;
                    abs += e.abs() as f64;
                }
            }
            last_residual = abs / (side * side) as f64;
            let du = (h11 * b0 - h01 * b1) / det;
            let dv = (h00 * b1 - h01 * b0) / det;
            d = [d[0] - du, d[1] - dv];
            if du.abs() < cfg.epsilon && dv.abs() < cfg.epsilon {
                break;
            }
        }
        if level > 0 {
            d = [d[0] * 2.0, d[1] * 2.0];
        }
    }
    let out = Pixel::new(p.u + d[0], p.v + d[1]);
    let a0 = &curr.levels[0];
    if !inside(a0, out.u, out.v, 0.0) {
        return (out, FlowStatus::OutOfBounds);
    }
    if last_residual > cfg.max_residual {
        return (out, FlowStatus::Failed);
    }
    (out, FlowStatus::Tracked)
}

/// Bilinear flow at `p`, `None` outside the field.
pub fn flow_at(flow: &FlowField, p: Pixel) -> Option<[f64; 2]> {
    if !(p.u >= 0.0 && p.v >= 0.0 && p.u <= (flow.width - 1) as f64 && p.v <= (flow.height - 1) as f64) {
        return None;
    }
    let x0 = p.u.floor() as usize;
    let y0 = p.v.floor() as usize;
    let x1 = (x0 + 1).min(flow.width - 1);
    let y1 = (y0 + 1).min(flow.height - 1);
    let (ax, ay) = (p.u - x0 as f64, p.v - y0 as f64);
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        let g = |x: usize, y: usize| flow.get(x, y)[c] as f64;
        let top = g(x0, y0) * (1.0 - ax) + g(x1, y0) * ax;
        let bot = g(x0, y1) * (1.0 - ax) + g(x1, y1) * ax;
        *o = top * (1.0 - ay) + bot * ay;
    }
    Some(out)
}

/// Tracks `points` into the current frame. With `dense`, displacement is a
/// bilinear lookup; otherwise patch alignment from the per-point `guesses`.
pub fn track_points(
    prev: &Pyramid,
    curr: &Pyramid,
    points: &[Pixel],
    guesses: &[[f64; 2]],
    dense: Option<&FlowField>,
    cfg: &FlowConfig,
) -> Vec<(Pixel, FlowStatus)> {
    let (w, h) = (curr.levels[0].width, curr.levels[0].height);
    points
        .iter()
        .zip(guesses)
        .map(|(&p, &g)| match dense {
            Some(f) => match flow_at(f, p) {
                Some([du, dv]) => {
                    let q = Pixel::new(p.u + du, p.v + dv);
                    let ok = q.u >= 0.0 && q.v >= 0.0 && q.u <= (w - 1) as f64 && q.v <= (h - 1) as f64;
                    (q, if ok { FlowStatus::Tracked } else { FlowStatus::OutOfBounds })
                }
                None => (p, FlowStatus::OutOfBounds),
            },
            None => track_point(prev, curr, p, g, cfg),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    /// Smooth multi-frequency texture sampled at `x - shift`.
    fn texture(w: usize, h: usize, shift: f64) -> GrayImage {
        let mut d = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let u = x as f64 - shift;
                let v = y as f64;
                let s = (u * 0.21).sin() * (v * 0.17).cos() + 0.5 * ((u + 2.0 * v) * 0.09).sin() + 0.3 * ((u - v) * 0.31).cos();
                d.push((128.0 + 60.0 * s).round() as u8);
            }
        }
        Image::from_vec(w, h, d)
    }

    fn grid(w: usize, h: usize) -> Vec<Pixel> {
        let mut v = Vec::new();
        for y in (20..h - 20).step_by(10) {
            for x in (20..w - 20).step_by(10) {
                v.push(Pixel::new(x as f64, y as f64));
            }
        }
        v
    }

    #[test]
    fn identical_images_give_zero_motion() {
        let img = texture(160, 120, 0.0);
        let p = Pyramid::new(&img, 3);
        let pts = grid(160, 120);
        let out = track_points(&p, &p, &pts, &vec![[0.0; 2]; pts.len()], None, &FlowConfig::default());
        for ((q, s), p0) in out.iter().zip(&pts) {
            assert_eq!(*s, FlowStatus::Tracked);
            assert!(q.distance(p0) < 1e-3);
        }
    }

    #[test]
    fn three_pixel_shift_is_recovered() {
        let a = texture(160, 120, 0.0);
        let b = texture(160, 120, 3.0);
        let (pa, pb) = (Pyramid::new(&a, 3), Pyramid::new(&b, 3));
        let pts = grid(160, 120);
        let out = track_points(&pa, &pb, &pts, &vec![[0.0; 2]; pts.len()], None, &FlowConfig::default());
        let mut tracked = 0;
        for ((q, s), p0) in out.iter().zip(&pts) {
            if *s == FlowStatus::Tracked {
                tracked += 1;
                assert!((q.u - p0.u - 3.0).abs() < 0.2 && (q.v - p0.v).abs() < 0.2, "{p0:?} -> {q:?}");
            }
        }
        assert!(tracked * 10 >= pts.len() * 9);
    }

    #[test]
    fn dense_lookup_is_exact() {
        let img = texture(64, 48, 0.0);
        let p = Pyramid::new(&img, 3);
        let flow = Image::filled(64, 48, [3.0f32, 0.0]);
        let pts = vec![Pixel::new(10.0, 10.0), Pixel::new(20.5, 30.25)];
        let out = track_points(&p, &p, &pts, &[[0.0; 2]; 2], Some(&flow), &FlowConfig::default());
        for ((q, s), p0) in out.iter().zip(&pts) {
            assert_eq!(*s, FlowStatus::Tracked);
            assert_eq!((q.u - p0.u, q.v - p0.v), (3.0, 0.0));
        }
        let edge = track_points(&p, &p, &[Pixel::new(62.0, 5.0)], &[[0.0; 2]], Some(&flow), &FlowConfig::default());
        assert_eq!(edge[0].1, FlowStatus::OutOfBounds);
    }

    #[test]
    fn flat_patch_fails() {
        let img = Image::filled(64, 48, 100u8);
        let p = Pyramid::new(&img, 3);
        let out = track_point(&p, &p, Pixel::new(30.0, 20.0), [0.0; 2], &FlowConfig::default());
        assert_eq!(out.1, FlowStatus::Failed);
    }
}
