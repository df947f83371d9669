//! FAST-9 segment test on the 16-pixel Bresenham circle of radius 3.

use crate::image::GrayImage;

pub const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC: usize = 9;

/// Corner score at `(x, y)`, or `None` if the segment test fails.
///
/// The score is the sum of absolute center differences over the longest
/// contiguous arc of pixels that are all brighter (or all darker) than the
/// center by more than `threshold`. Caller keeps `(x, y)` at least 3 px from
/// the border.
pub fn corner_score(img: &GrayImage, x: usize, y: usize, threshold: u8) -> Option<u32> {
    let w = img.width as isize;
    let base = (y as isize * w + x as isize) as usize;
    let c = img.data[base] as i32;
    let t = threshold as i32;
    let at = |k: usize| -> i32 {
        let (dx, dy) = CIRCLE[k];
        img.data[(base as isize + dy * w + dx) as usize] as i32
    };

    // Any 9-arc covers at least two of the four compass pixels.
    let compass = [at(0), at(4), at(8), at(12)];
    let bright = compass.iter().filter(|&&p| p > c + t).count();
    let dark = compass.iter().filter(|&&p| p < c - t).count();
    if bright < 2 && dark < 2 {
        return None;
    }

    let mut diffs = [0i32; 16];
    for (k, d) in diffs.iter_mut().enumerate() {
        *d = at(k) - c;
    }
    let mut best: Option<u32> = None;
    for sign in [1i32, -1] {
        let pass = |k: usize| sign * diffs[k % 16] > t;
        if (0..16).all(pass) {
            let s: i32 = diffs.iter().map(|d| d.abs()).sum();
            return Some(s as u32);
        }
        // Start scanning right after a failing pixel so wrap-around arcs are
        // seen whole.
        let Some(start) = (0..16).find(|&k| !pass(k)) else {
            continue;
        };
        let mut run = 0usize;
        let mut sum = 0i32;
        for off in 1..=16 {
            let k = (start + off) % 16;
            if pass(k) {
                run += 1;
                sum += diffs[k].abs();
            } else {
                if run >= ARC {
                    best = Some(best.map_or(sum as u32, |b| b.max(sum as u32)));
                }
                run = 0;
                sum = 0;
            }
        }
        if run >= ARC {
            best = Some(best.map_or(sum as u32, |b| b.max(sum as u32)));
        }
    }
    best
}

/// Corners inside `[border, dim - border)` after 3x3 non-maximum
/// suppression, as `(x, y, score)` in raster order.
pub fn detect_corners(img: &GrayImage, threshold: u8, border: usize) -> Vec<(usize, usize, u32)> {
    let (w, h) = (img.width, img.height);
    let border = border.max(3);
    if w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let mut scores = vec![0u32; w * h];
    for y in border..h - border {
        for x in border..w - border {
            if let Some(s) = corner_score(img, x, y, threshold) {
                scores[y * w + x] = s;
            }
        }
    }
    let mut out = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let s = scores[y * w + x];
            if s == 0 {
                continue;
            }
            let mut keep = true;
            'nms: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = scores[((y as isize + dy) as usize) * w + (x as isize + dx) as usize];
                    // Ties go to the earlier pixel in raster order.
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (n == s && earlier) {
                        keep = false;
                        break 'nms;
                    }
                }
            }
            if keep {
                out.push((x, y, s));
            }
        }
    }
    out
}

/// Sub-pixel corner location near `(x, y)`: the point that every nearby
/// intensity gradient is orthogonal to, found by iterated least squares over
/// a `(2 * half + 1)`-square window. Falls back to `(x, y)` when the system
/// is singular or the estimate wanders more than `half` pixels.
pub fn refine_corner(img: &GrayImage, x: usize, y: usize, half: usize) -> (f64, f64) {
    let (w, h) = (img.width as isize, img.height as isize);
    let r = half as isize;
    let at = |px: isize, py: isize| img.data[(py * w + px) as usize] as f64;
    let (x0, y0) = (x as f64, y as f64);
    let (mut qx, mut qy) = (x0, y0);
    for _ in 0..5 {
        let (cx, cy) = (qx.round() as isize, qy.round() as isize);
        if cx - r - 1 < 0 || cy - r - 1 < 0 || cx + r + 1 >= w || cy + r + 1 >= h {
            return (x0, y0);
        }
        let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for py in cy - r..=cy + r {
            for px in cx - r..=cx + r {
                let gx = (at(px + 1, py) - at(px - 1, py)) * 0.5;
                let gy = (at(px, py + 1) - at(px, py - 1)) * 0.5;
                let (fx, fy) = (px as f64, py as f64);
                let wt = (-((fx - qx).powi(2) + (fy - qy).powi(2)) / (half * half) as f64).exp();
                let (gx, gy) = (gx * wt.sqrt(), gy * wt.sqrt());
                a += gx * gx;
                b += gx * gy;
                c += gy * gy;
                bx += gx * gx * fx + gx * gy * fy;
                by += gx * gy * fx + gy * gy * fy;
            }
        }
        let det = a * c - b * b;
        if det.abs() < 1e-9 * (a + c).powi(2).max(1e-12) {
            return (x0, y0);
        }
        let nx = (c * bx - b * by) / det;
        let ny = (a * by - b * bx) / det;
        if (nx - x0).abs() > half as f64 || (ny - y0).abs() > half as f64 {
            return (x0, y0);
        }
        let moved = (nx - qx).abs() + (ny - qy).abs();
        qx = nx;
        qy = ny;
        if moved < 0.01 {
            break;
        }
    }
    (qx, qy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    /// Checker corner at `(cx, cy)` rendered with exact area coverage.
    fn checker(cx: f64, cy: f64) -> GrayImage {
        let (w, h) = (32, 32);
        let mut data = vec![0u8; w * h];
        let n = 16;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for sy in 0..n {
                    for sx in 0..n {
                        let u = x as f64 - 0.5 + (sx as f64 + 0.5) / n as f64;
                        let v = y as f64 - 0.5 + (sy as f64 + 0.5) / n as f64;
                        acc += if (u < cx) == (v < cy) { 200.0 } else { 40.0 };
                    }
                }
                data[y * w + x] = (acc / (n * n) as f64).round() as u8;
            }
        }
        Image::from_vec(w, h, data)
    }

    #[test]
    fn refinement_finds_subpixel_checker_corner() {
        for &(cx, cy) in &[(15.3, 16.1), (16.45, 15.75), (15.0, 15.0), (16.2, 15.6)] {
            let img = checker(cx, cy);
            let (qx, qy) = refine_corner(&img, cx.round() as usize, cy.round() as usize, 2);
            assert!((qx - cx).abs() < 0.1 && (qy - cy).abs() < 0.1, "({qx}, {qy}) vs ({cx}, {cy})");
        }
    }

    #[test]
    fn refinement_keeps_input_on_flat_patch() {
        let img = Image::from_vec(16, 16, vec![90u8; 256]);
        assert_eq!(refine_corner(&img, 8, 8, 2), (8.0, 8.0));
    }

    #[test]
    fn flat_image_has_no_corners() {
        let img = Image::filled(40, 40, 128u8);
        assert!(detect_corners(&img, 20, 3).is_empty());
    }

    #[test]
    fn isolated_bright_pixel_is_not_a_corner_but_square_corner_is() {
        let mut img = Image::filled(40, 40, 0u8);
        for y in 10..30 {
            for x in 10..30 {
                img.set(x, y, 255);
            }
        }
        // The corner pixel sees 11-12 dark circle pixels.
        assert!(corner_score(&img, 10, 10, 20).is_some());
        // Edge midpoints only see a half circle (7 pixels).
        assert!(corner_score(&img, 20, 10, 20).is_none());
        assert!(corner_score(&img, 20, 20, 20).is_none());
    }
}
