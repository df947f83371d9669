//! Oriented binary descriptors: intensity-centroid orientation and rotated
//! pairwise comparisons on a smoothed patch.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::GrayImage;

/// Radius used for the orientation moments.
pub const ORIENTATION_RADIUS: isize = 15;
/// Pattern coordinates lie in `[-PATTERN_EXTENT, PATTERN_EXTENT]`.
pub const PATTERN_EXTENT: i32 = 13;
/// Minimum distance from the image border for a describable keypoint.
pub const EDGE_BORDER: usize = 19;

const PATTERN_SEED: u64 = 42;

/// 256-bit binary descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        hamming(self, other)
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn not(&self) -> Descriptor {
        Descriptor(self.0.map(|w| !w))
    }
}

pub fn hamming(a: &Descriptor, b: &Descriptor) -> u32 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// The frozen 256 point-pair sampling pattern, drawn once from an isotropic
/// Gaussian (sigma = 31/5 px) with a fixed seed and clipped to the patch.
pub fn pattern() -> &'static [[(i32, i32); 2]; 256] {
    static PATTERN: OnceLock<[[(i32, i32); 2]; 256]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let normal = Normal::new(0.0f64, 31.0 / 5.0).expect("valid sigma");
        let draw = |rng: &mut ChaCha8Rng| -> (i32, i32) {
            let e = PATTERN_EXTENT as f64;
            let x = normal.sample(rng).round().clamp(-e, e) as i32;
            let y = normal.sample(rng).round().clamp(-e, e) as i32;
            (x, y)
        };
        let mut out = [[(0, 0); 2]; 256];
        for pair in out.iter_mut() {
            loop {
                let a = draw(&mut rng);
                let b = draw(&mut rng);
                if a != b {
                    *pair = [a, b];
                    break;
                }
            }
        }
        out
    })
}

fn half_widths() -> &'static [isize; ORIENTATION_RADIUS as usize + 1] {
    static UMAX: OnceLock<[isize; ORIENTATION_RADIUS as usize + 1]> = OnceLock::new();
    UMAX.get_or_init(|| {
        let r = ORIENTATION_RADIUS;
        let mut u = [0isize; ORIENTATION_RADIUS as usize + 1];
        for (v, slot) in u.iter_mut().enumerate() {
            let v = v as isize;
            *slot = (((r * r - v * v) as f64).sqrt() + 0.5).floor() as isize;
        }
        u
    })
}

/// Intensity-centroid angle (radians) over a disc of radius 15 around
/// `(x, y)`. The disc is symmetric under 90 degree rotations.
pub fn orientation(img: &GrayImage, x: usize, y: usize) -> f64 {
    let umax = half_widths();
    let w = img.width as isize;
    let (cx, cy) = (x as isize, y as isize);
    let mut m01 = 0i64;
    let mut m10 = 0i64;
    for dv in -ORIENTATION_RADIUS..=ORIENTATION_RADIUS {
        let half = umax[dv.unsigned_abs()];
        let row = (cy + dv) * w;
        for du in -half..=half {
            let p = img.data[(row + cx + du) as usize] as i64;
            m10 += du as i64 * p;
            m01 += dv as i64 * p;
        }
    }
    (m01 as f64).atan2(m10 as f64)
}

/// Descriptor of the smoothed image at `(x, y)` with the pattern rotated by
/// `angle`. Caller keeps `(x, y)` at least [`EDGE_BORDER`] from the border.
pub fn describe(smoothed: &GrayImage, x: usize, y: usize, angle: f64) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let w = smoothed.width as isize;
    let (cx, cy) = (x as isize, y as isize);
    let sample = |(px, py): (i32, i32)| -> u8 {
        let rx = (px as f64 * c - py as f64 * s).round() as isize;
        let ry = (px as f64 * s + py as f64 * c).round() as isize;
        smoothed.data[((cy + ry) * w + cx + rx) as usize]
    };
    let mut d = Descriptor::default();
    for (i, [a, b]) in pattern().iter().enumerate() {
        if sample(*a) < sample(*b) {
            d.set_bit(i);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{gaussian_blur, Image};
    use rand::Rng;

    fn bit_loop_hamming(a: &Descriptor, b: &Descriptor) -> u32 {
        (0..256).filter(|&i| a.bit(i) != b.bit(i)).count() as u32
    }

    #[test]
    fn hamming_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Descriptor([rng.random(), rng.random(), rng.random(), rng.random()]);
        assert_eq!(hamming(&d, &d), 0);
        assert_eq!(hamming(&d, &d.not()), 256);
        for _ in 0..500 {
            let a = Descriptor([rng.random(), rng.random(), rng.random(), rng.random()]);
            let b = Descriptor([rng.random(), rng.random(), rng.random(), rng.random()]);
            assert_eq!(hamming(&a, &b), bit_loop_hamming(&a, &b));
        }
    }

    #[test]
    fn pattern_is_frozen_and_in_range() {
        let p1 = pattern();
        let p2 = pattern();
        assert!(std::ptr::eq(p1, p2));
        for [a, b] in p1.iter() {
            assert_ne!(a, b);
            for v in [a.0, a.1, b.0, b.1] {
                assert!(v.abs() <= PATTERN_EXTENT);
            }
        }
    }

    fn rotate90(img: &GrayImage) -> GrayImage {
        // (x, y) -> (h - 1 - y, x): a +90 degree rotation in image axes.
        let (w, h) = (img.width, img.height);
        let mut out = Image::filled(h, w, 0u8);
        for y in 0..h {
            for x in 0..w {
                out.set(h - 1 - y, x, img.get(x, y));
            }
        }
        out
    }

    #[test]
    fn descriptors_survive_ninety_degree_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100;
        let mut good = 0;
        for _ in 0..trials {
            // Blocky random texture, similar to rendered surfaces.
            let n = 65;
            let cell = rng.random_range(3..8);
            let cols = n / cell + 1;
            let vals: Vec<u8> = (0..cols * cols).map(|_| rng.random()).collect();
            let mut img = Image::filled(n, n, 0u8);
            for y in 0..n {
                for x in 0..n {
                    img.set(x, y, vals[(y / cell) * cols + x / cell]);
                }
            }
            let rot = rotate90(&img);
            let c = n / 2;
            let a0 = orientation(&img, c, c);
            let a1 = orientation(&rot, n - 1 - c, c);
            let d0 = describe(&gaussian_blur(&img, 2.0, 3), c, c, a0);
            let d1 = describe(&gaussian_blur(&rot, 2.0, 3), n - 1 - c, c, a1);
            if hamming(&d0, &d1) < 80 {
                good += 1;
            }
        }
        assert!(good * 10 >= trials * 9, "only {good}/{trials} rotated patches matched");
    }
}
