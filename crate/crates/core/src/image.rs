//! Minimal row-major image containers and the few filters the pipeline needs.

/// Row-major image of `T` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

pub type GrayImage = Image<u8>;
pub type RgbImage = Image<[u8; 3]>;
pub type DepthImage = Image<u16>;
pub type LabelImage = Image<u32>;
pub type FloatImage = Image<f32>;
/// Dense per-pixel displacement `(du, dv)` in pixels.
pub type FlowField = Image<[f32; 2]>;

impl<T: Copy> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer size mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let w = self.width;
        self.data[y * w + x] = v;
    }

    pub fn same_size<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }
}

/// Luma from 8-bit RGB with integer BT.601 weights.
pub fn rgb_to_gray(rgb: &RgbImage) -> GrayImage {
    rgb.map(|[r, g, b]| ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8)
}

impl FloatImage {
    pub fn from_gray(g: &GrayImage) -> Self {
        g.map(|v| v as f32)
    }

    /// Bilinear sample; caller guarantees `(x, y)` is inside the image.
    #[inline]
    pub fn bilinear(&self, x: f32, y: f32) -> f32 {
        let x0 = (x.floor() as isize).clamp(0, self.width as isize - 1) as usize;
        let y0 = (y.floor() as isize).clamp(0, self.height as isize - 1) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = x - x0 as f32;
        let ay = y - y0 as f32;
        let w = self.width;
        let d = &self.data;
        let top = d[y0 * w + x0] * (1.0 - ax) + d[y0 * w + x1] * ax;
        let bot = d[y1 * w + x0] * (1.0 - ax) + d[y1 * w + x1] * ax;
        top * (1.0 - ay) + bot * ay
    }

    /// Downsample by two with a [1 2 1]/4 separable prefilter.
    pub fn pyr_down(&self) -> FloatImage {
        let w = self.width;
        let h = self.height;
        let nw = w.div_ceil(2).max(1);
        let nh = h.div_ceil(2).max(1);
        let at = |x: isize, y: isize| -> f32 {
            let x = x.clamp(0, w as isize - 1) as usize;
            let y = y.clamp(0, h as isize - 1) as usize;
            self.data[y * w + x]
        };
        let mut out = vec![0.0f32; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                let cx = 2 * x as isize;
                let cy = 2 * y as isize;
                let mut acc = 0.0;
                for (dy, wy) in [(-1, 1.0), (0, 2.0), (1, 1.0)] {
                    for (dx, wx) in [(-1, 1.0), (0, 2.0), (1, 1.0)] {
                        acc += wx * wy * at(cx + dx, cy + dy);
                    }
                }
                out[y * nw + x] = acc / 16.0;
            }
        }
        Image::from_vec(nw, nh, out)
    }
}

/// Bilinear resize of an 8-bit image to `(nw, nh)`, sampling at pixel
/// centers.
pub fn resize_gray(src: &GrayImage, nw: usize, nh: usize) -> GrayImage {
    let sx = src.width as f64 / nw as f64;
    let sy = src.height as f64 / nh as f64;
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
        let y0 = (fy.floor() as usize).min(src.height - 1);
        let y1 = (y0 + 1).min(src.height - 1);
        let ay = fy - y0 as f64;
        for x in 0..nw {
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
            let x0 = (fx.floor() as usize).min(src.width - 1);
            let x1 = (x0 + 1).min(src.width - 1);
            let ax = fx - x0 as f64;
            let top = src.get(x0, y0) as f64 * (1.0 - ax) + src.get(x1, y0) as f64 * ax;
            let bot = src.get(x0, y1) as f64 * (1.0 - ax) + src.get(x1, y1) as f64 * ax;
            out.push((top * (1.0 - ay) + bot * ay).round().clamp(0.0, 255.0) as u8);
        }
    }
    Image::from_vec(nw, nh, out)
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(src: &GrayImage, sigma: f64, radius: usize) -> GrayImage {
    let kernel: Vec<f64> = {
        let k: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    };
    let (w, h) = (src.width, src.height);
    let r = radius as isize;
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * src.data[y * w + xx] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::from_vec(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_conversion_of_neutral_colors() {
        let rgb = Image::from_vec(2, 1, vec![[0, 0, 0], [200, 200, 200]]);
        assert_eq!(rgb_to_gray(&rgb).data, vec![0, 200]);
    }

    #[test]
    fn bilinear_interpolates_ramp() {
        let img = Image::from_vec(3, 1, vec![0.0f32, 10.0, 20.0]);
        assert!((img.bilinear(0.5, 0.0) - 5.0).abs() < 1e-6);
        assert!((img.bilinear(1.25, 0.0) - 12.5).abs() < 1e-6);
    }

    #[test]
    fn blur_keeps_constant_image() {
        let g = Image::filled(20, 10, 77u8);
        assert_eq!(gaussian_blur(&g, 2.0, 3), g);
        assert_eq!(resize_gray(&g, 7, 5).data, vec![77; 35]);
    }
}
