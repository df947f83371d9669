//! PNG codecs for 8-bit RGB and 16-bit single-channel images.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::{DepthImage, Image, RgbImage};

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Ok(Image::from_vec(w as usize, h as usize, data))
}

pub fn write_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    let flat: Vec<u8> = img.data.iter().flatten().copied().collect();
    let buf: ImageBuffer<Rgb<u8>, _> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, flat)
            .ok_or_else(|| image_err(path, "buffer size mismatch"))?;
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Reads a single-channel 16-bit image. 8-bit grayscale is widened; color
/// images are rejected.
pub fn read_u16(path: &Path) -> Result<DepthImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let buf = match img {
        DynamicImage::ImageLuma16(b) => b,
        DynamicImage::ImageLuma8(b) => DynamicImage::ImageLuma8(b).into_luma16(),
        other => {
            return Err(image_err(
                path,
                format!("expected single-channel image, got {:?}", other.color()),
            ))
        }
    };
    let (w, h) = buf.dimensions();
    Ok(Image::from_vec(w as usize, h as usize, buf.into_raw()))
}

pub fn write_u16(img: &DepthImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone())
            .ok_or_else(|| image_err(path, "buffer size mismatch"))?;
    buf.save(path).map_err(|e| image_err(path, e))
}
