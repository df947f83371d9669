//! Middlebury `.flo` files: magic `PIEH`, i32 width, i32 height, then
//! interleaved little-endian f32 `(u, v)` pairs in row-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{FlowField, Image};

const MAGIC: &[u8; 4] = b"PIEH";

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for [u, v] in &flow.data {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(Error::Format("flow file: bad magic".into()));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::Format(format!("flow file: bad dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let need = 12 + w * h * 8;
    if bytes.len() < need {
        return Err(Error::Format(format!(
            "flow file truncated: {} of {need} bytes",
            bytes.len()
        )));
    }
    let data = bytes[12..need]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    Ok(Image::from_vec(w, h, data))
}

pub fn load_flow(path: &Path) -> Result<FlowField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flow(&bytes)
}

pub fn write_flow(flow: &FlowField, path: &Path) -> Result<()> {
    std::fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_decodes_to_zero_field() {
        let f = Image::filled(5, 4, [0.0f32, 0.0]);
        let back = decode_flow(&encode_flow(&f)).unwrap();
        assert!(back.data.iter().all(|d| *d == [0.0, 0.0]));
    }

    #[test]
    fn constant_flow_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.flo");
        let f = Image::filled(7, 3, [3.0f32, -1.5]);
        write_flow(&f, &p).unwrap();
        let back = load_flow(&p).unwrap();
        assert_eq!(encode_flow(&back), encode_flow(&f));
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_and_bad_magic_are_errors() {
        let bytes = encode_flow(&Image::filled(4, 4, [1.0f32, 2.0]));
        assert!(decode_flow(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_flow(&bad).is_err());
    }
}
