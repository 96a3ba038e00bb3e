//! Frame export: 8-bit PNG and raw float planar dumps.
//!
//! Raw dumps are little-endian: magic `SPLTFRAM`, `u32` width, `u32` height,
//! `u32` plane count (4), then the R, G, B and alpha planes as row-major
//! `f32`.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage, RgbaImage};

use crate::error::{format_err, Result};
use crate::raster::RenderedFrame;

pub const RAW_MAGIC: [u8; 8] = *b"SPLTFRAM";

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Composites the premultiplied frame over `background` and quantizes.
pub fn to_rgb8(frame: &RenderedFrame, background: [f32; 3]) -> Vec<u8> {
    frame
        .rgb()
        .chunks_exact(3)
        .zip(frame.alpha())
        .flat_map(|(c, a)| {
            let t = 1.0 - a;
            [0, 1, 2].map(|k| quantize(c[k] + t * background[k]))
        })
        .collect()
}

pub fn encode_png(frame: &RenderedFrame, background: [f32; 3]) -> Result<Vec<u8>> {
    let img = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, to_rgb8(frame, background))
        .expect("buffer sized from frame");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// PNG with straight (un-premultiplied) alpha.
pub fn encode_png_rgba(frame: &RenderedFrame) -> Result<Vec<u8>> {
    let data = frame
        .rgb()
        .chunks_exact(3)
        .zip(frame.alpha())
        .flat_map(|(c, &a)| {
            let inv = if a > 0.0 { 1.0 / a } else { 0.0 };
            [quantize(c[0] * inv), quantize(c[1] * inv), quantize(c[2] * inv), quantize(a)]
        })
        .collect();
    let img = RgbaImage::from_raw(frame.width() as u32, frame.height() as u32, data).expect("sized from frame");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png(frame: &RenderedFrame, path: impl AsRef<Path>, background: [f32; 3]) -> Result<()> {
    std::fs::write(path, encode_png(frame, background)?)?;
    Ok(())
}

pub fn encode_raw(frame: &RenderedFrame) -> Vec<u8> {
    let n = frame.width() * frame.height();
    let mut out = Vec::with_capacity(20 + n * 16);
    out.extend_from_slice(&RAW_MAGIC);
    out.extend_from_slice(&(frame.width() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height() as u32).to_le_bytes());
    out.extend_from_slice(&4u32.to_le_bytes());
    for k in 0..3 {
        for p in 0..n {
            out.extend_from_slice(&frame.rgb()[p * 3 + k].to_le_bytes());
        }
    }
    for a in frame.alpha() {
        out.extend_from_slice(&a.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<RenderedFrame> {
    if bytes.len() < 20 || bytes[..8] != RAW_MAGIC {
        return Err(format_err("raw frame", "bad header"));
    }
    let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (w, h, planes) = (u(8), u(12), u(16));
    let n = w.checked_mul(h).ok_or_else(|| format_err("raw frame", "size overflow"))?;
    if planes != 4 || bytes.len() != 20 + n * 16 {
        return Err(format_err("raw frame", "size mismatch"));
    }
    let f = |i: usize| f32::from_le_bytes(bytes[20 + i * 4..24 + i * 4].try_into().unwrap());
    let mut rgb = vec![0.0; n * 3];
    for k in 0..3 {
        for p in 0..n {
            rgb[p * 3 + k] = f(k * n + p);
        }
    }
    let alpha = (0..n).map(|p| f(3 * n + p)).collect();
    RenderedFrame::from_parts(w, h, rgb, alpha)
}

pub fn save_raw(frame: &RenderedFrame, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_raw(frame))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> RenderedFrame {
        RenderedFrame::from_parts(2, 1, vec![0.5, 0.25, 0.0, 0.1, 0.2, 0.3], vec![0.5, 1.0]).unwrap()
    }

    #[test]
    fn raw_round_trip_is_exact() {
        let f = frame();
        assert_eq!(decode_raw(&encode_raw(&f)).unwrap(), f);
        assert!(decode_raw(&encode_raw(&f)[..30]).is_err());
    }

    #[test]
    fn png_over_background() {
        let rgb = to_rgb8(&frame(), [1.0, 1.0, 1.0]);
        assert_eq!(&rgb[..3], &[255, 191, 128]);
        let png = encode_png(&frame(), [0.0; 3]).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(1, 0).0, [26, 51, 77]);
    }
}
