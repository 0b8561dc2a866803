//! PNG encoding and decoding. Encoder settings are fixed (fast deflate,
//! no filtering) so identical pixels always give identical bytes.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};
use sitblend_core::control::ControlKind;
use sitblend_core::{ControlMap, RasterImage};

#[derive(Debug, thiserror::Error)]
pub enum PngError {
    #[error("malformed PNG stream: {0}")]
    Malformed(String),
    #[error("unsupported PNG bit depth {0} (at most 8 bits per sample)")]
    UnsupportedBitDepth(u8),
    #[error("unsupported PNG colour type {0:?}")]
    UnsupportedColor(ColorType),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn encode(width: u32, height: u32, color: ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        enc.set_filter(png::FilterType::NoFilter);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(data).expect("in-memory PNG data");
    }
    out
}

pub fn encode_png(image: &RasterImage) -> Vec<u8> {
    encode(image.width(), image.height(), ColorType::Rgba, image.data())
}

/// Control maps are stored as single-channel greyscale.
pub fn encode_control(map: &ControlMap) -> Vec<u8> {
    encode(map.width(), map.height(), ColorType::Grayscale, map.data())
}

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, PngError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| PngError::Malformed(e.to_string()))?;
    let depth = reader.info().bit_depth;
    if depth == BitDepth::Sixteen {
        return Err(PngError::UnsupportedBitDepth(16));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| PngError::Malformed(e.to_string()))?;
    let (color, _) = reader.output_color_type();
    let raw = &buf[..frame.buffer_size()];
    let (w, h) = (frame.width, frame.height);
    let n = w as usize * h as usize;
    let mut rgba = Vec::with_capacity(n * 4);
    match color {
        ColorType::Rgba => rgba.extend_from_slice(raw),
        ColorType::Rgb => {
            for p in raw.chunks_exact(3) {
                rgba.extend_from_slice(&[p[0], p[1], p[2], 255]);
            }
        }
        ColorType::Grayscale => {
            for &g in raw {
                rgba.extend_from_slice(&[g, g, g, 255]);
            }
        }
        ColorType::GrayscaleAlpha => {
            for p in raw.chunks_exact(2) {
                rgba.extend_from_slice(&[p[0], p[0], p[0], p[1]]);
            }
        }
        other => return Err(PngError::UnsupportedColor(other)),
    }
    RasterImage::new(w, h, rgba).map_err(|e| PngError::Malformed(e.to_string()))
}

/// Reads a control map back from PNG, taking the first channel.
pub fn decode_control(bytes: &[u8], kind: ControlKind) -> Result<ControlMap, PngError> {
    let img = decode_png(bytes)?;
    let data = img.data().chunks_exact(4).map(|p| p[0]).collect();
    ControlMap::new(img.width(), img.height(), data, kind)
        .map_err(|e| PngError::Malformed(e.to_string()))
}

pub fn read_png(path: &Path) -> Result<RasterImage, PngError> {
    decode_png(&std::fs::read(path)?)
}

pub fn write_png(path: &Path, image: &RasterImage) -> Result<Vec<u8>, PngError> {
    let bytes = encode_png(image);
    std::fs::write(path, &bytes)?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sitblend_core::Rgba;

    #[test]
    fn one_white_pixel() {
        let img = RasterImage::filled(1, 1, Rgba::WHITE).unwrap();
        let back = decode_png(&encode_png(&img)).unwrap();
        assert_eq!(back.data(), &[255, 255, 255, 255]);
    }

    #[test]
    fn truncated_stream() {
        let bytes = encode_png(&RasterImage::filled(4, 4, Rgba::BLACK).unwrap());
        assert!(matches!(
            decode_png(&bytes[..bytes.len() / 2]),
            Err(PngError::Malformed(_))
        ));
        assert!(matches!(
            decode_png(b"not a png"),
            Err(PngError::Malformed(_))
        ));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(ColorType::Grayscale);
            enc.set_depth(BitDepth::Sixteen);
            enc.write_header()
                .unwrap()
                .write_image_data(&[0x12, 0x34])
                .unwrap();
        }
        assert!(matches!(
            decode_png(&out),
            Err(PngError::UnsupportedBitDepth(16))
        ));
    }

    #[test]
    fn grey_control_round_trip() {
        let map = ControlMap::new(3, 2, vec![0, 255, 7, 9, 128, 0], ControlKind::Softedge).unwrap();
        let back = decode_control(&encode_control(&map), ControlKind::Softedge).unwrap();
        assert_eq!(back, map);
    }
}
