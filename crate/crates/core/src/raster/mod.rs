//! RGBA raster buffers, chart rendering and deterministic resampling.

pub(crate) mod render;
mod resample;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use render::{render_layout, RenderOptions, RenderedChart};
pub use resample::{resample, resize, resize_plane, Ratio, ResampleMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Rgba([r, g, b, 255])
    }

    /// Rec. 601 luma of the colour channels; alpha is ignored.
    pub fn luma(self) -> f64 {
        luma(self.0[0], self.0[1], self.0[2])
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// 8-bit RGBA image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension);
        }
        let expected = width as usize * height as usize * 4;
        if data.len() != expected {
            return Err(RasterError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgba) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension);
        }
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 4);
        for _ in 0..n {
            data.extend_from_slice(&color.0);
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    /// Builds an opaque grey image from one byte per pixel.
    pub fn from_gray(width: u32, height: u32, gray: &[u8]) -> Result<Self, RasterError> {
        let n = width as usize * height as usize;
        if gray.len() != n {
            return Err(RasterError::BufferSize {
                expected: n,
                actual: gray.len(),
            });
        }
        let mut data = vec![255u8; n * 4];
        for (px, &g) in data.chunks_exact_mut(4).zip(gray) {
            px[..3].fill(g);
        }
        RasterImage::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgba {
        let i = self.index(x, y);
        Rgba([
            self.data[i],
            self.data[i + 1],
            self.data[i + 2],
            self.data[i + 3],
        ])
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: Rgba) {
        let i = self.index(x, y);
        self.data[i..i + 4].copy_from_slice(&color.0);
    }

    /// Per-pixel luma as `f64`.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(4)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect()
    }

    /// Copies the rectangle `(x, y, w, h)`, which must lie inside the image.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<RasterImage, RasterError> {
        if w == 0 || h == 0 {
            return Err(RasterError::ZeroDimension);
        }
        if x as u64 + w as u64 > self.width as u64 || y as u64 + h as u64 > self.height as u64 {
            return Err(RasterError::OutOfBounds);
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * 4);
        for row in y..y + h {
            let start = self.index(x, row);
            data.extend_from_slice(&self.data[start..start + w as usize * 4]);
        }
        RasterImage::new(w, h, data)
    }

    /// Extends the image to `(w, h)` by replicating the last column and row.
    pub fn pad_replicate(&self, w: u32, h: u32) -> Result<RasterImage, RasterError> {
        if w < self.width || h < self.height {
            return Err(RasterError::OutOfBounds);
        }
        let mut out = RasterImage::filled(w, h, Rgba::BLACK)?;
        for y in 0..h {
            for x in 0..w {
                out.set_pixel(
                    x,
                    y,
                    self.pixel(x.min(self.width - 1), y.min(self.height - 1)),
                );
            }
        }
        Ok(out)
    }

    /// Mean of each channel.
    pub fn channel_means(&self) -> [f64; 4] {
        let mut sums = [0u64; 4];
        for px in self.data.chunks_exact(4) {
            for c in 0..4 {
                sums[c] += px[c] as u64;
            }
        }
        let n = (self.width as u64 * self.height as u64) as f64;
        sums.map(|s| s as f64 / n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterError {
    ZeroDimension,
    BufferSize { expected: usize, actual: usize },
    OutOfBounds,
    InvalidFactor,
    ZeroOutput,
}

impl fmt::Display for RasterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RasterError::ZeroDimension => f.write_str("image dimensions must be at least 1x1"),
            RasterError::BufferSize { expected, actual } => {
                write!(f, "pixel buffer has {actual} bytes, expected {expected}")
            }
            RasterError::OutOfBounds => f.write_str("region lies outside the image"),
            RasterError::InvalidFactor => f.write_str("resample factor must be positive"),
            RasterError::ZeroOutput => f.write_str("resampled output would have a zero dimension"),
        }
    }
}

impl core::error::Error for RasterError {}
