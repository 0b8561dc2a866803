use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{RasterError, RasterImage};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Nearest,
    Bilinear,
    /// Catmull-Rom cubic (`a = -0.5`), output clamped to `[0, 255]`.
    Bicubic,
}

/// Positive rational scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub const fn new(num: u32, den: u32) -> Self {
        Ratio { num, den }
    }

    pub const fn integer(n: u32) -> Self {
        Ratio { num: n, den: 1 }
    }

    /// `round(dim * num / den)`, halves rounded up.
    pub fn apply(self, dim: u32) -> u32 {
        let n = dim as u64 * self.num as u64;
        let d = self.den as u64;
        ((2 * n + d) / (2 * d)) as u32
    }
}

/// Scales `image` by `factor`; output dimensions are `round(dims * factor)`.
pub fn resample(
    image: &RasterImage,
    factor: Ratio,
    method: ResampleMethod,
) -> Result<RasterImage, RasterError> {
    if factor.num == 0 || factor.den == 0 {
        return Err(RasterError::InvalidFactor);
    }
    resize(
        image,
        factor.apply(image.width()),
        factor.apply(image.height()),
        method,
    )
}

/// Scales `image` to exactly `(width, height)`.
pub fn resize(
    image: &RasterImage,
    width: u32,
    height: u32,
    method: ResampleMethod,
) -> Result<RasterImage, RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::ZeroOutput);
    }
    let data = resize_plane(
        image.data(),
        image.width() as usize,
        image.height() as usize,
        4,
        width as usize,
        height as usize,
        method,
    );
    RasterImage::new(width, height, data)
}

/// Taps and weights for each destination coordinate along one axis.
struct Taps {
    /// `width` entries per destination index.
    index: Vec<usize>,
    weight: Vec<f64>,
    width: usize,
}

fn catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = math::abs(t);
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

fn build_taps(src: usize, dst: usize, method: ResampleMethod) -> Taps {
    let clamp = |i: i64| i.clamp(0, src as i64 - 1) as usize;
    let width = match method {
        ResampleMethod::Nearest => 1,
        ResampleMethod::Bilinear => 2,
        ResampleMethod::Bicubic => 4,
    };
    let mut index = Vec::with_capacity(dst * width);
    let mut weight = Vec::with_capacity(dst * width);
    for x in 0..dst {
        match method {
            ResampleMethod::Nearest => {
                // Pixel-centre aligned, exact in integers.
                let sx = ((2 * x + 1) * src) / (2 * dst);
                index.push(sx.min(src - 1));
                weight.push(1.0);
            }
            ResampleMethod::Bilinear | ResampleMethod::Bicubic => {
                let fx = (x as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
                let x0 = math::floor(fx);
                let t = fx - x0;
                let x0 = x0 as i64;
                if method == ResampleMethod::Bilinear {
                    index.push(clamp(x0));
                    weight.push(1.0 - t);
                    index.push(clamp(x0 + 1));
                    weight.push(t);
                } else {
                    for k in -1..=2i64 {
                        index.push(clamp(x0 + k));
                        weight.push(catmull_rom(t - k as f64));
                    }
                }
            }
        }
    }
    Taps {
        index,
        weight,
        width,
    }
}

/// Resizes an interleaved 8-bit plane with `channels` samples per pixel.
pub fn resize_plane(
    src: &[u8],
    sw: usize,
    sh: usize,
    channels: usize,
    dw: usize,
    dh: usize,
    method: ResampleMethod,
) -> Vec<u8> {
    let xt = build_taps(sw, dw, method);
    let yt = build_taps(sh, dh, method);

    if method == ResampleMethod::Nearest {
        let mut out = vec![0u8; dw * dh * channels];
        for y in 0..dh {
            let sy = yt.index[y];
            for x in 0..dw {
                let sx = xt.index[x];
                let s = (sy * sw + sx) * channels;
                let d = (y * dw + x) * channels;
                out[d..d + channels].copy_from_slice(&src[s..s + channels]);
            }
        }
        return out;
    }

    // Horizontal pass into f64 rows, then vertical pass.
    let mut mid = vec![0.0f64; sh * dw * channels];
    for y in 0..sh {
        for x in 0..dw {
            let d = (y * dw + x) * channels;
            for k in 0..xt.width {
                let sx = xt.index[x * xt.width + k];
                let w = xt.weight[x * xt.width + k];
                let s = (y * sw + sx) * channels;
                for c in 0..channels {
                    mid[d + c] += w * src[s + c] as f64;
                }
            }
        }
    }
    let mut out = vec![0u8; dw * dh * channels];
    let mut acc = vec![0.0f64; channels];
    for y in 0..dh {
        for x in 0..dw {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for k in 0..yt.width {
                let sy = yt.index[y * yt.width + k];
                let w = yt.weight[y * yt.width + k];
                let s = (sy * dw + x) * channels;
                for c in 0..channels {
                    acc[c] += w * mid[s + c];
                }
            }
            let d = (y * dw + x) * channels;
            for c in 0..channels {
                out[d + c] = math::to_u8(acc[c]);
            }
        }
    }
    out
}
