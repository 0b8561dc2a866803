use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::filter::{gaussian_blur, GrayPlane};
use super::{ControlError, ControlKind, ControlMap};
use crate::math;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.4,
            low: 50.0,
            high: 100.0,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(ControlError::InvalidSigma(self.sigma));
        }
        if !(self.low > 0.0 && self.low <= self.high && self.high <= 255.0) {
            return Err(ControlError::InvalidThresholds {
                low: self.low,
                high: self.high,
            });
        }
        Ok(())
    }
}

/// Edge map together with the intermediate magnitudes.
#[derive(Debug, Clone)]
pub struct CannyTrace {
    pub map: ControlMap,
    /// Gradient magnitude before non-maximum suppression.
    pub magnitude: Vec<f64>,
    /// Magnitude after non-maximum suppression (0 where suppressed).
    pub suppressed: Vec<f64>,
}

pub fn canny(image: &RasterImage, params: CannyParams) -> Result<ControlMap, ControlError> {
    canny_trace(image, params).map(|t| t.map)
}

pub fn canny_trace(image: &RasterImage, params: CannyParams) -> Result<CannyTrace, ControlError> {
    canny_plane(&GrayPlane::from_image(image), params)
}

/// 3x3 Sobel responses with replicated borders.
pub fn sobel(plane: &GrayPlane) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (plane.width, plane.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let p = |dx: i64, dy: i64| plane.get_clamped(x + dx, y + dy);
            let i = y as usize * w + x as usize;
            gx[i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    (gx, gy)
}

/// Magnitudes are quantised so that round-off in the blur cannot flip
/// ties during suppression.
#[inline]
fn quantise(v: f64) -> f64 {
    const Q: f64 = (1u64 << 20) as f64;
    math::round(v * Q) / Q
}

pub fn canny_plane(plane: &GrayPlane, params: CannyParams) -> Result<CannyTrace, ControlError> {
    params.validate()?;
    let (w, h) = (plane.width, plane.height);
    let blurred = gaussian_blur(plane, params.sigma);
    let (gx, gy) = sobel(&blurred);
    // Sobel / 4 keeps magnitudes in intensity units, comparable to the
    // [0, 255] thresholds.
    let magnitude: Vec<f64> = gx
        .iter()
        .zip(&gy)
        .map(|(&a, &b)| quantise(math::hypot(a, b) / 4.0))
        .collect();

    let at = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            magnitude[y as usize * w + x as usize]
        }
    };
    let mut suppressed = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let m = magnitude[i];
            if m <= 0.0 {
                continue;
            }
            let mut angle = math::atan2(gy[i], gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            // (before, after) along the gradient direction, y pointing down.
            let (before, after) = if !(22.5..157.5).contains(&angle) {
                (at(x - 1, y), at(x + 1, y))
            } else if angle < 67.5 {
                (at(x - 1, y - 1), at(x + 1, y + 1))
            } else if angle < 112.5 {
                (at(x, y - 1), at(x, y + 1))
            } else {
                (at(x + 1, y - 1), at(x - 1, y + 1))
            };
            // Plateaus keep exactly their last pixel along the gradient.
            if m >= before && m > after {
                suppressed[i] = m;
            }
        }
    }

    let mut out = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for (i, &m) in suppressed.iter().enumerate() {
        if m >= params.high {
            out[i] = 255;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out[j] == 0 && suppressed[j] >= params.low {
                    out[j] = 255;
                    queue.push_back(j);
                }
            }
        }
    }

    let map = ControlMap::new(w as u32, h as u32, out, ControlKind::Canny).expect("plane dims");
    Ok(CannyTrace {
        map,
        magnitude,
        suppressed,
    })
}
