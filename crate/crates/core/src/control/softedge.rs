use serde::{Deserialize, Serialize};

use super::filter::{gaussian_blur, GrayPlane};
use super::{ControlError, ControlKind, ControlMap};
use crate::math;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftedgeParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for SoftedgeParams {
    fn default() -> Self {
        SoftedgeParams {
            sigma1: 1.0,
            sigma2: 2.0,
        }
    }
}

/// `|blur(sigma1) - blur(sigma2)|`, stretched so the maximum is 255.
pub fn softedge_dog(
    image: &RasterImage,
    params: SoftedgeParams,
) -> Result<ControlMap, ControlError> {
    let SoftedgeParams { sigma1, sigma2 } = params;
    if !(sigma1.is_finite() && sigma2.is_finite() && sigma1 > 0.0 && sigma1 < sigma2) {
        return Err(ControlError::SigmaOrder { sigma1, sigma2 });
    }
    let gray = GrayPlane::from_image(image);
    let (w, h) = (image.width(), image.height());
    let first = gray.data[0];
    if gray.data.iter().all(|&v| v == first) {
        return Ok(ControlMap::blank(w, h, ControlKind::Softedge).expect("image dims"));
    }
    let a = gaussian_blur(&gray, sigma1);
    let b = gaussian_blur(&gray, sigma2);
    let diff: alloc::vec::Vec<f64> = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| math::abs(x - y))
        .collect();
    let max = diff.iter().copied().fold(0.0, f64::max);
    let data = if max < 1e-9 {
        alloc::vec![0u8; diff.len()]
    } else {
        diff.iter().map(|d| math::to_u8(d / max * 255.0)).collect()
    };
    Ok(ControlMap::new(w, h, data, ControlKind::Softedge).expect("image dims"))
}
