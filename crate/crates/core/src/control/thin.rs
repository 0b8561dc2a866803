use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ControlError, ControlKind, ControlMap};
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScribbleParams {
    pub threshold: u8,
    /// Foreground is brighter than the threshold instead of darker.
    #[serde(default)]
    pub invert: bool,
}

impl Default for ScribbleParams {
    fn default() -> Self {
        ScribbleParams {
            threshold: 128,
            invert: false,
        }
    }
}

pub fn binarize(image: &RasterImage, params: ScribbleParams) -> Vec<bool> {
    let t = params.threshold as f64;
    image
        .luma()
        .into_iter()
        .map(|l| if params.invert { l > t } else { l < t })
        .collect()
}

/// Binarises and thins to a one-pixel skeleton (255 on 0).
pub fn scribble_thin(
    image: &RasterImage,
    params: ScribbleParams,
) -> Result<ControlMap, ControlError> {
    if !(1..=254).contains(&params.threshold) {
        return Err(ControlError::InvalidScribbleThreshold(params.threshold));
    }
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut mask = binarize(image, params);
    zhang_suen_thin(&mut mask, w, h);
    let data = mask.into_iter().map(|f| if f { 255 } else { 0 }).collect();
    Ok(ControlMap::new(w as u32, h as u32, data, ControlKind::Scribble).expect("image dims"))
}

/// Neighbours P2..P9 clockwise from north; outside the image is background.
#[inline]
fn neighbours(mask: &[bool], w: usize, h: usize, x: usize, y: usize) -> [bool; 8] {
    let at = |dx: i64, dy: i64| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        nx >= 0
            && ny >= 0
            && (nx as usize) < w
            && (ny as usize) < h
            && mask[ny as usize * w + nx as usize]
    };
    [
        at(0, -1),
        at(1, -1),
        at(1, 0),
        at(1, 1),
        at(0, 1),
        at(-1, 1),
        at(-1, 0),
        at(-1, -1),
    ]
}

fn deletable(n: &[bool; 8], pass: usize) -> bool {
    let b = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if pass == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Zhang-Suen thinning, in place.
///
/// Each sub-iteration selects candidates on a snapshot, as in the
/// classic parallel formulation, then confirms every deletion against
/// the current mask. The confirmation keeps the pixels the parallel
/// update would otherwise remove together (2x2 blocks, two-pixel
/// diagonals), so 8-connected components are never split or erased.
pub fn zhang_suen_thin(mask: &mut [bool], w: usize, h: usize) {
    assert_eq!(mask.len(), w * h);
    let mut candidates = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            candidates.clear();
            for y in 0..h {
                for x in 0..w {
                    if mask[y * w + x] && deletable(&neighbours(mask, w, h, x, y), pass) {
                        candidates.push((x, y));
                    }
                }
            }
            for &(x, y) in &candidates {
                if deletable(&neighbours(mask, w, h, x, y), pass) {
                    mask[y * w + x] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
