use alloc::vec;

use super::filter::{gaussian_blur, GrayPlane};
use super::{ControlKind, ControlMap};
use crate::chart::{Coverage, LayoutResult, Point};
use crate::raster::render::{paint_order, pixel_bounds};

/// Pseudo-depth from mark layering: layer `k` is filled with
/// `255 - k * floor(255 / (max_layer + 1))`, background 0.
pub fn depth_proxy(layout: &LayoutResult, blur_sigma: f64) -> ControlMap {
    let (w, h) = (layout.canvas.width.max(1), layout.canvas.height.max(1));
    let mut data = vec![0u8; w as usize * h as usize];
    if let Some(max_layer) = layout.max_depth_layer() {
        let step = 255 / (max_layer as u32 + 1);
        for idx in paint_order(layout) {
            let mark = &layout.marks[idx];
            let value = (255 - mark.depth_layer as u32 * step) as u8;
            let Some((x0, y0, x1, y1)) = pixel_bounds(&mark.shape, w, h) else {
                continue;
            };
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                    if mark.shape.coverage(p, 0.0) != Coverage::Outside {
                        data[(y * w + x) as usize] = value;
                    }
                }
            }
        }
    }
    if blur_sigma > 0.0 {
        let plane = GrayPlane::from_bytes(w as usize, h as usize, &data);
        data = gaussian_blur(&plane, blur_sigma).to_bytes();
    }
    ControlMap::new(w, h, data, ControlKind::Depth).expect("canvas dims")
}
