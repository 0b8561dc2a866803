use alloc::vec::Vec;

use super::{RasterImage, Rgba};
use crate::chart::{Coverage, LayoutResult, Point, Shape, StyleSpec};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: Rgba,
    /// 4x4 supersampling. Off by default: control extraction wants hard edges.
    pub antialias: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            background: Rgba::WHITE,
            antialias: false,
        }
    }
}

/// A chart raster plus the layout it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedChart {
    pub image: RasterImage,
    pub layout: LayoutResult,
}

/// Integer pixel range `[x0, x1) x [y0, y1)` a shape may touch.
pub(crate) fn pixel_bounds(shape: &Shape, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
    let (x0, y0, x1, y1) = shape.bounds();
    let clampi = |v: f64, hi: u32| -> u32 { v.max(0.0).min(hi as f64) as u32 };
    let (px0, py0) = (
        clampi(math::floor(x0) - 1.0, width),
        clampi(math::floor(y0) - 1.0, height),
    );
    let (px1, py1) = (
        clampi(math::ceil(x1) + 1.0, width),
        clampi(math::ceil(y1) + 1.0, height),
    );
    if px0 >= px1 || py0 >= py1 {
        None
    } else {
        Some((px0, py0, px1, py1))
    }
}

/// Line-like marks have no outline of their own, so they are drawn in a
/// dark shade of the series colour.
pub(crate) fn darken(c: Rgba) -> Rgba {
    let d = |v: u8| (v as u32 * 3 / 20) as u8;
    Rgba([d(c.0[0]), d(c.0[1]), d(c.0[2]), c.0[3]])
}

/// Marks in painting order: deepest layer first so layer 0 ends on top.
pub(crate) fn paint_order(layout: &LayoutResult) -> Vec<usize> {
    let mut order: Vec<usize> = (0..layout.marks.len()).collect();
    order.sort_by(|&a, &b| {
        layout.marks[b]
            .depth_layer
            .cmp(&layout.marks[a].depth_layer)
    });
    order
}

pub fn render_layout(
    layout: &LayoutResult,
    style: &StyleSpec,
    options: RenderOptions,
) -> RenderedChart {
    let (w, h) = (layout.canvas.width.max(1), layout.canvas.height.max(1));
    let mut image = RasterImage::filled(w, h, options.background).expect("non-zero canvas");

    for idx in paint_order(layout) {
        let mark = &layout.marks[idx];
        let fill = match mark.shape {
            Shape::Polyline { .. } | Shape::Arrow { .. } | Shape::Point { .. } => {
                darken(style.series_color(mark.series))
            }
            _ => style.series_color(mark.series),
        };
        let Some((x0, y0, x1, y1)) = pixel_bounds(&mark.shape, w, h) else {
            continue;
        };
        for y in y0..y1 {
            for x in x0..x1 {
                if options.antialias {
                    let under = image.pixel(x, y);
                    let mut acc = [0u32; 4];
                    let mut hit = false;
                    for sy in 0..4 {
                        for sx in 0..4 {
                            let p = Point::new(
                                x as f64 + (sx as f64 + 0.5) / 4.0,
                                y as f64 + (sy as f64 + 0.5) / 4.0,
                            );
                            let c = match mark.shape.coverage(p, style.stroke_width) {
                                Coverage::Outside => under,
                                Coverage::Fill => {
                                    hit = true;
                                    fill
                                }
                                Coverage::Stroke => {
                                    hit = true;
                                    style.stroke_color
                                }
                            };
                            for (a, v) in acc.iter_mut().zip(c.0) {
                                *a += v as u32;
                            }
                        }
                    }
                    if hit {
                        image.set_pixel(x, y, Rgba(acc.map(|v| ((v + 8) / 16) as u8)));
                    }
                } else {
                    let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                    match mark.shape.coverage(p, style.stroke_width) {
                        Coverage::Outside => {}
                        Coverage::Fill => image.set_pixel(x, y, fill),
                        Coverage::Stroke => image.set_pixel(x, y, style.stroke_color),
                    }
                }
            }
        }
    }
    RenderedChart {
        image,
        layout: layout.clone(),
    }
}
