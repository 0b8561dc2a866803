//! Registration of a chart control map into background space, and the
//! additive and blending composition modes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::control::{canny, CannyParams, ControlError, ControlMap};
use crate::math;
use crate::raster::{resize_plane, RasterError, RasterImage, ResampleMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Center,
    BottomLeft,
    BottomRight,
    TopLeft,
    TopRight,
    /// Explicit top-left offset in background pixels.
    Custom {
        x: i64,
        y: i64,
    },
}

/// Scale and integer offset taking chart pixels to background pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementTransform {
    pub scale: f64,
    /// Top-left corner of the placed chart, background pixels.
    pub offset: [i64; 2],
    pub anchor: Anchor,
    pub chart_dims: [u32; 2],
    /// `round(chart_dims * scale)`.
    pub placed_dims: [u32; 2],
    /// Set when the requested scale was reduced to fit the background.
    pub reduced: bool,
}

impl PlacementTransform {
    /// Chart drawn 1:1 at the origin.
    pub fn identity(chart_dims: (u32, u32)) -> Self {
        PlacementTransform {
            scale: 1.0,
            offset: [0, 0],
            anchor: Anchor::TopLeft,
            chart_dims: [chart_dims.0, chart_dims.1],
            placed_dims: [chart_dims.0, chart_dims.1],
            reduced: false,
        }
    }

    pub fn translated(mut self, dx: i64, dy: i64) -> Self {
        self.offset[0] += dx;
        self.offset[1] += dy;
        self.anchor = Anchor::Custom {
            x: self.offset[0],
            y: self.offset[1],
        };
        self
    }

    /// Effective per-axis scale after rounding the placed size.
    pub fn axis_scale(&self) -> (f64, f64) {
        (
            self.placed_dims[0] as f64 / self.chart_dims[0] as f64,
            self.placed_dims[1] as f64 / self.chart_dims[1] as f64,
        )
    }

    pub fn map_x(&self, x: f64) -> f64 {
        self.offset[0] as f64 + x * self.axis_scale().0
    }

    pub fn map_y(&self, y: f64) -> f64 {
        self.offset[1] as f64 + y * self.axis_scale().1
    }

    /// `(x, y, w, h)` of the placed chart in background pixels.
    pub fn placed_rect(&self) -> (i64, i64, u32, u32) {
        (
            self.offset[0],
            self.offset[1],
            self.placed_dims[0],
            self.placed_dims[1],
        )
    }

    pub fn intersects(&self, bg_dims: (u32, u32)) -> bool {
        let (x, y, w, h) = self.placed_rect();
        x < bg_dims.0 as i64 && y < bg_dims.1 as i64 && x + w as i64 > 0 && y + h as i64 > 0
    }
}

fn placed_size(chart: (u32, u32), scale: f64) -> (u32, u32) {
    (
        math::round(chart.0 as f64 * scale) as u32,
        math::round(chart.1 as f64 * scale) as u32,
    )
}

/// Sizes the chart to `relative_scale` of the background height and
/// anchors it with a `margin` inset, shrinking it if it would not fit.
pub fn compute_placement(
    chart_dims: (u32, u32),
    bg_dims: (u32, u32),
    anchor: Anchor,
    relative_scale: f64,
    margin: u32,
) -> Result<PlacementTransform, ComposeError> {
    if !(relative_scale > 0.0 && relative_scale <= 1.0) {
        return Err(ComposeError::InvalidScale(relative_scale));
    }
    if chart_dims.0 == 0 || chart_dims.1 == 0 || bg_dims.0 == 0 || bg_dims.1 == 0 {
        return Err(ComposeError::Raster(RasterError::ZeroDimension));
    }
    let (bw, bh) = (bg_dims.0 as i64, bg_dims.1 as i64);
    let m = margin as i64;
    let (avail_w, avail_h) = (bw - 2 * m, bh - 2 * m);
    if avail_w <= 0 || avail_h <= 0 {
        return Err(ComposeError::CannotFit);
    }

    let mut scale = relative_scale * bh as f64 / chart_dims.1 as f64;
    let (mut pw, mut ph) = placed_size(chart_dims, scale);
    let mut reduced = false;
    let custom = matches!(anchor, Anchor::Custom { .. });
    if !custom && (pw as i64 > avail_w || ph as i64 > avail_h) {
        scale = (avail_w as f64 / chart_dims.0 as f64).min(avail_h as f64 / chart_dims.1 as f64);
        let (w, h) = placed_size(chart_dims, scale);
        pw = w.min(avail_w as u32);
        ph = h.min(avail_h as u32);
        reduced = true;
    }
    if pw == 0 || ph == 0 {
        return Err(ComposeError::CannotFit);
    }
    let (pwi, phi) = (pw as i64, ph as i64);
    let offset = match anchor {
        Anchor::Center => [(bw - pwi) / 2, (bh - phi) / 2],
        Anchor::TopLeft => [m, m],
        Anchor::TopRight => [bw - m - pwi, m],
        Anchor::BottomLeft => [m, bh - m - phi],
        Anchor::BottomRight => [bw - m - pwi, bh - m - phi],
        Anchor::Custom { x, y } => [x, y],
    };
    let placement = PlacementTransform {
        scale,
        offset,
        anchor,
        chart_dims: [chart_dims.0, chart_dims.1],
        placed_dims: [pw, ph],
        reduced,
    };
    if !placement.intersects(bg_dims) {
        return Err(ComposeError::OutsideBackground);
    }
    Ok(placement)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMode {
    Additive,
    Blending,
}

/// How the chart and background edge maps are merged when blending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// `clamp(wc * chart + wb * background)`.
    #[default]
    Sum,
    /// `max(wc * chart, wb * background)`.
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceHashes {
    pub chart_control: Option<String>,
    pub background: Option<String>,
}

/// Conditioning image at background resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedControl {
    pub map: ControlMap,
    pub mode: ComposeMode,
    pub placement: PlacementTransform,
    pub chart_weight: f64,
    pub bg_weight: f64,
    pub sources: SourceHashes,
}

/// Source index range feeding destination index `i` along one axis.
/// Shrinking takes every source pixel the destination pixel covers, so
/// no one-pixel line can fall between samples; enlarging takes the
/// nearest source pixel.
fn footprint(i: usize, src: usize, dst: usize) -> (usize, usize) {
    if dst >= src {
        let s = ((2 * i + 1) * src / (2 * dst)).min(src - 1);
        (s, s + 1)
    } else {
        (i * src / dst, ((i + 1) * src).div_ceil(dst).min(src))
    }
}

/// Max-pooling resize for binary maps.
fn resize_binary(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<u8> {
    let xs: Vec<(usize, usize)> = (0..dw).map(|x| footprint(x, sw, dw)).collect();
    let mut out = vec![0u8; dw * dh];
    for y in 0..dh {
        let (y0, y1) = footprint(y, sh, dh);
        for (x, &(x0, x1)) in xs.iter().enumerate() {
            out[y * dw + x] = (y0..y1)
                .flat_map(|sy| src[sy * sw + x0..sy * sw + x1].iter().copied())
                .max()
                .unwrap_or(0);
        }
    }
    out
}

/// Resamples the chart control to its placed size and pastes it into a
/// zero map of `bg_dims`. Binary kinds are max-pooled when shrinking.
fn place(
    chart: &ControlMap,
    placement: &PlacementTransform,
    bg_dims: (u32, u32),
) -> Result<ControlMap, ComposeError> {
    if !placement.intersects(bg_dims) {
        return Err(ComposeError::OutsideBackground);
    }
    let [pw, ph] = placement.placed_dims;
    let (cw, ch) = (chart.width() as usize, chart.height() as usize);
    let scaled = if chart.kind().is_binary() {
        resize_binary(chart.data(), cw, ch, pw as usize, ph as usize)
    } else {
        resize_plane(
            chart.data(),
            cw,
            ch,
            1,
            pw as usize,
            ph as usize,
            ResampleMethod::Bilinear,
        )
    };
    let mut out = ControlMap::blank(bg_dims.0, bg_dims.1, chart.kind())?;
    let (ox, oy) = (placement.offset[0], placement.offset[1]);
    let bw = bg_dims.0 as i64;
    let data = out.data_mut();
    for y in 0..ph as i64 {
        let by = oy + y;
        if by < 0 || by >= bg_dims.1 as i64 {
            continue;
        }
        for x in 0..pw as i64 {
            let bx = ox + x;
            if bx < 0 || bx >= bw {
                continue;
            }
            data[(by * bw + bx) as usize] = scaled[(y * pw as i64 + x) as usize];
        }
    }
    Ok(out)
}

pub fn compose_additive(
    chart_control: &ControlMap,
    placement: &PlacementTransform,
    bg_dims: (u32, u32),
) -> Result<ComposedControl, ComposeError> {
    Ok(ComposedControl {
        map: place(chart_control, placement, bg_dims)?,
        mode: ComposeMode::Additive,
        placement: *placement,
        chart_weight: 1.0,
        bg_weight: 0.0,
        sources: SourceHashes::default(),
    })
}

/// Weighted merge of the placed chart control with the background's own
/// Canny edges over the full frame.
pub fn compose_blend(
    chart_control: &ControlMap,
    placement: &PlacementTransform,
    background: &RasterImage,
    bg_edge_params: CannyParams,
    chart_weight: f64,
    bg_weight: f64,
    combine: Combine,
) -> Result<ComposedControl, ComposeError> {
    for w in [chart_weight, bg_weight] {
        if !(0.0..=1.0).contains(&w) {
            return Err(ComposeError::InvalidWeight(w));
        }
    }
    let placed = place(chart_control, placement, background.dims())?;
    let bg_edges = canny(background, bg_edge_params)?;
    let mut out = placed.clone();
    for ((o, &c), &b) in out
        .data_mut()
        .iter_mut()
        .zip(placed.data())
        .zip(bg_edges.data())
    {
        let (c, b) = (chart_weight * c as f64, bg_weight * b as f64);
        *o = math::to_u8(match combine {
            Combine::Sum => c + b,
            Combine::Max => c.max(b),
        });
    }
    Ok(ComposedControl {
        map: out,
        mode: ComposeMode::Blending,
        placement: *placement,
        chart_weight,
        bg_weight,
        sources: SourceHashes::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComposeError {
    InvalidScale(f64),
    CannotFit,
    OutsideBackground,
    InvalidWeight(f64),
    Control(ControlError),
    Raster(RasterError),
}

impl From<ControlError> for ComposeError {
    fn from(e: ControlError) -> Self {
        ComposeError::Control(e)
    }
}

impl From<RasterError> for ComposeError {
    fn from(e: RasterError) -> Self {
        ComposeError::Raster(e)
    }
}

impl fmt::Display for ComposeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComposeError::InvalidScale(s) => write!(f, "relative scale must be in (0, 1], got {s}"),
            ComposeError::CannotFit => {
                f.write_str("chart cannot fit inside the background with this margin")
            }
            ComposeError::OutsideBackground => {
                f.write_str("placed chart does not intersect the background")
            }
            ComposeError::InvalidWeight(w) => write!(f, "weight must be in [0, 1], got {w}"),
            ComposeError::Control(e) => write!(f, "background edges: {e}"),
            ComposeError::Raster(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for ComposeError {}
