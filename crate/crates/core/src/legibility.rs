//! Checks that a generated image still carries the chart: bar heights
//! read back from its edges, and overlap between conditioning edges and
//! output edges.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::chart::{Idiom, LayoutResult, Shape};
use crate::compose::PlacementTransform;
use crate::control::{canny, CannyParams, ControlError, ControlKind, ControlMap, EDGE_LEVEL};
use crate::math;
use crate::raster::RasterImage;

/// Rows above the mapped plot top that are still scanned, so a bar
/// drawn at the very top is not missed after rounding.
const TOP_SLACK: f64 = 2.0;

/// Rows below the first hit that still count as the same top edge.
const TOP_WINDOW: u32 = 3;

/// Reads each bar's height, in chart pixels, from an edge map in
/// background space. Within the bar's column band the first row where at
/// least half the columns carry an edge starts the bar's top edge; the
/// top is the mean of such rows within `TOP_WINDOW` rows of it, so a
/// stroke seen as two parallel edges reads as its middle. Isolated
/// texture edges above the bar do not fill a row and are skipped. Bars
/// with no such row come back as `None`.
pub fn recover_bar_heights(
    edges: &ControlMap,
    placement: &PlacementTransform,
    layout: &LayoutResult,
) -> Result<Vec<Option<f64>>, LegibilityError> {
    if layout.idiom != Idiom::Bar {
        return Err(LegibilityError::NotBars(layout.idiom));
    }
    let (w, h) = (edges.width() as f64, edges.height() as f64);
    let (_, sy) = placement.axis_scale();
    let y_top = placement.map_y(layout.plot_area.y);
    let y_base = placement.map_y(layout.plot_area.bottom());
    let mut heights = Vec::with_capacity(layout.marks.len());
    for (index, mark) in layout.marks.iter().enumerate() {
        let Shape::Rect(r) = &mark.shape else {
            return Err(LegibilityError::NotBars(layout.idiom));
        };
        let x0 = placement.map_x(r.x);
        let x1 = placement.map_x(r.right());
        if x0 < 0.0 || x1 > w || y_top < 0.0 || y_base > h {
            return Err(LegibilityError::BarOutsideFrame(index));
        }
        let inset = (0.2 * (x1 - x0)).max(1.0);
        let mut cols: Vec<u32> = (math::floor(x0) as u32..math::ceil(x1) as u32)
            .filter(|&x| x as f64 + 0.5 > x0 + inset && x as f64 + 0.5 < x1 - inset)
            .collect();
        if cols.is_empty() {
            cols.push(math::floor((x0 + x1) / 2.0).min(w - 1.0) as u32);
        }
        let first_row = math::floor(y_top - TOP_SLACK).max(0.0) as u32;
        let last_row = (math::floor(y_base).min(h - 1.0)) as u32;
        let filled =
            |y: u32| cols.iter().filter(|&&x| edges.is_edge(x, y)).count() * 2 >= cols.len();
        let top = (first_row..=last_row).find(|&y| filled(y)).map(|start| {
            let rows: Vec<u32> = (start..=(start + TOP_WINDOW).min(last_row))
                .filter(|&y| filled(y))
                .collect();
            rows.iter().map(|&y| y as f64).sum::<f64>() / rows.len() as f64
        });
        heights.push(top.map(|t| (y_base - t) / sy));
    }
    Ok(heights)
}

/// Chebyshev dilation of the edge set by `radius`, as a mask.
fn dilate(map: &ControlMap, radius: u32) -> Vec<bool> {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let r = radius as usize;
    let src: Vec<bool> = map.data().iter().map(|&v| v >= EDGE_LEVEL).collect();
    let mut rows = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = src[y * w + lo..=y * w + hi].iter().any(|&v| v);
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).any(|yy| rows[yy * w + x]);
        }
    }
    out
}

/// Edge pixels a conditioning map asks the output to reproduce. Depth
/// maps hold filled regions, so their region boundaries are used;
/// every other kind already marks edges at or above `EDGE_LEVEL`.
pub fn alignment_reference(
    map: &ControlMap,
    params: CannyParams,
) -> Result<ControlMap, ControlError> {
    match map.kind() {
        ControlKind::Depth => canny(&map.to_image(), params),
        _ => Ok(map.clone()),
    }
}

/// Fraction of reference edge pixels with a candidate edge within
/// `radius` (Chebyshev). An edgeless reference scores 1.
pub fn edge_alignment_score(
    reference: &ControlMap,
    candidate: &ControlMap,
    radius: u32,
) -> Result<f64, LegibilityError> {
    if reference.dims() != candidate.dims() {
        return Err(LegibilityError::DimensionMismatch {
            reference: reference.dims(),
            candidate: candidate.dims(),
        });
    }
    let near = dilate(candidate, radius);
    let mut total = 0usize;
    let mut hit = 0usize;
    for (&v, &n) in reference.data().iter().zip(&near) {
        if v >= EDGE_LEVEL {
            total += 1;
            hit += n as usize;
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    /// Edge detector applied to the generated image.
    pub canny: CannyParams,
    pub radius: u32,
    pub tolerance_px: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            canny: CannyParams {
                sigma: 1.0,
                low: 20.0,
                high: 40.0,
            },
            radius: 2,
            tolerance_px: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarCheck {
    pub index: usize,
    pub expected_px: f64,
    pub recovered_px: Option<f64>,
    pub abs_error_px: Option<f64>,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegibilityReport {
    pub idiom: Idiom,
    pub edge_alignment: f64,
    pub alignment_radius: u32,
    pub tolerance_px: f64,
    /// Present only for bar charts.
    pub bars: Option<Vec<BarCheck>>,
    pub bars_within_tolerance: Option<bool>,
    /// Colour fidelity is out of scope for the checks here.
    pub colour: String,
}

pub const COLOUR_NOT_ASSESSED: &str = "not assessed";

/// Scores a generated image against the conditioning map it was made from.
pub fn assess(
    reference: &ControlMap,
    output: &RasterImage,
    placement: &PlacementTransform,
    layout: &LayoutResult,
    params: &VerifyParams,
) -> Result<LegibilityReport, LegibilityError> {
    let edges = canny(output, params.canny)?;
    let reference = alignment_reference(reference, params.canny)?;
    let edge_alignment = edge_alignment_score(&reference, &edges, params.radius)?;
    let bars = if layout.idiom == Idiom::Bar {
        let recovered = recover_bar_heights(&edges, placement, layout)?;
        let checks: Vec<BarCheck> = layout
            .marks
            .iter()
            .zip(recovered)
            .enumerate()
            .map(|(index, (mark, got))| {
                let expected_px = match &mark.shape {
                    Shape::Rect(r) => r.height,
                    _ => 0.0,
                };
                let abs_error_px = got.map(|g| math::abs(g - expected_px));
                BarCheck {
                    index,
                    expected_px,
                    recovered_px: got,
                    abs_error_px,
                    within_tolerance: abs_error_px.is_some_and(|e| e <= params.tolerance_px),
                }
            })
            .collect();
        Some(checks)
    } else {
        None
    };
    Ok(LegibilityReport {
        idiom: layout.idiom,
        edge_alignment,
        alignment_radius: params.radius,
        tolerance_px: params.tolerance_px,
        bars_within_tolerance: bars.as_ref().map(|b| b.iter().all(|c| c.within_tolerance)),
        bars,
        colour: String::from(COLOUR_NOT_ASSESSED),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LegibilityError {
    NotBars(Idiom),
    BarOutsideFrame(usize),
    DimensionMismatch {
        reference: (u32, u32),
        candidate: (u32, u32),
    },
    Control(ControlError),
}

impl From<ControlError> for LegibilityError {
    fn from(e: ControlError) -> Self {
        LegibilityError::Control(e)
    }
}

impl fmt::Display for LegibilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LegibilityError::NotBars(i) => {
                write!(f, "bar recovery needs a bar chart, got {}", i.name())
            }
            LegibilityError::BarOutsideFrame(i) => {
                write!(f, "placement maps bar {i} outside the frame")
            }
            LegibilityError::DimensionMismatch {
                reference,
                candidate,
            } => write!(
                f,
                "edge maps differ in size: {}x{} vs {}x{}",
                reference.0, reference.1, candidate.0, candidate.1
            ),
            LegibilityError::Control(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for LegibilityError {}
