//! Tiled upscaling: split into overlapping tiles, transform each one,
//! and reassemble with feathered seams.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::raster::{resample, RasterError, RasterImage, Ratio, ResampleMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }
}

/// One tile. Band widths are the half-widths, in source pixels, of the
/// cross-fade at each interior edge; `None` on the image border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub index: usize,
    pub row: u32,
    pub col: u32,
    pub core: PixelRect,
    pub expanded: PixelRect,
    pub band_left: Option<f64>,
    pub band_right: Option<f64>,
    pub band_top: Option<f64>,
    pub band_bottom: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub width: u32,
    pub height: u32,
    pub cols: u32,
    pub rows: u32,
    pub overlap: u32,
    pub factor: u32,
    pub tiles: Vec<Tile>,
}

impl TilePlan {
    pub fn output_dims(&self) -> (u32, u32) {
        (self.width * self.factor, self.height * self.factor)
    }
}

/// Splits `[0, len)` into `n` cores of width `ceil(len / n)`.
fn split_axis(len: u32, n: u32) -> Result<Vec<(u32, u32)>, UpscaleError> {
    if n == 0 {
        return Err(UpscaleError::InvalidGrid);
    }
    let step = len.div_ceil(n);
    if (n - 1) as u64 * step as u64 >= len as u64 {
        return Err(UpscaleError::GridTooFine { len, tiles: n });
    }
    Ok((0..n)
        .map(|i| (i * step, ((i + 1) * step).min(len)))
        .collect())
}

fn band(overlap: u32, a: (u32, u32), b: (u32, u32)) -> f64 {
    let half = |c: (u32, u32)| (c.1 - c.0) as f64 / 2.0;
    (overlap as f64 / 2.0).min(half(a)).min(half(b))
}

/// Lays out a `cols x rows` grid over a `width x height` image. Each
/// tile's expanded rectangle is its core grown by `overlap` on interior
/// sides. The cross-fade occupies the middle half of the overlap, so
/// pixels a tile contributes to stay `overlap / 2` away from its cut
/// edges.
pub fn plan_tiles(
    dims: (u32, u32),
    cols: u32,
    rows: u32,
    overlap: u32,
    factor: u32,
) -> Result<TilePlan, UpscaleError> {
    let (width, height) = dims;
    if width == 0 || height == 0 {
        return Err(UpscaleError::Raster(RasterError::ZeroDimension));
    }
    if factor == 0 {
        return Err(UpscaleError::Raster(RasterError::InvalidFactor));
    }
    let xs = split_axis(width, cols)?;
    let ys = split_axis(height, rows)?;
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for (r, &(y0, y1)) in ys.iter().enumerate() {
        for (c, &(x0, x1)) in xs.iter().enumerate() {
            let band_left = (c > 0).then(|| band(overlap, xs[c - 1], (x0, x1)));
            let band_right = (c + 1 < xs.len()).then(|| band(overlap, (x0, x1), xs[c + 1]));
            let band_top = (r > 0).then(|| band(overlap, ys[r - 1], (y0, y1)));
            let band_bottom = (r + 1 < ys.len()).then(|| band(overlap, (y0, y1), ys[r + 1]));
            let ex0 = if c > 0 { x0.saturating_sub(overlap) } else { 0 };
            let ex1 = if c + 1 < xs.len() {
                (x1 + overlap).min(width)
            } else {
                width
            };
            let ey0 = if r > 0 { y0.saturating_sub(overlap) } else { 0 };
            let ey1 = if r + 1 < ys.len() {
                (y1 + overlap).min(height)
            } else {
                height
            };
            tiles.push(Tile {
                index: tiles.len(),
                row: r as u32,
                col: c as u32,
                core: PixelRect {
                    x: x0,
                    y: y0,
                    w: x1 - x0,
                    h: y1 - y0,
                },
                expanded: PixelRect {
                    x: ex0,
                    y: ey0,
                    w: ex1 - ex0,
                    h: ey1 - ey0,
                },
                band_left,
                band_right,
                band_top,
                band_bottom,
            });
        }
    }
    Ok(TilePlan {
        width,
        height,
        cols,
        rows,
        overlap,
        factor,
        tiles,
    })
}

/// Weight along one axis at output pixel `p` for a core spanning
/// `[a, b)` output pixels with optional band half-widths.
fn ramp(p: u32, a: f64, b: f64, lo: Option<f64>, hi: Option<f64>) -> f64 {
    let c = p as f64 + 0.5;
    let rise = match lo {
        None => 1.0,
        Some(h) if h <= 0.0 => (c >= a) as u8 as f64,
        Some(h) => ((c - (a - h)) / (2.0 * h)).clamp(0.0, 1.0),
    };
    let fall = match hi {
        None => 1.0,
        Some(h) if h <= 0.0 => (c < b) as u8 as f64,
        Some(h) => (((b + h) - c) / (2.0 * h)).clamp(0.0, 1.0),
    };
    rise * fall
}

fn weight_x(tile: &Tile, f: u32, x: u32) -> f64 {
    let f = f as f64;
    ramp(
        x,
        tile.core.x as f64 * f,
        tile.core.right() as f64 * f,
        tile.band_left.map(|h| h * f),
        tile.band_right.map(|h| h * f),
    )
}

fn weight_y(tile: &Tile, f: u32, y: u32) -> f64 {
    let f = f as f64;
    ramp(
        y,
        tile.core.y as f64 * f,
        tile.core.bottom() as f64 * f,
        tile.band_top.map(|h| h * f),
        tile.band_bottom.map(|h| h * f),
    )
}

/// Unnormalised sum of tile weights at every output pixel, row-major.
pub fn weight_sum_field(plan: &TilePlan) -> Vec<f64> {
    let (ow, oh) = plan.output_dims();
    let f = plan.factor;
    let mut field = vec![0.0; ow as usize * oh as usize];
    for tile in &plan.tiles {
        let e = tile.expanded;
        for y in e.y * f..e.bottom() * f {
            let wy = weight_y(tile, f, y);
            if wy == 0.0 {
                continue;
            }
            for x in e.x * f..e.right() * f {
                field[(y * ow + x) as usize] += wy * weight_x(tile, f, x);
            }
        }
    }
    field
}

pub fn extract_tile(image: &RasterImage, tile: &Tile) -> Result<RasterImage, UpscaleError> {
    let e = tile.expanded;
    Ok(image.crop(e.x, e.y, e.w, e.h)?)
}

/// Feathered reassembly of per-tile outputs, in plan order.
pub fn reassemble(plan: &TilePlan, outputs: &[RasterImage]) -> Result<RasterImage, UpscaleError> {
    if outputs.len() != plan.tiles.len() {
        return Err(UpscaleError::TileCount {
            expected: plan.tiles.len(),
            actual: outputs.len(),
        });
    }
    let f = plan.factor;
    for (tile, out) in plan.tiles.iter().zip(outputs) {
        let expected = (tile.expanded.w * f, tile.expanded.h * f);
        if out.dims() != expected {
            return Err(UpscaleError::TileDimension {
                index: tile.index,
                expected,
                actual: out.dims(),
            });
        }
    }
    let (ow, oh) = plan.output_dims();
    let mut data = vec![0u8; ow as usize * oh as usize * 4];
    let mut acc = vec![0.0f64; ow as usize * 4];
    let mut wsum = vec![0.0f64; ow as usize];
    let mut wx = Vec::new();
    for y in 0..oh {
        acc.fill(0.0);
        wsum.fill(0.0);
        for (tile, out) in plan.tiles.iter().zip(outputs) {
            let e = tile.expanded;
            if y < e.y * f || y >= e.bottom() * f {
                continue;
            }
            let wy = weight_y(tile, f, y);
            if wy == 0.0 {
                continue;
            }
            let ly = y - e.y * f;
            let x0 = e.x * f;
            wx.clear();
            wx.extend((x0..e.right() * f).map(|x| wy * weight_x(tile, f, x)));
            let row =
                &out.data()[(ly * out.width()) as usize * 4..((ly + 1) * out.width()) as usize * 4];
            for (lx, &w) in wx.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let gx = x0 as usize + lx;
                wsum[gx] += w;
                for c in 0..4 {
                    acc[gx * 4 + c] += w * row[lx * 4 + c] as f64;
                }
            }
        }
        let dst = &mut data[(y * ow) as usize * 4..((y + 1) * ow) as usize * 4];
        for x in 0..ow as usize {
            let w = wsum[x];
            for c in 0..4 {
                dst[x * 4 + c] = if w > 0.0 {
                    math::to_u8(acc[x * 4 + c] / w)
                } else {
                    0
                };
            }
        }
    }
    Ok(RasterImage::new(ow, oh, data)?)
}

/// Per-tile upscaler. Implemented for closures and [`ResampleTile`].
pub trait TileTransform {
    fn upscale_tile(
        &self,
        tile: &Tile,
        input: &RasterImage,
        factor: u32,
    ) -> Result<RasterImage, String>;
}

impl<F> TileTransform for F
where
    F: Fn(&Tile, &RasterImage, u32) -> Result<RasterImage, String>,
{
    fn upscale_tile(
        &self,
        tile: &Tile,
        input: &RasterImage,
        factor: u32,
    ) -> Result<RasterImage, String> {
        self(tile, input, factor)
    }
}

/// Interpolating upscaler with no model behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleTile(pub ResampleMethod);

impl TileTransform for ResampleTile {
    fn upscale_tile(
        &self,
        _tile: &Tile,
        input: &RasterImage,
        factor: u32,
    ) -> Result<RasterImage, String> {
        resample(input, Ratio::integer(factor), self.0).map_err(|e| alloc::format!("{e}"))
    }
}

/// Runs `transform` on every tile in order and reassembles. Any tile
/// failure aborts the whole run.
pub fn upscale_tiled<T: TileTransform + ?Sized>(
    image: &RasterImage,
    plan: &TilePlan,
    transform: &T,
) -> Result<RasterImage, UpscaleError> {
    if image.dims() != (plan.width, plan.height) {
        return Err(UpscaleError::PlanMismatch);
    }
    let mut outputs = Vec::with_capacity(plan.tiles.len());
    for tile in &plan.tiles {
        let input = extract_tile(image, tile)?;
        let out = transform
            .upscale_tile(tile, &input, plan.factor)
            .map_err(|message| UpscaleError::TileFailed {
                index: tile.index,
                message,
            })?;
        outputs.push(out);
    }
    reassemble(plan, &outputs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpscaleError {
    InvalidGrid,
    GridTooFine {
        len: u32,
        tiles: u32,
    },
    PlanMismatch,
    TileCount {
        expected: usize,
        actual: usize,
    },
    TileDimension {
        index: usize,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    TileFailed {
        index: usize,
        message: String,
    },
    Raster(RasterError),
}

impl From<RasterError> for UpscaleError {
    fn from(e: RasterError) -> Self {
        UpscaleError::Raster(e)
    }
}

impl fmt::Display for UpscaleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpscaleError::InvalidGrid => f.write_str("tile grid needs at least one row and column"),
            UpscaleError::GridTooFine { len, tiles } => {
                write!(
                    f,
                    "{tiles} tiles over {len} pixels would leave an empty tile"
                )
            }
            UpscaleError::PlanMismatch => f.write_str("image size does not match the tile plan"),
            UpscaleError::TileCount { expected, actual } => {
                write!(f, "expected {expected} tile outputs, got {actual}")
            }
            UpscaleError::TileDimension {
                index,
                expected,
                actual,
            } => write!(
                f,
                "tile {index} returned {}x{}, expected {}x{}",
                actual.0, actual.1, expected.0, expected.1
            ),
            UpscaleError::TileFailed { index, message } => {
                write!(f, "tile {index} failed: {message}")
            }
            UpscaleError::Raster(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for UpscaleError {}
