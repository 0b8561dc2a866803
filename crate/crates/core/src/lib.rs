//! Pure algorithmic core of the situated-blend pipeline.
//!
//! Everything here works on in-memory buffers and needs only `alloc`:
//! chart layout, rasterisation, control-map extraction, placement and
//! composition, tiled upscaling and legibility scoring. File formats,
//! networking and orchestration live in the `sitblend` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chart;
pub mod compose;
pub mod control;
pub mod legibility;
mod math;
pub mod raster;
pub mod upscale;

pub use chart::{ChartSpec, LayoutResult, MarkGeometry};
pub use compose::{ComposedControl, PlacementTransform};
pub use control::{ControlKind, ControlMap};
pub use raster::{RasterImage, Rgba};
