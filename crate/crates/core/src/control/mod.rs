//! Single-channel conditioning maps extracted from rasters and layouts.
//!
//! Border handling is fixed: Gaussian blur reflects about the edge pixel
//! (`dcb|abcd|cba`), Sobel replicates the edge pixel.

mod canny;
mod depth;
mod filter;
mod softedge;
mod thin;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::raster::{RasterError, RasterImage};

pub use canny::{canny, canny_plane, canny_trace, sobel, CannyParams, CannyTrace};
pub use depth::depth_proxy;
pub use filter::{gaussian_blur, gaussian_kernel, GrayPlane};
pub use softedge::{softedge_dog, SoftedgeParams};
pub use thin::{binarize, scribble_thin, zhang_suen_thin, ScribbleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Canny,
    Scribble,
    /// Difference-of-Gaussians soft edges; also used in place of HED.
    #[serde(alias = "hed")]
    Softedge,
    Depth,
}

impl ControlKind {
    pub const ALL: [ControlKind; 4] = [
        ControlKind::Canny,
        ControlKind::Scribble,
        ControlKind::Softedge,
        ControlKind::Depth,
    ];

    /// Canny and scribble maps only hold 0 and 255.
    pub fn is_binary(self) -> bool {
        matches!(self, ControlKind::Canny | ControlKind::Scribble)
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlKind::Canny => "canny",
            ControlKind::Scribble => "scribble",
            ControlKind::Softedge => "softedge",
            ControlKind::Depth => "depth",
        }
    }
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pixel value at or above which a control map pixel counts as an edge.
pub const EDGE_LEVEL: u8 = 128;

/// Single-channel 8-bit conditioning image.
#[derive(Clone, PartialEq, Eq)]
pub struct ControlMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
    kind: ControlKind,
}

impl fmt::Debug for ControlMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlMap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ControlMap {
    pub fn new(
        width: u32,
        height: u32,
        data: Vec<u8>,
        kind: ControlKind,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension);
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(RasterError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(ControlMap {
            width,
            height,
            data,
            kind,
        })
    }

    pub fn blank(width: u32, height: u32, kind: ControlKind) -> Result<Self, RasterError> {
        ControlMap::new(
            width,
            height,
            vec![0; width as usize * height as usize],
            kind,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: ControlKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.get(x, y) >= EDGE_LEVEL
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&v| v >= EDGE_LEVEL).count()
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0 || v == 255)
    }

    /// Opaque grey RGBA rendering of the map.
    pub fn to_image(&self) -> RasterImage {
        RasterImage::from_gray(self.width, self.height, &self.data).expect("dims already checked")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    InvalidThresholds { low: f64, high: f64 },
    InvalidSigma(f64),
    SigmaOrder { sigma1: f64, sigma2: f64 },
    InvalidScribbleThreshold(u8),
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::InvalidThresholds { low, high } => {
                write!(
                    f,
                    "thresholds must satisfy 0 < low <= high <= 255, got low={low} high={high}"
                )
            }
            ControlError::InvalidSigma(s) => write!(f, "sigma must be finite and >= 0, got {s}"),
            ControlError::SigmaOrder { sigma1, sigma2 } => {
                write!(
                    f,
                    "softedge needs 0 < sigma1 < sigma2, got {sigma1} and {sigma2}"
                )
            }
            ControlError::InvalidScribbleThreshold(t) => {
                write!(f, "scribble threshold must be in [1, 254], got {t}")
            }
        }
    }
}

impl core::error::Error for ControlError {}
