//! Declarative chart description and mark geometry.
//!
//! A [`ChartSpec`] names one idiom, its dataset, a canvas and a style.
//! [`layout_chart`] resolves it into positioned [`MarkGeometry`] values
//! which the raster and control modules consume.

mod geometry;
mod layout;
mod stream;
mod tree;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::raster::Rgba;

pub use geometry::{Coverage, Point, Rect, Shape, ShapeKind};
pub use layout::layout_chart;
pub use stream::{streamgraph_baseline, StreamLayers};
pub use tree::{tidy_tree_layout, tree_slots, TreeSlot};

/// Smallest accepted canvas side, in pixels.
pub const MIN_CANVAS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Idiom {
    Bar,
    Line,
    Scatter,
    Area,
    Pie,
    VectorField,
    Tree,
    Streamgraph,
}

impl Idiom {
    pub fn name(self) -> &'static str {
        match self {
            Idiom::Bar => "bar",
            Idiom::Line => "line",
            Idiom::Scatter => "scatter",
            Idiom::Area => "area",
            Idiom::Pie => "pie",
            Idiom::VectorField => "vector_field",
            Idiom::Tree => "tree",
            Idiom::Streamgraph => "streamgraph",
        }
    }

    /// Option keys accepted for this idiom.
    pub fn option_keys(self) -> &'static [&'static str] {
        match self {
            Idiom::Bar => &["bar_gap", "domain_max"],
            Idiom::Line | Idiom::Area => &["domain_max"],
            Idiom::Scatter => &["domain_max", "x_domain_max"],
            Idiom::VectorField => &["arrow_scale"],
            Idiom::Pie | Idiom::Tree | Idiom::Streamgraph => &[],
        }
    }

    fn dataset_kind(self) -> &'static str {
        match self {
            Idiom::Bar | Idiom::Line | Idiom::Area | Idiom::Pie | Idiom::Streamgraph => "series",
            Idiom::Scatter => "points",
            Idiom::VectorField => "field",
            Idiom::Tree => "tree",
        }
    }
}

impl fmt::Display for Idiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub const fn new(width: u32, height: u32) -> Self {
        Canvas { width, height }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeNode {
    pub label: String,
    /// Index of the parent node; `None` for the root.
    #[serde(default)]
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Series(Vec<Series>),
    Points(Vec<[f64; 2]>),
    /// Row-major grid of `(dx, dy)` vectors, `dy` pointing up.
    Field(Vec<Vec<[f64; 2]>>),
    Tree(Vec<TreeNode>),
}

impl Dataset {
    pub fn kind(&self) -> &'static str {
        match self {
            Dataset::Series(_) => "series",
            Dataset::Points(_) => "points",
            Dataset::Field(_) => "field",
            Dataset::Tree(_) => "tree",
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Dataset::Series(s) => s.is_empty() || s.iter().all(|s| s.values.is_empty()),
            Dataset::Points(p) => p.is_empty(),
            Dataset::Field(f) => f.is_empty() || f.iter().all(|r| r.is_empty()),
            Dataset::Tree(t) => t.is_empty(),
        }
    }
}

/// Default series colours. All are light enough that the black outline
/// between two adjacent filled marks yields a strong edge on both sides.
pub const DEFAULT_PALETTE: [Rgba; 6] = [
    Rgba([170, 210, 245, 255]),
    Rgba([250, 200, 140, 255]),
    Rgba([175, 225, 165, 255]),
    Rgba([250, 185, 190, 255]),
    Rgba([215, 200, 245, 255]),
    Rgba([245, 225, 140, 255]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleSpec {
    /// Line width for polylines and arrows, and the inner outline of
    /// filled marks.
    pub stroke_width: f64,
    /// Diameter of point marks.
    pub mark_size: f64,
    pub margin: f64,
    pub stroke_color: Rgba,
    pub palette: Vec<Rgba>,
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec {
            stroke_width: 2.0,
            mark_size: 6.0,
            margin: 10.0,
            stroke_color: Rgba::BLACK,
            palette: DEFAULT_PALETTE.to_vec(),
        }
    }
}

impl StyleSpec {
    pub fn series_color(&self, series: usize) -> Rgba {
        if self.palette.is_empty() {
            self.stroke_color
        } else {
            self.palette[series % self.palette.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub idiom: Idiom,
    pub canvas: Canvas,
    pub data: Dataset,
    #[serde(default)]
    pub style: StyleSpec,
    #[serde(default)]
    pub options: BTreeMap<String, f64>,
}

impl ChartSpec {
    pub fn new(idiom: Idiom, canvas: Canvas, data: Dataset) -> Self {
        ChartSpec {
            idiom,
            canvas,
            data,
            style: StyleSpec::default(),
            options: BTreeMap::new(),
        }
    }

    pub fn option(&self, key: &str) -> Option<f64> {
        self.options.get(key).copied()
    }

    /// Checks every invariant of the spec.
    pub fn validate(&self) -> Result<(), ChartError> {
        if self.canvas.width < MIN_CANVAS || self.canvas.height < MIN_CANVAS {
            return Err(ChartError::CanvasTooSmall {
                width: self.canvas.width,
                height: self.canvas.height,
            });
        }
        validate_style(&self.style)?;
        if self.idiom.dataset_kind() != self.data.kind() {
            return Err(ChartError::DatasetMismatch {
                idiom: self.idiom,
                dataset: self.data.kind(),
            });
        }
        if self.data.is_empty() {
            return Err(ChartError::EmptyData);
        }
        match &self.data {
            Dataset::Series(series) => {
                let len = series[0].values.len();
                for s in series {
                    if s.values.len() != len {
                        return Err(ChartError::RaggedSeries);
                    }
                    for &v in &s.values {
                        if !v.is_finite() {
                            return Err(ChartError::NonFinite);
                        }
                        if v < 0.0 {
                            return Err(ChartError::NegativeValue);
                        }
                    }
                }
                if self.idiom == Idiom::Pie && series.len() != 1 {
                    return Err(ChartError::PieSeriesCount(series.len()));
                }
            }
            Dataset::Points(points) => {
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ChartError::NonFinite);
                }
            }
            Dataset::Field(rows) => {
                let cols = rows[0].len();
                if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(ChartError::RaggedGrid);
                }
                if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
                    return Err(ChartError::NonFinite);
                }
            }
            Dataset::Tree(nodes) => {
                tree::check_tree(nodes)?;
            }
        }
        let allowed = self.idiom.option_keys();
        for (key, &value) in &self.options {
            if !allowed.contains(&key.as_str()) {
                return Err(ChartError::UnknownOption {
                    idiom: self.idiom,
                    key: key.clone(),
                });
            }
            let ok = value.is_finite()
                && match key.as_str() {
                    "bar_gap" => (0.0..1.0).contains(&value),
                    "arrow_scale" => value > 0.0 && value <= 1.0,
                    _ => value > 0.0,
                };
            if !ok {
                return Err(ChartError::InvalidOption {
                    key: key.clone(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Inserts the data-independent option defaults for the idiom.
    pub fn fill_defaults(&mut self) {
        let defaults: &[(&str, f64)] = match self.idiom {
            Idiom::Bar => &[("bar_gap", 0.2)],
            Idiom::VectorField => &[("arrow_scale", 0.9)],
            _ => &[],
        };
        for &(key, value) in defaults {
            self.options.entry(String::from(key)).or_insert(value);
        }
    }
}

fn validate_style(style: &StyleSpec) -> Result<(), ChartError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !ok(style.stroke_width) {
        return Err(ChartError::InvalidStyle("stroke_width must be positive"));
    }
    if !ok(style.mark_size) {
        return Err(ChartError::InvalidStyle("mark_size must be positive"));
    }
    if !style.margin.is_finite() || style.margin < 0.0 {
        return Err(ChartError::InvalidStyle("margin must be non-negative"));
    }
    Ok(())
}

/// One axis of a linear scale, in data units and pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    pub domain: [f64; 2],
    pub range: [f64; 2],
}

impl AxisScale {
    pub fn map(&self, v: f64) -> f64 {
        let t = (v - self.domain[0]) / (self.domain[1] - self.domain[0]);
        self.range[0] + t * (self.range[1] - self.range[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScaleMeta {
    pub x: Option<AxisScale>,
    pub y: Option<AxisScale>,
    /// Set when all data was zero and the domain was forced to `[0, 1]`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkGeometry {
    pub shape: Shape,
    pub series: usize,
    /// 0 is frontmost.
    pub depth_layer: u8,
}

impl MarkGeometry {
    pub fn kind(&self) -> ShapeKind {
        self.shape.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub idiom: Idiom,
    pub canvas: Canvas,
    pub plot_area: Rect,
    pub marks: Vec<MarkGeometry>,
    pub scale: ScaleMeta,
}

impl LayoutResult {
    pub fn empty(idiom: Idiom, canvas: Canvas) -> Self {
        LayoutResult {
            idiom,
            canvas,
            plot_area: Rect::new(0.0, 0.0, canvas.width as f64, canvas.height as f64),
            marks: vec![],
            scale: ScaleMeta::default(),
        }
    }

    pub fn max_depth_layer(&self) -> Option<u8> {
        self.marks.iter().map(|m| m.depth_layer).max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartError {
    CanvasTooSmall { width: u32, height: u32 },
    MarginsExceedCanvas { margin: f64 },
    EmptyData,
    DatasetMismatch { idiom: Idiom, dataset: &'static str },
    RaggedSeries,
    RaggedGrid,
    NegativeValue,
    NonFinite,
    PieSeriesCount(usize),
    UnknownOption { idiom: Idiom, key: String },
    InvalidOption { key: String, value: f64 },
    InvalidStyle(&'static str),
    TreeRoots(usize),
    TreeParentOutOfRange { node: usize, parent: usize },
    TreeCycle { node: usize },
}

impl fmt::Display for ChartError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartError::CanvasTooSmall { width, height } => write!(
                f,
                "canvas {width}x{height} is smaller than {MIN_CANVAS}x{MIN_CANVAS}"
            ),
            ChartError::MarginsExceedCanvas { margin } => {
                write!(f, "margin {margin} px leaves no plot area")
            }
            ChartError::EmptyData => f.write_str("dataset is empty"),
            ChartError::DatasetMismatch { idiom, dataset } => write!(
                f,
                "idiom `{idiom}` expects {} data, got {dataset}",
                idiom.dataset_kind()
            ),
            ChartError::RaggedSeries => f.write_str("series lengths differ"),
            ChartError::RaggedGrid => f.write_str("vector field grid is not rectangular"),
            ChartError::NegativeValue => f.write_str("series values must be non-negative"),
            ChartError::NonFinite => f.write_str("data contains a non-finite number"),
            ChartError::PieSeriesCount(n) => {
                write!(f, "pie charts take exactly one series, got {n}")
            }
            ChartError::UnknownOption { idiom, key } => {
                write!(f, "unknown option `{key}` for idiom `{idiom}`")
            }
            ChartError::InvalidOption { key, value } => {
                write!(f, "option `{key}` has invalid value {value}")
            }
            ChartError::InvalidStyle(msg) => write!(f, "invalid style: {msg}"),
            ChartError::TreeRoots(n) => write!(f, "tree must have exactly one root, found {n}"),
            ChartError::TreeParentOutOfRange { node, parent } => {
                write!(f, "node {node} references missing parent {parent}")
            }
            ChartError::TreeCycle { node } => write!(f, "cycle detected at node {node}"),
        }
    }
}

impl core::error::Error for ChartError {}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(values: &[f64]) -> ChartSpec {
        ChartSpec::new(
            Idiom::Bar,
            Canvas::new(200, 160),
            Dataset::Series(vec![Series {
                label: "a".into(),
                values: values.to_vec(),
            }]),
        )
    }

    #[test]
    fn pie_with_points_is_a_mismatch() {
        let spec = ChartSpec::new(
            Idiom::Pie,
            Canvas::new(100, 100),
            Dataset::Points(vec![[1.0, 2.0]]),
        );
        assert!(matches!(
            spec.validate(),
            Err(ChartError::DatasetMismatch {
                idiom: Idiom::Pie,
                dataset: "points"
            })
        ));
    }

    #[test]
    fn rejects_small_canvas_and_bad_values() {
        let mut spec = bar(&[1.0]);
        spec.canvas = Canvas::new(15, 100);
        assert!(matches!(
            spec.validate(),
            Err(ChartError::CanvasTooSmall { .. })
        ));
        assert_eq!(bar(&[1.0, -1.0]).validate(), Err(ChartError::NegativeValue));
        assert_eq!(bar(&[]).validate(), Err(ChartError::EmptyData));
    }

    #[test]
    fn option_keys_are_closed() {
        let mut spec = bar(&[1.0]);
        spec.options.insert("arrow_scale".into(), 0.5);
        assert!(matches!(
            spec.validate(),
            Err(ChartError::UnknownOption { .. })
        ));
        let mut spec = bar(&[1.0]);
        spec.options.insert("bar_gap".into(), 1.5);
        assert!(matches!(
            spec.validate(),
            Err(ChartError::InvalidOption { .. })
        ));
    }

    #[test]
    fn ragged_series_rejected() {
        let spec = ChartSpec::new(
            Idiom::Line,
            Canvas::new(100, 100),
            Dataset::Series(vec![
                Series {
                    label: "a".into(),
                    values: vec![1.0, 2.0],
                },
                Series {
                    label: "b".into(),
                    values: vec![1.0],
                },
            ]),
        );
        assert_eq!(spec.validate(), Err(ChartError::RaggedSeries));
    }
}
