use alloc::vec;
use alloc::vec::Vec;

use super::{
    stream, tree, AxisScale, Canvas, ChartError, ChartSpec, Dataset, Idiom, LayoutResult,
    MarkGeometry, Point, Rect, ScaleMeta, Series, Shape, StyleSpec,
};
use crate::math;

pub(crate) fn plot_area(canvas: Canvas, style: &StyleSpec) -> Result<Rect, ChartError> {
    let m = style.margin;
    let w = canvas.width as f64 - 2.0 * m;
    let h = canvas.height as f64 - 2.0 * m;
    if w < 1.0 || h < 1.0 {
        return Err(ChartError::MarginsExceedCanvas { margin: m });
    }
    Ok(Rect::new(m, m, w, h))
}

/// Resolves every mark of `spec` to pixel geometry.
pub fn layout_chart(spec: &ChartSpec) -> Result<LayoutResult, ChartError> {
    spec.validate()?;
    let plot = plot_area(spec.canvas, &spec.style)?;
    match (&spec.data, spec.idiom) {
        (Dataset::Series(series), Idiom::Bar) => Ok(bars(spec, plot, series)),
        (Dataset::Series(series), Idiom::Line) => Ok(lines(spec, plot, series, false)),
        (Dataset::Series(series), Idiom::Area) => Ok(lines(spec, plot, series, true)),
        (Dataset::Series(series), Idiom::Pie) => Ok(pie(spec, plot, &series[0].values)),
        (Dataset::Series(series), Idiom::Streamgraph) => streamgraph(spec, plot, series),
        (Dataset::Points(points), Idiom::Scatter) => Ok(scatter(spec, plot, points)),
        (Dataset::Field(rows), Idiom::VectorField) => Ok(vector_field(spec, plot, rows)),
        (Dataset::Tree(nodes), Idiom::Tree) => {
            tree::tidy_tree_layout(nodes, spec.canvas, &spec.style)
        }
        (data, idiom) => Err(ChartError::DatasetMismatch {
            idiom,
            dataset: data.kind(),
        }),
    }
}

/// `[0, max]` domain, or `[0, 1]` flagged degenerate when everything is zero.
fn value_domain(max: f64, override_max: Option<f64>) -> ([f64; 2], bool) {
    match override_max {
        Some(m) => ([0.0, m], false),
        None if max > 0.0 => ([0.0, max], false),
        None => ([0.0, 1.0], true),
    }
}

fn y_axis(plot: Rect, domain: [f64; 2]) -> AxisScale {
    AxisScale {
        domain,
        range: [plot.bottom(), plot.y],
    }
}

fn series_max(series: &[Series]) -> f64 {
    series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold(0.0, f64::max)
}

fn bars(spec: &ChartSpec, plot: Rect, series: &[Series]) -> LayoutResult {
    let (domain, degenerate) = value_domain(series_max(series), spec.option("domain_max"));
    let y = y_axis(plot, domain);
    let gap = spec.option("bar_gap").unwrap_or(0.2);
    let categories = series[0].values.len();
    let band = plot.width / categories as f64;
    let bar_width = band * (1.0 - gap) / series.len() as f64;

    let mut marks = Vec::with_capacity(categories * series.len());
    for (s, data) in series.iter().enumerate() {
        for (i, &v) in data.values.iter().enumerate() {
            let top = y.map(v.min(domain[1])).max(plot.y);
            let x = plot.x + i as f64 * band + band * gap / 2.0 + s as f64 * bar_width;
            marks.push(MarkGeometry {
                shape: Shape::Rect(Rect::new(x, top, bar_width, plot.bottom() - top)),
                series: s,
                depth_layer: 0,
            });
        }
    }
    LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: Some(AxisScale {
                domain: [0.0, categories as f64],
                range: [plot.x, plot.right()],
            }),
            y: Some(y),
            degenerate,
        },
    }
}

fn x_positions(plot: Rect, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![plot.x + plot.width / 2.0];
    }
    (0..n)
        .map(|i| plot.x + i as f64 * plot.width / (n - 1) as f64)
        .collect()
}

fn lines(spec: &ChartSpec, plot: Rect, series: &[Series], filled: bool) -> LayoutResult {
    let (domain, degenerate) = value_domain(series_max(series), spec.option("domain_max"));
    let y = y_axis(plot, domain);
    let n = series[0].values.len();
    let xs = x_positions(plot, n);

    let marks = series
        .iter()
        .enumerate()
        .map(|(s, data)| {
            let mut points: Vec<Point> = xs
                .iter()
                .zip(&data.values)
                .map(|(&x, &v)| Point::new(x, y.map(v.min(domain[1])).max(plot.y)))
                .collect();
            let shape = if filled {
                let (first, last) = (xs[0], xs[n - 1]);
                if n == 1 {
                    // A single column still encloses an area of the full width.
                    let top = points[0].y;
                    points = vec![Point::new(plot.x, top), Point::new(plot.right(), top)];
                    points.push(Point::new(plot.right(), plot.bottom()));
                    points.push(Point::new(plot.x, plot.bottom()));
                } else {
                    points.push(Point::new(last, plot.bottom()));
                    points.push(Point::new(first, plot.bottom()));
                }
                Shape::Region { points }
            } else {
                Shape::Polyline {
                    points,
                    width: spec.style.stroke_width,
                }
            };
            MarkGeometry {
                shape,
                series: s,
                depth_layer: if filled {
                    s.min(u8::MAX as usize) as u8
                } else {
                    0
                },
            }
        })
        .collect();
    LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: Some(AxisScale {
                domain: [0.0, n.saturating_sub(1).max(1) as f64],
                range: [plot.x, plot.right()],
            }),
            y: Some(y),
            degenerate,
        },
    }
}

fn scatter(spec: &ChartSpec, plot: Rect, points: &[[f64; 2]]) -> LayoutResult {
    let extent = |axis: usize| {
        let lo = points.iter().map(|p| p[axis]).fold(0.0, f64::min);
        let hi = points.iter().map(|p| p[axis]).fold(0.0, f64::max);
        (lo, hi)
    };
    let domain_for = |(lo, hi): (f64, f64), over: Option<f64>| -> ([f64; 2], bool) {
        match over {
            Some(m) => ([lo.min(0.0), m], false),
            None if hi > lo => ([lo, hi], false),
            None => ([0.0, 1.0], true),
        }
    };
    let (xd, xdeg) = domain_for(extent(0), spec.option("x_domain_max"));
    let (yd, ydeg) = domain_for(extent(1), spec.option("domain_max"));
    let x = AxisScale {
        domain: xd,
        range: [plot.x, plot.right()],
    };
    let y = y_axis(plot, yd);
    let radius = spec.style.mark_size / 2.0;
    let marks = points
        .iter()
        .map(|p| {
            let cx = x.map(p[0]).clamp(plot.x, plot.right());
            let cy = y.map(p[1]).clamp(plot.y, plot.bottom());
            MarkGeometry {
                shape: Shape::Point {
                    center: Point::new(cx, cy),
                    radius,
                },
                series: 0,
                depth_layer: 0,
            }
        })
        .collect();
    LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: Some(x),
            y: Some(y),
            degenerate: xdeg || ydeg,
        },
    }
}

fn pie(spec: &ChartSpec, plot: Rect, values: &[f64]) -> LayoutResult {
    let total: f64 = values.iter().sum();
    let center = Point::new(plot.x + plot.width / 2.0, plot.y + plot.height / 2.0);
    let radius = plot.width.min(plot.height) / 2.0;
    let degenerate = total <= 0.0;
    let mut cumulative = 0.0;
    let marks = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let start = if degenerate {
                0.0
            } else {
                cumulative / total * 360.0
            };
            cumulative += v;
            let end = if degenerate {
                0.0
            } else if i + 1 == values.len() {
                360.0
            } else {
                cumulative / total * 360.0
            };
            MarkGeometry {
                shape: Shape::Wedge {
                    center,
                    radius,
                    start_deg: start,
                    end_deg: end,
                },
                series: i,
                depth_layer: 0,
            }
        })
        .collect();
    LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: None,
            y: None,
            degenerate,
        },
    }
}

fn vector_field(spec: &ChartSpec, plot: Rect, rows: &[Vec<[f64; 2]>]) -> LayoutResult {
    let (nr, nc) = (rows.len(), rows[0].len());
    let (cw, ch) = (plot.width / nc as f64, plot.height / nr as f64);
    let max_mag = rows
        .iter()
        .flatten()
        .map(|v| math::hypot(v[0], v[1]))
        .fold(0.0, f64::max);
    let cell = cw.min(ch);
    let max_len = cell * spec.option("arrow_scale").unwrap_or(0.9);

    let mut marks = Vec::with_capacity(nr * nc);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let center = Point::new(
                plot.x + (c as f64 + 0.5) * cw,
                plot.y + (r as f64 + 0.5) * ch,
            );
            let mag = math::hypot(v[0], v[1]);
            let (tail, head) = if max_mag > 0.0 && mag > 0.0 {
                let len = (mag / max_mag * max_len).min(cell);
                // Data dy points up; screen y points down.
                let (ux, uy) = (v[0] / mag, -v[1] / mag);
                let half = len / 2.0;
                (
                    Point::new(center.x - ux * half, center.y - uy * half),
                    Point::new(center.x + ux * half, center.y + uy * half),
                )
            } else {
                (center, center)
            };
            marks.push(MarkGeometry {
                shape: Shape::Arrow {
                    tail,
                    head,
                    width: spec.style.stroke_width,
                },
                series: 0,
                depth_layer: 0,
            });
        }
    }
    LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: Some(AxisScale {
                domain: [0.0, nc as f64],
                range: [plot.x, plot.right()],
            }),
            y: Some(AxisScale {
                domain: [0.0, nr as f64],
                range: [plot.y, plot.bottom()],
            }),
            degenerate: max_mag == 0.0,
        },
    }
}

fn streamgraph(
    spec: &ChartSpec,
    plot: Rect,
    series: &[Series],
) -> Result<LayoutResult, ChartError> {
    let values: Vec<Vec<f64>> = series.iter().map(|s| s.values.clone()).collect();
    let layers = stream::streamgraph_baseline(&values)?;
    let peak = layers.totals().into_iter().fold(0.0, f64::max);
    let degenerate = peak <= 0.0;
    let half = if degenerate { 0.5 } else { peak / 2.0 };
    let y = AxisScale {
        domain: [-half, half],
        range: [plot.bottom(), plot.y],
    };

    let n = layers.len_x();
    let (xs, cols): (Vec<f64>, Vec<usize>) = if n == 1 {
        (vec![plot.x, plot.right()], vec![0, 0])
    } else {
        (x_positions(plot, n), (0..n).collect())
    };
    let marks = layers
        .spans
        .iter()
        .enumerate()
        .map(|(k, spans)| {
            let mut points: Vec<Point> = xs
                .iter()
                .zip(&cols)
                .map(|(&x, &c)| Point::new(x, y.map(spans[c][1])))
                .collect();
            points.extend(
                xs.iter()
                    .zip(&cols)
                    .rev()
                    .map(|(&x, &c)| Point::new(x, y.map(spans[c][0]))),
            );
            MarkGeometry {
                shape: Shape::Region { points },
                series: k,
                depth_layer: 0,
            }
        })
        .collect();
    Ok(LayoutResult {
        idiom: spec.idiom,
        canvas: spec.canvas,
        plot_area: plot,
        marks,
        scale: ScaleMeta {
            x: Some(AxisScale {
                domain: [0.0, n.saturating_sub(1).max(1) as f64],
                range: [plot.x, plot.right()],
            }),
            y: Some(y),
            degenerate,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Canvas, Series, TreeNode};
    use alloc::string::String;

    fn series_spec(idiom: Idiom, values: &[f64]) -> ChartSpec {
        ChartSpec::new(
            idiom,
            Canvas::new(200, 160),
            Dataset::Series(vec![Series {
                label: "a".into(),
                values: values.to_vec(),
            }]),
        )
    }

    fn rect(m: &MarkGeometry) -> Rect {
        match m.shape {
            Shape::Rect(r) => r,
            _ => panic!("not a rect"),
        }
    }

    #[test]
    fn bar_heights_follow_linear_scale() {
        let layout = layout_chart(&series_spec(Idiom::Bar, &[3.0, 7.0, 5.0])).unwrap();
        assert_eq!(layout.plot_area.height, 140.0);
        // Oracle: v / 7 * 140.
        let expected: Vec<f64> = [3.0, 7.0, 5.0].iter().map(|v| v / 7.0 * 140.0).collect();
        for (m, e) in layout.marks.iter().zip(&expected) {
            assert!((rect(m).height - e).abs() < 1e-9);
        }
        assert!((expected[0] - 60.0).abs() < 1e-12);
        assert!((expected[2] - 100.0).abs() < 1e-12);
        let y = layout.scale.y.unwrap();
        assert_eq!(y.range, [150.0, 10.0]);
        assert_eq!(y.domain, [0.0, 7.0]);
    }

    #[test]
    fn all_zero_forces_unit_domain() {
        let layout = layout_chart(&series_spec(Idiom::Bar, &[0.0, 0.0])).unwrap();
        assert!(layout.scale.degenerate);
        assert_eq!(layout.scale.y.unwrap().domain, [0.0, 1.0]);
        assert!(layout.marks.iter().all(|m| rect(m).height == 0.0));
    }

    #[test]
    fn pie_wedges_proportional_from_twelve() {
        let layout = layout_chart(&series_spec(Idiom::Pie, &[1.0, 1.0, 2.0])).unwrap();
        let spans: Vec<(f64, f64)> = layout
            .marks
            .iter()
            .map(|m| match m.shape {
                Shape::Wedge {
                    start_deg, end_deg, ..
                } => (start_deg, end_deg),
                _ => panic!(),
            })
            .collect();
        assert_eq!(spans, vec![(0.0, 90.0), (90.0, 180.0), (180.0, 360.0)]);
    }

    #[test]
    fn zero_field_gives_point_arrows() {
        let spec = ChartSpec::new(
            Idiom::VectorField,
            Canvas::new(100, 100),
            Dataset::Field(vec![vec![[0.0, 0.0]; 3]; 2]),
        );
        let layout = layout_chart(&spec).unwrap();
        assert_eq!(layout.marks.len(), 6);
        for m in &layout.marks {
            match m.shape {
                Shape::Arrow { tail, head, .. } => assert_eq!(tail, head),
                _ => panic!(),
            }
        }
    }

    #[test]
    fn arrow_length_capped_by_cell() {
        let mut spec = ChartSpec::new(
            Idiom::VectorField,
            Canvas::new(120, 120),
            Dataset::Field(vec![vec![[3.0, 4.0], [0.0, 1.0]]]),
        );
        spec.options.insert("arrow_scale".into(), 1.0);
        let layout = layout_chart(&spec).unwrap();
        let len = |m: &MarkGeometry| match m.shape {
            Shape::Arrow { tail, head, .. } => math::hypot(head.x - tail.x, head.y - tail.y),
            _ => panic!(),
        };
        // Cells are 50 px wide, 100 px tall.
        assert!((len(&layout.marks[0]) - 50.0).abs() < 1e-9);
        assert!((len(&layout.marks[1]) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn margins_too_large() {
        let mut spec = series_spec(Idiom::Bar, &[1.0]);
        spec.style.margin = 90.0;
        assert!(matches!(
            layout_chart(&spec),
            Err(ChartError::MarginsExceedCanvas { .. })
        ));
    }

    #[test]
    fn tree_dispatch() {
        let nodes = vec![
            TreeNode {
                label: String::from("r"),
                parent: None,
            },
            TreeNode {
                label: String::from("a"),
                parent: Some(0),
            },
        ];
        let spec = ChartSpec::new(Idiom::Tree, Canvas::new(100, 100), Dataset::Tree(nodes));
        let layout = layout_chart(&spec).unwrap();
        assert_eq!(layout.marks.len(), 3);
    }
}
