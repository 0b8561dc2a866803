//! The nine chart/environment pairings used as fixtures. Backgrounds
//! are procedural stand-ins for the photographs; prompts are our own.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sitblend_core::chart::{Canvas, ChartSpec, Dataset, Idiom, Series, TreeNode};
use sitblend_core::compose::ComposeMode;
use sitblend_core::{RasterImage, Rgba};

use crate::error::{Stage, StageError};
use crate::pipeline::PipelineConfig;
use crate::png_io::write_png;
use crate::spec_format::serialize_spec;

pub const BG_WIDTH: u32 = 320;
pub const BG_HEIGHT: u32 = 240;

pub struct Fixture {
    pub name: &'static str,
    pub mode: ComposeMode,
    pub spec: ChartSpec,
    pub background: RasterImage,
    pub environment: &'static str,
    pub chart: &'static str,
}

struct Painter {
    img: RasterImage,
}

impl Painter {
    fn new(c: Rgba) -> Self {
        Painter {
            img: RasterImage::filled(BG_WIDTH, BG_HEIGHT, c).expect("fixed dims"),
        }
    }

    fn fill(&mut self, inside: impl Fn(f64, f64) -> bool, c: Rgba) {
        for y in 0..BG_HEIGHT {
            for x in 0..BG_WIDTH {
                if inside(x as f64 + 0.5, y as f64 + 0.5) {
                    self.img.set_pixel(x, y, c);
                }
            }
        }
    }

    fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgba) {
        self.fill(|x, y| x >= x0 && x < x1 && y >= y0 && y < y1, c);
    }

    fn shade(&mut self, f: impl Fn(f64, f64) -> Option<Rgba>) {
        for y in 0..BG_HEIGHT {
            for x in 0..BG_WIDTH {
                if let Some(c) = f(x as f64 + 0.5, y as f64 + 0.5) {
                    self.img.set_pixel(x, y, c);
                }
            }
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, c: [u8; 3], amount: i32) -> Rgba {
    let mut v = [0u8; 3];
    for i in 0..3 {
        v[i] = (c[i] as i32 + rng.random_range(-amount..=amount)).clamp(0, 255) as u8;
    }
    Rgba::rgb(v[0], v[1], v[2])
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> Rgba {
    let m =
        |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t.clamp(0.0, 1.0)).round() as u8;
    Rgba::rgb(m(0), m(1), m(2))
}

fn sky(c: &mut Painter, horizon: f64) {
    c.shade(|_, y| (y < horizon).then(|| lerp([110, 160, 220], [200, 225, 245], y / horizon)));
}

fn brick_wall(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(196, 190, 178));
    let (bw, bh) = (36.0, 14.0);
    let mut row = 0;
    let mut y = 0.0;
    while y < BG_HEIGHT as f64 {
        let shift = if row % 2 == 0 { 0.0 } else { bw / 2.0 };
        let mut x = -shift;
        while x < BG_WIDTH as f64 {
            let col = jitter(rng, [150, 62, 44], 18);
            c.rect(x + 1.5, y + 1.5, x + bw - 1.5, y + bh - 1.5, col);
            x += bw;
        }
        y += bh;
        row += 1;
    }
    c.img
}

fn facade(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(214, 200, 170));
    sky(&mut c, 30.0);
    for fy in 0..5 {
        for fx in 0..8 {
            let x = 14.0 + fx as f64 * 38.0;
            let y = 44.0 + fy as f64 * 38.0;
            let glass = jitter(rng, [60, 80, 105], 12);
            c.rect(x, y, x + 22.0, y + 26.0, glass);
            c.rect(
                x - 2.0,
                y + 26.0,
                x + 24.0,
                y + 29.0,
                Rgba::rgb(235, 230, 220),
            );
        }
    }
    c.img
}

fn open_field(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(90, 140, 60));
    sky(&mut c, 90.0);
    let stripes: Vec<i32> = (0..BG_HEIGHT).map(|_| rng.random_range(-10..=10)).collect();
    c.shade(|_, y| {
        (y >= 90.0).then(|| {
            let d = stripes[y as usize];
            let base = lerp([120, 160, 70], [70, 120, 45], (y - 90.0) / 150.0).0;
            Rgba::rgb(base[0], (base[1] as i32 + d).clamp(0, 255) as u8, base[2])
        })
    });
    c.img
}

fn forest(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(58, 88, 48));
    c.shade(|_, y| Some(lerp([150, 180, 150], [40, 70, 40], y / BG_HEIGHT as f64)));
    for _ in 0..22 {
        let x = rng.random_range(0.0..BG_WIDTH as f64);
        let w = rng.random_range(5.0..12.0);
        let col = jitter(rng, [80, 55, 35], 12);
        c.rect(x, 0.0, x + w, BG_HEIGHT as f64, col);
    }
    c.img
}

fn federation_square(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(120, 120, 120));
    sky(&mut c, 40.0);
    let size = 28.0;
    let palette = [
        [196, 170, 120],
        [150, 150, 155],
        [90, 110, 130],
        [210, 200, 180],
    ];
    let picks: Vec<usize> = (0..400)
        .map(|_| rng.random_range(0..palette.len()))
        .collect();
    c.shade(|x, y| {
        if y < 40.0 {
            return None;
        }
        let (cx, cy) = ((x / size).floor(), ((y - 40.0) / size).floor());
        let (fx, fy) = (x / size - cx, (y - 40.0) / size - cy);
        let upper = fx + fy < 1.0;
        let k = ((cy as usize * 13 + cx as usize) * 2 + upper as usize) % picks.len();
        Some(lerp(palette[picks[k]], palette[picks[k]], 0.0))
    });
    c.img
}

fn apostles(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(40, 90, 130));
    sky(&mut c, 100.0);
    c.shade(|_, y| (y >= 100.0).then(|| lerp([60, 120, 160], [25, 70, 110], (y - 100.0) / 140.0)));
    for i in 0..5 {
        let cx = 30.0 + i as f64 * 62.0 + rng.random_range(-8.0..8.0);
        let top = rng.random_range(55.0..85.0);
        let half = rng.random_range(10.0..18.0);
        let col = jitter(rng, [200, 165, 115], 10);
        c.fill(
            |x, y| y >= top && y < 150.0 && (x - cx).abs() < half + (y - top) * 0.15,
            col,
        );
    }
    c.img
}

fn opera_house(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(30, 80, 120));
    sky(&mut c, 150.0);
    c.rect(0.0, 150.0, BG_WIDTH as f64, 170.0, Rgba::rgb(170, 140, 110));
    for i in 0..4 {
        let x0 = 50.0 + i as f64 * 55.0;
        let h = 70.0 - i as f64 * 8.0 + rng.random_range(-4.0..4.0);
        let col = jitter(rng, [240, 238, 228], 5);
        c.fill(
            |x, y| {
                let t = (x - x0) / 60.0;
                (0.0..1.0).contains(&t)
                    && y < 150.0
                    && y > 150.0 - h * (1.0 - t) * (0.4 + t).min(1.0) * 1.4
            },
            col,
        );
    }
    c.img
}

fn ruin_columns(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(150, 120, 80));
    sky(&mut c, 170.0);
    c.rect(
        0.0,
        170.0,
        BG_WIDTH as f64,
        BG_HEIGHT as f64,
        Rgba::rgb(120, 110, 70),
    );
    for i in 0..4 {
        let x = 40.0 + i as f64 * 72.0;
        let col = jitter(rng, [185, 150, 95], 8);
        c.rect(x, 60.0, x + 26.0, 175.0, col);
        c.rect(x - 4.0, 52.0, x + 30.0, 60.0, Rgba::rgb(170, 135, 85));
    }
    c.img
}

fn grass(rng: &mut ChaCha8Rng) -> RasterImage {
    let mut c = Painter::new(Rgba::rgb(70, 125, 50));
    for _ in 0..900 {
        let x0 = rng.random_range(0.0..BG_WIDTH as f64);
        let y0 = rng.random_range(0.0..BG_HEIGHT as f64);
        let len = rng.random_range(4.0..10.0);
        let slant = rng.random_range(-0.5..0.5);
        let col = jitter(rng, [80, 140, 55], 25);
        for s in 0..(len as u32) {
            let (x, y) = (x0 + slant * s as f64, y0 - s as f64);
            if x >= 0.0 && y >= 0.0 && x < BG_WIDTH as f64 && y < BG_HEIGHT as f64 {
                c.img.set_pixel(x as u32, y as u32, col);
            }
        }
    }
    c.img
}

fn series(rows: &[&[f64]]) -> Dataset {
    Dataset::Series(
        rows.iter()
            .enumerate()
            .map(|(i, v)| Series {
                label: format!("series {i}"),
                values: v.to_vec(),
            })
            .collect(),
    )
}

fn spec(idiom: Idiom, w: u32, h: u32, data: Dataset) -> ChartSpec {
    let mut s = ChartSpec::new(idiom, Canvas::new(w, h), data);
    // Line-like marks need some width to survive edge extraction.
    if matches!(idiom, Idiom::Line | Idiom::Tree | Idiom::VectorField) {
        s.style.stroke_width = 4.0;
    }
    if matches!(idiom, Idiom::Pie | Idiom::Streamgraph) {
        s.style.stroke_width = 3.0;
    }
    if idiom == Idiom::Scatter {
        s.style.mark_size = 8.0;
    }
    s.fill_defaults();
    s
}

/// All nine fixtures, generated deterministically.
pub fn fixtures() -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scatter_pts: Vec<[f64; 2]> = (0..24)
        .map(|i| {
            let x = i as f64 * 4.0 + 2.0;
            [x, 10.0 + 0.8 * x + ((i * 37 % 11) as f64 - 5.0) * 3.0]
        })
        .collect();
    let tree = {
        let parents = [
            None,
            Some(0),
            Some(0),
            Some(1),
            Some(1),
            Some(2),
            Some(2),
            Some(2),
            Some(3),
            Some(5),
        ];
        Dataset::Tree(
            parents
                .iter()
                .enumerate()
                .map(|(i, &p)| TreeNode {
                    label: format!("n{i}"),
                    parent: p,
                })
                .collect(),
        )
    };
    let field = Dataset::Field(
        (0..6)
            .map(|r| {
                (0..8)
                    .map(|c| {
                        let (x, y) = (c as f64 - 3.5, r as f64 - 2.5);
                        [-y * 0.3 + 0.6, x * 0.3]
                    })
                    .collect()
            })
            .collect(),
    );
    vec![
        Fixture {
            name: "scatter_brick_wall",
            mode: ComposeMode::Additive,
            spec: spec(Idiom::Scatter, 200, 160, Dataset::Points(scatter_pts)),
            background: brick_wall(&mut rng),
            environment: "an old red brick wall",
            chart: "small round stones embedded in it",
        },
        Fixture {
            name: "line_facade",
            mode: ComposeMode::Additive,
            spec: spec(
                Idiom::Line,
                200,
                160,
                series(&[
                    &[3.0, 5.0, 4.0, 7.0, 6.0, 9.0, 8.0, 11.0],
                    &[2.0, 2.5, 3.5, 3.0, 4.5, 4.0, 5.5, 6.0],
                ]),
            ),
            background: facade(&mut rng),
            environment: "a modern office facade",
            chart: "metal pipes running across it",
        },
        Fixture {
            name: "bar_columns",
            mode: ComposeMode::Blending,
            spec: spec(Idiom::Bar, 200, 160, series(&[&[5.0, 9.0, 7.0, 3.0, 6.0]])),
            background: ruin_columns(&mut rng),
            environment: "ancient sandstone ruins under a blue sky",
            chart: "stone pillars of different heights",
        },
        Fixture {
            name: "vector_field_grass",
            mode: ComposeMode::Blending,
            spec: spec(Idiom::VectorField, 240, 180, field),
            background: grass(&mut rng),
            environment: "a top-down view of a lawn",
            chart: "grass blown by the wind",
        },
        Fixture {
            name: "tree_field",
            mode: ComposeMode::Additive,
            spec: spec(Idiom::Tree, 200, 160, tree),
            background: open_field(&mut rng),
            environment: "an open grassy field",
            chart: "a single bare tree",
        },
        Fixture {
            name: "streamgraph_forest",
            mode: ComposeMode::Additive,
            spec: spec(
                Idiom::Streamgraph,
                240,
                160,
                series(&[
                    &[2.0, 3.0, 4.0, 3.0, 5.0, 6.0, 4.0, 3.0],
                    &[1.0, 2.0, 2.0, 4.0, 3.0, 2.0, 3.0, 4.0],
                    &[3.0, 2.0, 1.0, 2.0, 2.0, 3.0, 4.0, 2.0],
                ]),
            ),
            background: forest(&mut rng),
            environment: "a dense pine forest",
            chart: "a winding stream",
        },
        Fixture {
            name: "bar_federation_square",
            mode: ComposeMode::Blending,
            spec: spec(
                Idiom::Bar,
                200,
                160,
                series(&[&[2.0, 4.0, 7.0, 9.0, 8.0, 6.0, 3.0]]),
            ),
            background: federation_square(&mut rng),
            environment: "an angular building clad in triangular panels",
            chart: "towers of panels rising from it",
        },
        Fixture {
            name: "area_apostles",
            mode: ComposeMode::Additive,
            spec: spec(
                Idiom::Area,
                240,
                160,
                series(&[&[4.0, 6.0, 5.0, 8.0, 7.0, 9.0, 6.0, 5.0, 7.0, 4.0]]),
            ),
            background: apostles(&mut rng),
            environment: "limestone stacks in the sea",
            chart: "a rocky coastline",
        },
        Fixture {
            name: "pie_opera_house",
            mode: ComposeMode::Blending,
            spec: spec(Idiom::Pie, 160, 160, series(&[&[46.0, 28.0, 16.0, 10.0]])),
            background: opera_house(&mut rng),
            environment: "a harbour with a white shell-roofed opera house",
            chart: "the shells arranged in a circle",
        },
    ]
}

/// Writes each fixture to `<dir>/<name>/` (chart.json, background.png,
/// config.json) and returns the configs, with absolute paths and runs
/// going to `out_dir`.
pub fn write_fixtures(
    dir: &Path,
    out_dir: &Path,
) -> Result<Vec<(String, PipelineConfig)>, StageError> {
    let werr = |e: &dyn std::fmt::Display| StageError::new(Stage::Write, e.to_string());
    let mut out = Vec::new();
    for f in fixtures() {
        let d = dir.join(f.name);
        std::fs::create_dir_all(&d).map_err(|e| werr(&e))?;
        std::fs::write(d.join("chart.json"), serialize_spec(&f.spec)).map_err(|e| werr(&e))?;
        write_png(&d.join("background.png"), &f.background).map_err(|e| werr(&e))?;
        let mut config = PipelineConfig::default();
        config.compose.mode = f.mode;
        config.prompt.environment_description = f.environment.into();
        config.prompt.chart_description = f.chart.into();
        config.spec_path = PathBuf::from("chart.json");
        config.background_path = PathBuf::from("background.png");
        config.out_dir = PathBuf::from("runs");
        std::fs::write(d.join("config.json"), config.to_json()).map_err(|e| werr(&e))?;
        config.spec_path = d.join("chart.json");
        config.background_path = d.join("background.png");
        config.out_dir = out_dir.to_path_buf();
        out.push((f.name.to_string(), config));
    }
    Ok(out)
}
