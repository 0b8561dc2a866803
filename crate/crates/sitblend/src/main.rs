use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sitblend::backend::{build_generation_request, JobStatus, MockServer, MockServerOptions};
use sitblend::error::{AtStage, Stage, StageError};
use sitblend::gallery::write_fixtures;
use sitblend::pipeline::{
    legibility_report, make_generator, run_pipeline, verify_manifest, BackendMode, PipelineConfig,
    TileMethod, BACKEND_URL_ENV,
};
use sitblend::png_io::{decode_control, decode_png, encode_control, read_png, write_png};
use sitblend::service::{Service, ServiceHandle};
use sitblend::session::{SessionStore, DATA_DIR_ENV};
use sitblend::spec_format::parse_spec;
use sitblend::tiles::{upscale_parallel, BackendTile};
use sitblend_core::chart::layout_chart;
use sitblend_core::compose::{
    compose_additive, compose_blend, compute_placement, ComposeMode, ComposedControl,
    PlacementTransform,
};
use sitblend_core::control::{canny, depth_proxy, scribble_thin, softedge_dog, ControlKind};
use sitblend_core::raster::{render_layout, RenderOptions};
use sitblend_core::upscale::{plan_tiles, ResampleTile};

#[derive(Parser)]
#[command(
    name = "sitblend",
    version,
    about = "Blend charts into photographs of real places"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Generation backend URL; also read from SITBLEND_BACKEND_URL.
    #[arg(long, global = true, conflicts_with = "mock")]
    backend: Option<String>,
    /// Use the built-in deterministic mock backend.
    #[arg(long, global = true)]
    mock: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run directories, fixtures).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Config override as `dotted.path=value`; the value is JSON or a bare string.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a chart spec to PNG.
    Render {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Extract the configured control map from a rendered chart.
    Extract {
        /// Chart spec; rendered first, and needed for the depth kind.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use this image instead of rendering the spec.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Place a chart control map onto a background.
    Compose {
        #[arg(long)]
        control: PathBuf,
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Send one generation request built from a background and an outline.
    Generate {
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long)]
        outline: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tile-upscale an image.
    Upscale {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check a run directory's manifest and recompute its legibility report.
    Verify { run_dir: PathBuf },
    /// Run the whole pipeline.
    Run,
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Session storage; also read from SITBLEND_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Static front-end files served outside /api.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write the nine fixture pairings and run each.
    Gallery {
        /// Only write the fixtures.
        #[arg(long)]
        no_run: bool,
    },
    /// Run the mock generation backend over HTTP.
    MockBackend {
        #[arg(long, default_value = "127.0.0.1:7860")]
        addr: String,
        /// Time each job reports running before completing.
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
    },
}

fn parse_set(item: &str) -> Result<Value, StageError> {
    let (path, raw) = item.split_once('=').ok_or_else(|| {
        StageError::new(Stage::Config, format!("--set {item}: expected PATH=VALUE"))
    })?;
    let mut value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    for key in path.rsplit('.') {
        value = json!({ key: value });
    }
    Ok(value)
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, StageError> {
        let mut config = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for item in &self.set {
            config = config.with_overrides(&parse_set(item)?)?;
        }
        if self.mock {
            config.backend.mode = BackendMode::Mock;
        } else if let Some(url) = &self.backend {
            config.backend.mode = BackendMode::Http;
            config.backend.url = Some(url.clone());
        }
        if self.seed.is_some() {
            config.seed = self.seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_json(value: &Value) {
    // A closed pipe on stdout is not an error worth reporting.
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        serde_json::to_string_pretty(value).expect("json")
    );
}

fn load_chart(
    spec: &Path,
    config: &PipelineConfig,
) -> Result<(sitblend_core::LayoutResult, sitblend_core::RasterImage), StageError> {
    let text = std::fs::read_to_string(spec)
        .map_err(|e| StageError::new(Stage::LoadSpec, format!("{}: {e}", spec.display())))?;
    let spec = parse_spec(&text).at(Stage::ParseSpec)?;
    let layout = layout_chart(&spec).at(Stage::Layout)?;
    let options = RenderOptions {
        background: config.render.background,
        antialias: config.render.antialias,
    };
    let image = render_layout(&layout, &spec.style, options).image;
    Ok((layout, image))
}

fn write_out(path: &Path, image: &sitblend_core::RasterImage) -> Result<(), StageError> {
    write_png(path, image)
        .map(|_| ())
        .map_err(|e| StageError::new(Stage::Write, format!("{}: {e}", path.display())))
}

fn read_image(path: &Path, stage: Stage) -> Result<sitblend_core::RasterImage, StageError> {
    read_png(path).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), StageError> {
    let common = &cli.common;
    match cli.command {
        Command::Render { spec, output } => {
            let config = common.config()?;
            let (_, image) = load_chart(spec.as_deref().unwrap_or(&config.spec_path), &config)?;
            write_out(&output, &image)?;
        }
        Command::Extract {
            spec,
            image,
            output,
        } => {
            let config = common.config()?;
            let c = &config.control;
            let map = match (c.kind, image) {
                (ControlKind::Depth, _) | (_, None) => {
                    let (layout, chart) =
                        load_chart(spec.as_deref().unwrap_or(&config.spec_path), &config)?;
                    match c.kind {
                        ControlKind::Canny => canny(&chart, c.canny),
                        ControlKind::Scribble => scribble_thin(&chart, c.scribble),
                        ControlKind::Softedge => softedge_dog(&chart, c.softedge),
                        ControlKind::Depth => Ok(depth_proxy(&layout, c.depth_blur)),
                    }
                }
                (kind, Some(path)) => {
                    let chart = read_image(&path, Stage::Render)?;
                    match kind {
                        ControlKind::Canny => canny(&chart, c.canny),
                        ControlKind::Scribble => scribble_thin(&chart, c.scribble),
                        _ => softedge_dog(&chart, c.softedge),
                    }
                }
            }
            .at(Stage::Extract)?;
            std::fs::write(&output, encode_control(&map))
                .map_err(|e| StageError::new(Stage::Write, e))?;
        }
        Command::Compose {
            control,
            background,
            output,
        } => {
            let config = common.config()?;
            let bytes = std::fs::read(&control).map_err(|e| {
                StageError::new(Stage::Compose, format!("{}: {e}", control.display()))
            })?;
            let chart_control = decode_control(&bytes, config.control.kind).at(Stage::Compose)?;
            let bg = read_image(
                background.as_deref().unwrap_or(&config.background_path),
                Stage::LoadBackground,
            )?;
            let c = &config.compose;
            let placement = compute_placement(
                chart_control.dims(),
                bg.dims(),
                c.anchor,
                c.relative_scale,
                c.margin,
            )
            .at(Stage::Compose)?;
            let composed = match c.mode {
                ComposeMode::Additive => compose_additive(&chart_control, &placement, bg.dims()),
                ComposeMode::Blending => compose_blend(
                    &chart_control,
                    &placement,
                    &bg,
                    c.bg_edges,
                    c.chart_weight,
                    c.bg_weight,
                    c.combine,
                ),
            }
            .at(Stage::Compose)?;
            std::fs::write(&output, encode_control(&composed.map))
                .map_err(|e| StageError::new(Stage::Write, e))?;
            print_json(&json!({ "placement": composed.placement }));
        }
        Command::Generate {
            background,
            outline,
            output,
        } => {
            let config = common.config()?;
            let bg = read_image(
                background.as_deref().unwrap_or(&config.background_path),
                Stage::LoadBackground,
            )?;
            let bytes = std::fs::read(&outline).map_err(|e| {
                StageError::new(Stage::Request, format!("{}: {e}", outline.display()))
            })?;
            let map = decode_control(&bytes, config.control.kind).at(Stage::Request)?;
            let composed = ComposedControl {
                placement: PlacementTransform::identity(map.dims()),
                map,
                mode: config.compose.mode,
                chart_weight: config.compose.chart_weight,
                bg_weight: config.compose.bg_weight,
                sources: Default::default(),
            };
            let prompt = config
                .prompt
                .render()
                .map_err(|e| StageError::new(Stage::Config, e))?;
            let seed = config.seed.unwrap_or_else(rand::random);
            let request =
                build_generation_request(&bg, &composed, &prompt, seed, &config.generation)
                    .at(Stage::Request)?;
            let result = make_generator(&config)?
                .generate(&request)
                .at(Stage::Generate)?;
            if result.status != JobStatus::Done {
                return Err(StageError::new(
                    Stage::Generate,
                    result.error.unwrap_or_else(|| "job failed".into()),
                ));
            }
            let image =
                decode_png(result.image.as_deref().unwrap_or_default()).at(Stage::Generate)?;
            let (w, h) = bg.dims();
            let image = if image.dims() == (w, h) {
                image
            } else {
                image.crop(0, 0, w, h).at(Stage::Generate)?
            };
            write_out(&output, &image)?;
            print_json(
                &json!({ "job_id": result.job_id, "seed": seed, "backend_info": result.backend_info }),
            );
        }
        Command::Upscale { input, output } => {
            let config = common.config()?;
            let image = read_image(&input, Stage::Upscale)?;
            let u = &config.upscale;
            let plan =
                plan_tiles(image.dims(), u.cols, u.rows, u.overlap, u.factor).at(Stage::Upscale)?;
            let out = match u.method {
                TileMethod::Resample => {
                    upscale_parallel(&image, &plan, &ResampleTile(u.resampler), u.parallelism)
                }
                TileMethod::Backend => {
                    let tile = BackendTile {
                        generator: make_generator(&config)?,
                        prompt: config
                            .prompt
                            .render()
                            .map_err(|e| StageError::new(Stage::Config, e))?,
                        seed: config.seed.unwrap_or_else(rand::random),
                        params: config.generation.clone(),
                        denoising_strength: u.denoising_strength,
                        resampler: u.resampler,
                        outline: None,
                    };
                    upscale_parallel(&image, &plan, &tile, u.parallelism)
                }
            }
            .at(Stage::Upscale)?;
            write_out(&output, &out)?;
        }
        Command::Verify { run_dir } => {
            let manifest = verify_manifest(&run_dir)?;
            let report = legibility_report(&run_dir)?;
            print_json(&json!({
                "run_id": manifest.run_id,
                "status": manifest.status,
                "manifest_hash": manifest.manifest_hash,
                "legibility": report,
            }));
        }
        Command::Run => {
            let config = common.config()?;
            let started = Instant::now();
            match run_pipeline(&config) {
                Ok(out) => print_json(&json!({
                    "run_dir": out.run_dir,
                    "manifest_hash": out.manifest.manifest_hash,
                    "seed": out.manifest.seed,
                    "edge_alignment": out.manifest.legibility.as_ref().map(|l| l.edge_alignment),
                    "seconds": started.elapsed().as_secs_f64(),
                })),
                Err(e) => {
                    if let Some(dir) = &e.run_dir {
                        eprintln!("partial run kept in {}", dir.display());
                    }
                    return Err(e.error);
                }
            }
        }
        Command::Serve {
            addr,
            data_dir,
            static_dir,
        } => {
            let data_dir = data_dir
                .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("sitblend-data"));
            let mut store = SessionStore::open(&data_dir).map_err(|e| e.stage_error())?;
            if common.mock {
                store = store.with_generator(Arc::new(sitblend::backend::MockGenerator));
            } else if common.backend.is_some() || common.config.is_some() {
                store = store.with_generator(make_generator(&common.config()?)?);
            }
            let mut service = Service::new(store);
            if let Some(dir) = static_dir {
                service = service.with_static_dir(dir);
            }
            let handle = ServiceHandle::start(&addr, service)?;
            eprintln!("serving {} (data in {})", handle.url(), data_dir.display());
            handle.join();
        }
        Command::Gallery { no_run } => {
            let config = common.config()?;
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("gallery"));
            let fixtures = write_fixtures(&out.join("fixtures"), &out.join("runs"))?;
            let started = Instant::now();
            let mut failed = 0;
            for (name, mut fixture) in fixtures {
                if no_run {
                    println!("{name}");
                    continue;
                }
                fixture.seed = config.seed.or(Some(42));
                fixture.backend = config.backend.clone();
                match run_pipeline(&fixture) {
                    Ok(run) => {
                        let alignment = run
                            .manifest
                            .legibility
                            .as_ref()
                            .map(|l| l.edge_alignment)
                            .unwrap_or(f64::NAN);
                        println!(
                            "{name:24} alignment {alignment:.3}  {}",
                            run.run_dir.display()
                        );
                    }
                    Err(e) => {
                        failed += 1;
                        println!("{name:24} FAILED {}", e.error);
                    }
                }
            }
            if !no_run {
                println!("total {:.2} s", started.elapsed().as_secs_f64());
            }
            if failed > 0 {
                return Err(StageError::new(
                    Stage::Verify,
                    format!("{failed} fixture runs failed"),
                ));
            }
        }
        Command::MockBackend { addr, delay_ms } => {
            let server = MockServer::start_on(
                &addr,
                MockServerOptions {
                    delay: Duration::from_millis(delay_ms),
                    ..Default::default()
                },
            )
            .map_err(|e| StageError::new(Stage::Generate, e))?;
            eprintln!(
                "mock backend on {} (set {BACKEND_URL_ENV} to use it)",
                server.url()
            );
            server.join();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {}", e.stage, e.message);
            ExitCode::FAILURE
        }
    }
}
