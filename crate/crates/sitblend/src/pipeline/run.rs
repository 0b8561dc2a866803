use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use sitblend_core::chart::layout_chart;
use sitblend_core::compose::{
    compose_additive, compose_blend, compute_placement, ComposeMode, ComposedControl,
};
use sitblend_core::control::{canny, depth_proxy, scribble_thin, softedge_dog, ControlKind};
use sitblend_core::legibility::{assess, LegibilityReport};
use sitblend_core::raster::{render_layout, RenderOptions};
use sitblend_core::upscale::{plan_tiles, ResampleTile};
use sitblend_core::{ControlMap, LayoutResult, RasterImage};

use super::config::{BackendMode, PipelineConfig, TileMethod};
use super::manifest::*;
use crate::backend::{
    build_generation_request, BackendClient, Generator, JobStatus, MockGenerator,
};
use crate::error::{AtStage, Stage, StageError};
use crate::hashing::sha256_hex;
use crate::png_io::{decode_control, decode_png, encode_control, encode_png};
use crate::spec_format::{parse_spec, serialize_spec};
use crate::tiles::{upscale_parallel, BackendTile};

/// Artifact names and their files inside a run directory.
pub const CHART: (&str, &str) = ("chart", "chart.png");
pub const CHART_CONTROL: (&str, &str) = ("chart_control", "chart_control.png");
pub const OUTLINE: (&str, &str) = ("outline", "outline.png");
pub const BACKGROUND: (&str, &str) = ("background", "background.png");
pub const OUTPUT: (&str, &str) = ("output", "output.png");
pub const UPSCALED: (&str, &str) = ("upscaled", "upscaled.png");
pub const SPEC: (&str, &str) = ("spec", "chart.json");
pub const LEGIBILITY: (&str, &str) = ("legibility", "legibility.json");

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

/// A failed run. The manifest (status `failed`) and any artifacts written
/// before the failure are kept in `run_dir` when it could be created.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct PipelineError {
    pub error: StageError,
    pub run_dir: Option<PathBuf>,
    pub manifest: Option<Box<RunManifest>>,
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        self.error.stage
    }
}

#[derive(Default, Clone)]
pub struct RunOptions {
    /// Defaults to a fresh UUID.
    pub run_id: Option<String>,
    /// Defaults to `<out_dir>/<run_id>`.
    pub run_dir: Option<PathBuf>,
    /// Defaults to the backend selected by the config.
    pub generator: Option<Arc<dyn Generator>>,
}

pub fn make_generator(config: &PipelineConfig) -> Result<Arc<dyn Generator>, StageError> {
    Ok(match config.backend.mode {
        BackendMode::Mock => Arc::new(MockGenerator),
        BackendMode::Http => Arc::new(BackendClient::new(
            config
                .backend
                .client_config()
                .map_err(|e| StageError::new(Stage::Config, e))?,
        )),
    })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    run_pipeline_with(config, RunOptions::default())
}

struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    timer: Instant,
}

impl Run {
    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.manifest
            .timestamps
            .stage_ms
            .insert(stage.to_string(), (now - self.timer).as_millis() as u64);
        self.timer = now;
    }

    fn write(&mut self, (name, file): (&str, &str), bytes: &[u8]) -> Result<(), StageError> {
        std::fs::write(self.dir.join(file), bytes)
            .map_err(|e| StageError::new(Stage::Write, format!("{file}: {e}")))?;
        self.manifest.artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                path: file.to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        Ok(())
    }
}

pub fn run_pipeline_with(
    config: &PipelineConfig,
    options: RunOptions,
) -> Result<RunOutcome, PipelineError> {
    let run_id = options
        .run_id
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let dir = options
        .run_dir
        .unwrap_or_else(|| config.out_dir.join(&run_id));
    let seed = config.seed.unwrap_or_else(rand::random);
    let mut resolved = config.clone();
    resolved.seed = Some(seed);
    let mut run = Run {
        dir,
        manifest: RunManifest {
            format_version: MANIFEST_FORMAT,
            run_id,
            status: RunStatus::Failed,
            error: None,
            timestamps: Timestamps {
                started: chrono::Utc::now().to_rfc3339(),
                ..Default::default()
            },
            seed,
            outline_kind: resolved.control.kind,
            config: resolved,
            prompt: None,
            inputs: InputHashes::default(),
            artifacts: BTreeMap::new(),
            composition: None,
            request: None,
            tile_plan: None,
            legibility: None,
            backend_info: None,
            job_id: None,
            manifest_hash: String::new(),
        },
        timer: Instant::now(),
    };
    if let Err(e) = std::fs::create_dir_all(&run.dir) {
        return Err(PipelineError {
            error: StageError::new(Stage::Write, format!("{}: {e}", run.dir.display())),
            run_dir: None,
            manifest: None,
        });
    }
    let result = execute(&mut run, options.generator);
    run.manifest.timestamps.finished = chrono::Utc::now().to_rfc3339();
    match &result {
        Ok(()) => run.manifest.status = RunStatus::Completed,
        Err(e) => run.manifest.error = Some(e.clone()),
    }
    run.manifest.seal();
    let written = std::fs::write(run.dir.join(MANIFEST_FILE), run.manifest.to_bytes())
        .map_err(|e| StageError::new(Stage::Write, format!("{MANIFEST_FILE}: {e}")));
    match (result, written) {
        (Ok(()), Ok(())) => Ok(RunOutcome {
            run_dir: run.dir,
            manifest: run.manifest,
        }),
        (Err(error), _) | (Ok(()), Err(error)) => Err(PipelineError {
            error,
            run_dir: Some(run.dir),
            manifest: Some(Box::new(run.manifest)),
        }),
    }
}

fn extract(
    kind: ControlKind,
    config: &PipelineConfig,
    chart: &RasterImage,
    layout: &LayoutResult,
) -> Result<ControlMap, StageError> {
    let c = &config.control;
    match kind {
        ControlKind::Canny => canny(chart, c.canny),
        ControlKind::Scribble => scribble_thin(chart, c.scribble),
        ControlKind::Softedge => softedge_dog(chart, c.softedge),
        ControlKind::Depth => Ok(depth_proxy(layout, c.depth_blur)),
    }
    .at(Stage::Extract)
}

fn execute(run: &mut Run, generator: Option<Arc<dyn Generator>>) -> Result<(), StageError> {
    let config = run.manifest.config.clone();
    let seed = run.manifest.seed;
    config.validate()?;
    let prompt = config
        .prompt
        .render()
        .map_err(|e| StageError::new(Stage::Config, e))?;
    run.manifest.prompt = Some(prompt.clone());
    let generator = match generator {
        Some(g) => g,
        None => make_generator(&config)?,
    };
    run.lap(Stage::Config);

    let spec_text = std::fs::read_to_string(&config.spec_path).map_err(|e| {
        StageError::new(
            Stage::LoadSpec,
            format!("{}: {e}", config.spec_path.display()),
        )
    })?;
    run.manifest.inputs.chart_spec = Some(sha256_hex(spec_text.as_bytes()));
    run.lap(Stage::LoadSpec);
    let spec = parse_spec(&spec_text).at(Stage::ParseSpec)?;
    run.write(SPEC, serialize_spec(&spec).as_bytes())?;
    run.lap(Stage::ParseSpec);
    let layout = layout_chart(&spec).at(Stage::Layout)?;
    run.lap(Stage::Layout);
    let options = RenderOptions {
        background: config.render.background,
        antialias: config.render.antialias,
    };
    let chart = render_layout(&layout, &spec.style, options).image;
    run.write(CHART, &encode_png(&chart))?;
    run.lap(Stage::Render);

    let bg_bytes = std::fs::read(&config.background_path).map_err(|e| {
        StageError::new(
            Stage::LoadBackground,
            format!("{}: {e}", config.background_path.display()),
        )
    })?;
    run.manifest.inputs.background = Some(sha256_hex(&bg_bytes));
    let background = decode_png(&bg_bytes).map_err(|e| {
        StageError::new(
            Stage::LoadBackground,
            format!("{}: {e}", config.background_path.display()),
        )
    })?;
    let bg_png = encode_png(&background);
    run.write(BACKGROUND, &bg_png)?;
    run.lap(Stage::LoadBackground);

    let chart_control = extract(config.control.kind, &config, &chart, &layout)?;
    let control_png = encode_control(&chart_control);
    run.write(CHART_CONTROL, &control_png)?;
    run.lap(Stage::Extract);

    let c = &config.compose;
    let placement = compute_placement(
        chart.dims(),
        background.dims(),
        c.anchor,
        c.relative_scale,
        c.margin,
    )
    .at(Stage::Compose)?;
    let mut composed: ComposedControl = match c.mode {
        ComposeMode::Additive => compose_additive(&chart_control, &placement, background.dims()),
        ComposeMode::Blending => compose_blend(
            &chart_control,
            &placement,
            &background,
            c.bg_edges,
            c.chart_weight,
            c.bg_weight,
            c.combine,
        ),
    }
    .at(Stage::Compose)?;
    composed.sources.chart_control = Some(sha256_hex(&control_png));
    composed.sources.background = Some(sha256_hex(&bg_png));
    run.write(OUTLINE, &encode_control(&composed.map))?;
    run.manifest.composition = Some(CompositionRecord {
        mode: composed.mode,
        placement,
        chart_weight: composed.chart_weight,
        bg_weight: composed.bg_weight,
        combine: (composed.mode == ComposeMode::Blending).then_some(c.combine),
        sources: composed.sources.clone(),
    });
    run.lap(Stage::Compose);

    let request =
        build_generation_request(&background, &composed, &prompt, seed, &config.generation)
            .at(Stage::Request)?;
    run.manifest.request = Some(RequestRecord {
        payload_sha256: request.payload_sha256(),
        model: request.model.clone(),
        prompt: request.prompt.clone(),
        negative_prompt: request.negative_prompt.clone(),
        seed: request.seed,
        steps: request.steps,
        cfg_scale: request.cfg_scale,
        denoising_strength: request.denoising_strength,
        width: request.width,
        height: request.height,
        padded: (request.width, request.height) != background.dims(),
        units: request
            .control_units
            .iter()
            .map(|u| UnitRecord {
                kind: u.kind,
                weight: u.weight,
                guidance_start: u.guidance_start,
                guidance_end: u.guidance_end,
                image_sha256: sha256_hex(&u.image),
            })
            .collect(),
    });
    run.lap(Stage::Request);

    let result = generator.generate(&request).map_err(|e| {
        if let Some(id) = e.job_id() {
            run.manifest.job_id = Some(id.to_string());
        }
        StageError::new(Stage::Generate, e)
    })?;
    run.manifest.job_id = Some(result.job_id.clone());
    run.manifest.backend_info = Some(result.backend_info.clone());
    if result.status != JobStatus::Done {
        return Err(StageError::new(
            Stage::Generate,
            format!(
                "job {} failed: {}",
                result.job_id,
                result.error.as_deref().unwrap_or("no message")
            ),
        ));
    }
    let image = result
        .image
        .as_deref()
        .ok_or_else(|| StageError::new(Stage::Generate, "job done without an image"))?;
    let generated = decode_png(image).at(Stage::Generate)?;
    if generated.dims() != (request.width, request.height) {
        return Err(StageError::new(
            Stage::Generate,
            format!(
                "backend returned {}x{}, requested {}x{}",
                generated.width(),
                generated.height(),
                request.width,
                request.height
            ),
        ));
    }
    let (bw, bh) = background.dims();
    let output = if generated.dims() == (bw, bh) {
        generated
    } else {
        generated.crop(0, 0, bw, bh).at(Stage::Generate)?
    };
    run.write(OUTPUT, &encode_png(&output))?;
    run.lap(Stage::Generate);

    let u = &config.upscale;
    if u.enabled {
        let plan =
            plan_tiles(output.dims(), u.cols, u.rows, u.overlap, u.factor).at(Stage::Upscale)?;
        let upscaled = match u.method {
            TileMethod::Resample => {
                upscale_parallel(&output, &plan, &ResampleTile(u.resampler), u.parallelism)
            }
            TileMethod::Backend => {
                let tile = BackendTile {
                    generator: generator.clone(),
                    prompt: prompt.clone(),
                    seed,
                    params: config.generation.clone(),
                    denoising_strength: u.denoising_strength,
                    resampler: u.resampler,
                    outline: u.attach_outline.then(|| composed.map.clone()),
                };
                upscale_parallel(&output, &plan, &tile, u.parallelism)
            }
        }
        .at(Stage::Upscale)?;
        let (ow, oh) = plan.output_dims();
        run.manifest.tile_plan = Some(TilePlanRecord {
            rows: plan.rows,
            cols: plan.cols,
            tiles: plan.tiles.len(),
            overlap: plan.overlap,
            factor: plan.factor,
            method: u.method,
            resampler: u.resampler,
            input_dims: [plan.width, plan.height],
            output_dims: [ow, oh],
        });
        run.write(UPSCALED, &encode_png(&upscaled))?;
        run.lap(Stage::Upscale);
    }

    let report =
        assess(&composed.map, &output, &placement, &layout, &config.verify).at(Stage::Verify)?;
    write_report(run, &report)?;
    run.lap(Stage::Verify);
    Ok(())
}

fn write_report(run: &mut Run, report: &LegibilityReport) -> Result<(), StageError> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serialises");
    bytes.push(b'\n');
    run.write(LEGIBILITY, &bytes)?;
    run.manifest.legibility = Some(LegibilitySummary {
        report: LEGIBILITY.1.to_string(),
        edge_alignment: report.edge_alignment,
        bars_within_tolerance: report.bars_within_tolerance,
    });
    Ok(())
}

fn read_artifact(
    run_dir: &Path,
    manifest: &RunManifest,
    name: &str,
) -> Result<Vec<u8>, StageError> {
    let a = manifest
        .artifacts
        .get(name)
        .ok_or_else(|| StageError::new(Stage::Verify, format!("run has no {name} artifact")))?;
    std::fs::read(run_dir.join(&a.path))
        .map_err(|e| StageError::new(Stage::Verify, format!("{}: {e}", a.path)))
}

/// Recomputes the legibility report of a finished run from the files in
/// its directory.
pub fn legibility_report(run_dir: &Path) -> Result<LegibilityReport, StageError> {
    let manifest = RunManifest::load(run_dir)?;
    let spec_text = read_artifact(run_dir, &manifest, SPEC.0)?;
    let spec = parse_spec(&String::from_utf8_lossy(&spec_text)).at(Stage::Verify)?;
    let layout = layout_chart(&spec).at(Stage::Verify)?;
    let reference = decode_control(
        &read_artifact(run_dir, &manifest, OUTLINE.0)?,
        manifest.outline_kind,
    )
    .at(Stage::Verify)?;
    let output = decode_png(&read_artifact(run_dir, &manifest, OUTPUT.0)?).at(Stage::Verify)?;
    let composition = manifest
        .composition
        .as_ref()
        .ok_or_else(|| StageError::new(Stage::Verify, "run has no composition record"))?;
    assess(
        &reference,
        &output,
        &composition.placement,
        &layout,
        &manifest.config.verify,
    )
    .at(Stage::Verify)
}
