//! Parallel tiled upscaling and the backend-driven tile transform.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use sitblend_core::raster::{resample, Ratio, ResampleMethod};
use sitblend_core::upscale::{
    extract_tile, reassemble, Tile, TilePlan, TileTransform, UpscaleError,
};
use sitblend_core::{ControlMap, RasterImage};

use crate::backend::{
    ControlUnit, GenerationParams, GenerationRequest, Generator, JobStatus, UnitKind,
};
use crate::png_io::{decode_png, encode_control, encode_png};

/// Like [`sitblend_core::upscale::upscale_tiled`] but runs up to
/// `parallelism` tiles at once. The result does not depend on the order
/// in which tiles finish.
pub fn upscale_parallel<T: TileTransform + Sync + ?Sized>(
    image: &RasterImage,
    plan: &TilePlan,
    transform: &T,
    parallelism: usize,
) -> Result<RasterImage, UpscaleError> {
    if image.dims() != (plan.width, plan.height) {
        return Err(UpscaleError::PlanMismatch);
    }
    let n = plan.tiles.len();
    let slots: Vec<Mutex<Option<Result<RasterImage, UpscaleError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = parallelism.clamp(1, n.max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let tile = &plan.tiles[i];
                let result = extract_tile(image, tile).and_then(|input| {
                    transform
                        .upscale_tile(tile, &input, plan.factor)
                        .map_err(|message| UpscaleError::TileFailed {
                            index: tile.index,
                            message,
                        })
                });
                if result.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    let mut outputs = Vec::with_capacity(n);
    let mut first_error = None;
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok(img)) => outputs.push(img),
            Some(Err(e)) => {
                first_error.get_or_insert(e);
            }
            None => {}
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    reassemble(plan, &outputs)
}

/// Per-tile img2img through a generation backend: the tile is resampled
/// to its target size, padded to a multiple of 8, refined at low denoise
/// and cropped back.
pub struct BackendTile {
    pub generator: Arc<dyn Generator>,
    pub prompt: String,
    pub seed: u64,
    pub params: GenerationParams,
    pub denoising_strength: f64,
    pub resampler: ResampleMethod,
    /// Composed control at the image's resolution; when set, each tile
    /// request also carries the matching crop as an outline unit.
    pub outline: Option<ControlMap>,
}

impl BackendTile {
    fn outline_crop(
        &self,
        tile: &Tile,
        factor: u32,
        w: u32,
        h: u32,
    ) -> Result<Option<Vec<u8>>, String> {
        let Some(map) = &self.outline else {
            return Ok(None);
        };
        let e = tile.expanded;
        let crop = map
            .to_image()
            .crop(e.x, e.y, e.w, e.h)
            .map_err(|e| e.to_string())?;
        let up = resample(&crop, Ratio::integer(factor), ResampleMethod::Nearest)
            .map_err(|e| e.to_string())?;
        let padded = up.pad_replicate(w, h).map_err(|e| e.to_string())?;
        let gray: Vec<u8> = padded.data().chunks(4).map(|p| p[0]).collect();
        let cm = ControlMap::new(w, h, gray, map.kind()).map_err(|e| e.to_string())?;
        Ok(Some(encode_control(&cm)))
    }
}

impl TileTransform for BackendTile {
    fn upscale_tile(
        &self,
        tile: &Tile,
        input: &RasterImage,
        factor: u32,
    ) -> Result<RasterImage, String> {
        let up =
            resample(input, Ratio::integer(factor), self.resampler).map_err(|e| e.to_string())?;
        let (tw, th) = up.dims();
        let (pw, ph) = (tw.div_ceil(8) * 8, th.div_ceil(8) * 8);
        let padded = up.pad_replicate(pw, ph).map_err(|e| e.to_string())?;
        let png = encode_png(&padded);
        let unit = |image: Vec<u8>, kind: UnitKind, weight: f64| ControlUnit {
            image,
            kind,
            weight,
            guidance_start: self.params.guidance_start,
            guidance_end: self.params.guidance_end,
        };
        let mut units = vec![unit(png.clone(), UnitKind::Style, self.params.style_weight)];
        if let Some(outline) = self.outline_crop(tile, factor, pw, ph)? {
            let kind = self
                .outline
                .as_ref()
                .map(|m| m.kind().into())
                .unwrap_or(UnitKind::Canny);
            units.push(unit(outline, kind, self.params.outline_weight));
        }
        let request = GenerationRequest {
            model: self.params.model.clone(),
            init_image: png,
            prompt: self.prompt.clone(),
            negative_prompt: self.params.negative_prompt.clone(),
            seed: self.seed.wrapping_add(tile.index as u64),
            steps: self.params.steps,
            cfg_scale: self.params.cfg_scale,
            denoising_strength: self.denoising_strength,
            width: pw,
            height: ph,
            control_units: units,
        };
        let result = self
            .generator
            .generate(&request)
            .map_err(|e| e.to_string())?;
        if result.status != JobStatus::Done {
            return Err(result
                .error
                .unwrap_or_else(|| format!("job {} did not complete", result.job_id)));
        }
        let bytes = result.image.ok_or("backend returned no image")?;
        let img = decode_png(&bytes).map_err(|e| e.to_string())?;
        if img.dims() != (pw, ph) {
            return Err(format!(
                "backend returned {}x{}, expected {pw}x{ph}",
                img.width(),
                img.height()
            ));
        }
        img.crop(0, 0, tw, th).map_err(|e| e.to_string())
    }
}
