//! Deterministic stand-in for a diffusion backend.
//!
//! The output is the init image with the outline unit's edges (region
//! boundaries for depth units) painted
//! over it in a seed-derived tint, each edge pixel ringed by a three pixel
//! halo in the opposite tint. Where the surrounding area is bright the
//! edge tint is dark and vice versa. The choice follows a local mean
//! rather than single pixels so fine background texture does not break
//! strokes apart. The tint is
//! mixed in with strength `denoising_strength^(1/4)`: zero leaves the
//! init image untouched, moderate strengths already imprint clearly.

use sitblend_core::control::ControlKind;
use sitblend_core::legibility::{alignment_reference, VerifyParams};
use sitblend_core::{RasterImage, Rgba};

use super::request::{GenerationRequest, GenerationResult, JobStatus, UnitKind};
use crate::png_io::{decode_control, decode_png, encode_png};

pub const MOCK_BACKEND_INFO: &str = "sitblend-mock/1";

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// `(dark, light)` tints for a seed.
pub fn seed_tints(seed: u64) -> ([f64; 3], [f64; 3]) {
    let hue = (mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) % 360) as f64;
    (hsv(hue, 0.8, 0.12), hsv(hue, 0.25, 1.0))
}

/// Radius of the box used to decide between the dark and light tint.
const TINT_RADIUS: i64 = 12;

/// Width of the opposite-tint ring around edge pixels.
const HALO: i64 = 3;

/// Mean luma over a `(2r+1)^2` box around every pixel, clamped at the
/// borders.
fn local_mean_luma(img: &RasterImage, r: i64) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = img.luma();
    let mut integral = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += luma[y * w + x];
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        let (y0, y1) = ((y - r).max(0) as usize, ((y + r + 1) as usize).min(h));
        for x in 0..w as i64 {
            let (x0, x1) = ((x - r).max(0) as usize, ((x + r + 1) as usize).min(w));
            let sum = integral[y1 * (w + 1) + x1]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0]
                + integral[y0 * (w + 1) + x0];
            out[y as usize * w + x as usize] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

pub fn mix_strength(denoising: f64) -> f64 {
    denoising.clamp(0.0, 1.0).powf(0.25)
}

/// The mock's output image for `request`.
pub fn mock_image(request: &GenerationRequest) -> Result<RasterImage, String> {
    request.validate().map_err(|e| e.to_string())?;
    let init = decode_png(&request.init_image).map_err(|e| format!("init_image: {e}"))?;
    if init.dims() != (request.width, request.height) {
        return Err(format!(
            "init_image is {}x{}, request says {}x{}",
            init.width(),
            init.height(),
            request.width,
            request.height
        ));
    }
    let alpha = mix_strength(request.denoising_strength);
    let Some(unit) = request
        .control_units
        .iter()
        .find(|u| u.kind != UnitKind::Style)
    else {
        return Ok(init);
    };
    if alpha == 0.0 {
        return Ok(init);
    }
    let kind = match unit.kind {
        UnitKind::Scribble => ControlKind::Scribble,
        UnitKind::Softedge => ControlKind::Softedge,
        UnitKind::Depth => ControlKind::Depth,
        _ => ControlKind::Canny,
    };
    let outline = decode_control(&unit.image, kind).map_err(|e| format!("control unit: {e}"))?;
    if outline.dims() != init.dims() {
        return Err("control unit dimensions differ from init_image".into());
    }
    let outline =
        alignment_reference(&outline, VerifyParams::default().canny).map_err(|e| e.to_string())?;
    let (w, h) = (init.width() as i64, init.height() as i64);
    let edge =
        |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && outline.is_edge(x as u32, y as u32);
    let (dark, light) = seed_tints(request.seed);
    let surround = local_mean_luma(&init, TINT_RADIUS);
    let mut out = init.clone();
    for y in 0..h {
        for x in 0..w {
            let on = edge(x, y);
            if !on && !(-HALO..=HALO).any(|dy| (-HALO..=HALO).any(|dx| edge(x + dx, y + dy))) {
                continue;
            }
            let p = init.pixel(x as u32, y as u32);
            let bright = surround[(y * w + x) as usize] >= 128.0;
            let tint = if bright == on { dark } else { light };
            let mut c = [0u8; 4];
            for i in 0..3 {
                let v = p.0[i] as f64 + alpha * (tint[i] - p.0[i] as f64);
                c[i] = v.round().clamp(0.0, 255.0) as u8;
            }
            c[3] = p.0[3];
            out.set_pixel(x as u32, y as u32, Rgba(c));
        }
    }
    Ok(out)
}

/// Completed (or failed) job for `request`; the job id is derived from
/// the payload so repeated requests agree.
pub fn mock_generate(request: &GenerationRequest) -> GenerationResult {
    let job_id = format!("mock-{}", &request.payload_sha256()[..16]);
    match mock_image(request) {
        Ok(img) => GenerationResult {
            job_id,
            status: JobStatus::Done,
            image: Some(encode_png(&img)),
            backend_info: MOCK_BACKEND_INFO.into(),
            timing_ms: 0,
            error: None,
        },
        Err(e) => GenerationResult {
            job_id,
            status: JobStatus::Failed,
            image: None,
            backend_info: MOCK_BACKEND_INFO.into(),
            timing_ms: 0,
            error: Some(e),
        },
    }
}
