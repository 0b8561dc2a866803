//! Wire types for the generation protocol.
//!
//! `POST /generate` takes a [`GenerationRequest`] and answers
//! `{"job_id": "..."}`; `GET /jobs/{id}` answers a [`GenerationResult`].
//! Images travel as base64-encoded PNG.

use serde::{Deserialize, Serialize};
use sitblend_core::compose::ComposedControl;
use sitblend_core::control::ControlKind;
use sitblend_core::{ControlMap, RasterImage};

use crate::hashing::sha256_hex;
use crate::png_io::{encode_control, encode_png};

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s).map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match bytes {
                Some(b) => s.serialize_some(&STANDARD.encode(b)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            match Option::<String>::deserialize(d)? {
                Some(s) => STANDARD
                    .decode(s)
                    .map(Some)
                    .map_err(serde::de::Error::custom),
                None => Ok(None),
            }
        }
    }
}

/// What a control unit conditions on. `style` carries the raw
/// background; the others carry an outline map of that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Style,
    Canny,
    Scribble,
    Softedge,
    Depth,
}

impl From<ControlKind> for UnitKind {
    fn from(k: ControlKind) -> Self {
        match k {
            ControlKind::Canny => UnitKind::Canny,
            ControlKind::Scribble => UnitKind::Scribble,
            ControlKind::Softedge => UnitKind::Softedge,
            ControlKind::Depth => UnitKind::Depth,
        }
    }
}

impl UnitKind {
    pub fn control_kind(self) -> Option<ControlKind> {
        match self {
            UnitKind::Style => None,
            UnitKind::Canny => Some(ControlKind::Canny),
            UnitKind::Scribble => Some(ControlKind::Scribble),
            UnitKind::Softedge => Some(ControlKind::Softedge),
            UnitKind::Depth => Some(ControlKind::Depth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlUnit {
    #[serde(with = "b64")]
    pub image: Vec<u8>,
    pub kind: UnitKind,
    pub weight: f64,
    pub guidance_start: f64,
    pub guidance_end: f64,
}

/// Field order here is the canonical wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub model: String,
    #[serde(with = "b64")]
    pub init_image: Vec<u8>,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub steps: u32,
    pub cfg_scale: f64,
    pub denoising_strength: f64,
    pub width: u32,
    pub height: u32,
    pub control_units: Vec<ControlUnit>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RequestError {
    #[error("control map is {control:?} but background is {background:?}")]
    DimensionMismatch {
        background: (u32, u32),
        control: (u32, u32),
    },
    #[error("dimensions {0}x{1} are not multiples of 8 (enable auto_pad to pad them)")]
    NotMultipleOf8(u32, u32),
    #[error("denoising_strength must be in [0, 1], got {0}")]
    InvalidDenoising(f64),
    #[error("control weight must be in [0, 1], got {0}")]
    InvalidWeight(f64),
    #[error("guidance window must satisfy 0 <= start <= end <= 1, got [{0}, {1}]")]
    InvalidGuidance(f64, f64),
    #[error("steps must be at least 1")]
    InvalidSteps,
    #[error("cfg_scale must be positive and finite, got {0}")]
    InvalidCfg(f64),
    #[error("request needs at least one control unit")]
    NoControlUnits,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.control_units.is_empty() {
            return Err(RequestError::NoControlUnits);
        }
        if !self.width.is_multiple_of(8)
            || !self.height.is_multiple_of(8)
            || self.width == 0
            || self.height == 0
        {
            return Err(RequestError::NotMultipleOf8(self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.denoising_strength) {
            return Err(RequestError::InvalidDenoising(self.denoising_strength));
        }
        if self.steps == 0 {
            return Err(RequestError::InvalidSteps);
        }
        if !(self.cfg_scale.is_finite() && self.cfg_scale > 0.0) {
            return Err(RequestError::InvalidCfg(self.cfg_scale));
        }
        for u in &self.control_units {
            if !(0.0..=1.0).contains(&u.weight) {
                return Err(RequestError::InvalidWeight(u.weight));
            }
            if !(0.0 <= u.guidance_start
                && u.guidance_start <= u.guidance_end
                && u.guidance_end <= 1.0)
            {
                return Err(RequestError::InvalidGuidance(
                    u.guidance_start,
                    u.guidance_end,
                ));
            }
        }
        Ok(())
    }

    /// Payload bytes as sent on the wire.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serialises")
    }

    pub fn payload_sha256(&self) -> String {
        sha256_hex(&self.to_canonical_json())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub job_id: String,
    pub status: JobStatus,
    #[serde(default, with = "b64::opt", skip_serializing_if = "Option::is_none")]
    pub image: Option<Vec<u8>>,
    #[serde(default)]
    pub backend_info: String,
    #[serde(default)]
    pub timing_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationResult {
    /// An image is present exactly when the job is done.
    pub fn is_consistent(&self) -> bool {
        self.image.is_some() == (self.status == JobStatus::Done)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub job_id: String,
}

/// Everything besides images and prompt that goes into a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub model: String,
    pub negative_prompt: String,
    pub steps: u32,
    pub cfg_scale: f64,
    /// `None` picks the mode default: 0.55 additive, 0.75 blending.
    pub denoising_strength: Option<f64>,
    pub style_weight: f64,
    pub outline_weight: f64,
    pub guidance_start: f64,
    pub guidance_end: f64,
    /// Pad to multiples of 8 by edge replication instead of failing.
    pub auto_pad: bool,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            model: "stable-diffusion-1.5".into(),
            negative_prompt: String::new(),
            steps: 28,
            cfg_scale: 7.0,
            denoising_strength: None,
            style_weight: 1.0,
            outline_weight: 0.8,
            guidance_start: 0.0,
            guidance_end: 1.0,
            auto_pad: false,
        }
    }
}

pub const ADDITIVE_DENOISING: f64 = 0.55;
pub const BLENDING_DENOISING: f64 = 0.75;

impl GenerationParams {
    pub fn denoising_for(&self, mode: sitblend_core::compose::ComposeMode) -> f64 {
        use sitblend_core::compose::ComposeMode;
        self.denoising_strength.unwrap_or(match mode {
            ComposeMode::Additive => ADDITIVE_DENOISING,
            ComposeMode::Blending => BLENDING_DENOISING,
        })
    }
}

fn pad_control(map: &ControlMap, w: u32, h: u32) -> ControlMap {
    let mut data = vec![0u8; (w * h) as usize];
    for y in 0..map.height() {
        let src = &map.data()[(y * map.width()) as usize..((y + 1) * map.width()) as usize];
        data[(y * w) as usize..(y * w + map.width()) as usize].copy_from_slice(src);
    }
    ControlMap::new(w, h, data, map.kind()).expect("padded dims")
}

/// Two units, in order: the background as style, the composed map as
/// outline.
pub fn build_generation_request(
    background: &RasterImage,
    composed: &ComposedControl,
    prompt: &str,
    seed: u64,
    params: &GenerationParams,
) -> Result<GenerationRequest, RequestError> {
    if background.dims() != composed.map.dims() {
        return Err(RequestError::DimensionMismatch {
            background: background.dims(),
            control: composed.map.dims(),
        });
    }
    let (w, h) = background.dims();
    let (pw, ph) = (w.div_ceil(8) * 8, h.div_ceil(8) * 8);
    let (bg, map) = if (pw, ph) == (w, h) {
        (background.clone(), composed.map.clone())
    } else if params.auto_pad {
        (
            background.pad_replicate(pw, ph).expect("larger dims"),
            pad_control(&composed.map, pw, ph),
        )
    } else {
        return Err(RequestError::NotMultipleOf8(w, h));
    };
    let bg_png = encode_png(&bg);
    let unit = |image: Vec<u8>, kind: UnitKind, weight: f64| ControlUnit {
        image,
        kind,
        weight,
        guidance_start: params.guidance_start,
        guidance_end: params.guidance_end,
    };
    let request = GenerationRequest {
        model: params.model.clone(),
        init_image: bg_png.clone(),
        prompt: prompt.to_string(),
        negative_prompt: params.negative_prompt.clone(),
        seed,
        steps: params.steps,
        cfg_scale: params.cfg_scale,
        denoising_strength: params.denoising_for(composed.mode),
        width: pw,
        height: ph,
        control_units: vec![
            unit(bg_png, UnitKind::Style, params.style_weight),
            unit(
                encode_control(&map),
                map.kind().into(),
                params.outline_weight,
            ),
        ],
    };
    request.validate()?;
    Ok(request)
}
