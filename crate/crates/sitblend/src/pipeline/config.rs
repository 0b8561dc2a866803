use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sitblend_core::compose::{Anchor, Combine, ComposeMode};
use sitblend_core::control::{CannyParams, ControlKind, ScribbleParams, SoftedgeParams};
use sitblend_core::legibility::VerifyParams;
use sitblend_core::raster::ResampleMethod;
use sitblend_core::Rgba;

use crate::backend::{ClientConfig, GenerationParams};
use crate::error::{Stage, StageError};

pub const BACKEND_URL_ENV: &str = "SITBLEND_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// Text with `{environment_description}` and `{chart_description}` slots.
    pub template: String,
    pub environment_description: String,
    pub chart_description: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            template: "a detailed picture of {environment_description} with {chart_description}"
                .into(),
            environment_description: "a modern building".into(),
            chart_description: "coloured bars on it".into(),
        }
    }
}

const SLOTS: [&str; 2] = ["environment_description", "chart_description"];

impl PromptConfig {
    pub fn render(&self) -> Result<String, String> {
        let mut out = String::new();
        let mut rest = self.template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}').ok_or("unclosed '{' in prompt template")?;
            out.push_str(match &after[..close] {
                "environment_description" => &self.environment_description,
                "chart_description" => &self.chart_description,
                other => {
                    return Err(format!(
                        "unknown prompt slot {{{other}}}; known slots: {}",
                        SLOTS.join(", ")
                    ))
                }
            });
            rest = &after[close + 1..];
        }
        if rest.contains('}') {
            return Err("unmatched '}' in prompt template".into());
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub antialias: bool,
    pub background: Rgba,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            antialias: false,
            background: Rgba::WHITE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub kind: ControlKind,
    pub canny: CannyParams,
    pub scribble: ScribbleParams,
    pub softedge: SoftedgeParams,
    pub depth_blur: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            kind: ControlKind::Canny,
            canny: CannyParams::default(),
            scribble: ScribbleParams::default(),
            softedge: SoftedgeParams::default(),
            depth_blur: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComposeConfig {
    pub mode: ComposeMode,
    pub anchor: Anchor,
    /// Placed chart height as a fraction of the background height.
    pub relative_scale: f64,
    pub margin: u32,
    pub chart_weight: f64,
    pub bg_weight: f64,
    pub combine: Combine,
    /// Edge detector for the background in blending mode.
    pub bg_edges: CannyParams,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            mode: ComposeMode::Additive,
            anchor: Anchor::Center,
            relative_scale: 0.6,
            margin: 8,
            chart_weight: 1.0,
            bg_weight: 0.6,
            combine: Combine::Sum,
            bg_edges: CannyParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    /// Deterministic in-process stand-in.
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub mode: BackendMode,
    /// Falls back to `SITBLEND_BACKEND_URL` when unset.
    pub url: Option<String>,
    pub request_timeout_ms: u64,
    pub timeout_ms: u64,
    pub poll_interval_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let c = ClientConfig::default();
        BackendConfig {
            mode: BackendMode::Mock,
            url: None,
            request_timeout_ms: c.request_timeout_ms,
            timeout_ms: c.timeout_ms,
            poll_interval_ms: c.poll_interval_ms,
            retries: c.retries,
            backoff_ms: c.backoff_ms,
        }
    }
}

impl BackendConfig {
    pub fn client_config(&self) -> Result<ClientConfig, String> {
        let endpoint = match &self.url {
            Some(u) => u.clone(),
            None => std::env::var(BACKEND_URL_ENV)
                .map_err(|_| format!("http backend needs backend.url or {BACKEND_URL_ENV}"))?,
        };
        Ok(ClientConfig {
            endpoint,
            request_timeout_ms: self.request_timeout_ms,
            timeout_ms: self.timeout_ms,
            poll_interval_ms: self.poll_interval_ms,
            retries: self.retries,
            backoff_ms: self.backoff_ms,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileMethod {
    /// Local interpolation only.
    Resample,
    /// Low-denoise img2img per tile through the configured backend.
    Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpscaleConfig {
    pub enabled: bool,
    pub rows: u32,
    pub cols: u32,
    /// Source pixels added on each interior side of a tile.
    pub overlap: u32,
    pub factor: u32,
    pub method: TileMethod,
    pub resampler: ResampleMethod,
    pub parallelism: usize,
    pub denoising_strength: f64,
    pub attach_outline: bool,
}

impl Default for UpscaleConfig {
    fn default() -> Self {
        UpscaleConfig {
            enabled: true,
            rows: 8,
            cols: 8,
            overlap: 16,
            factor: 4,
            method: TileMethod::Resample,
            resampler: ResampleMethod::Bicubic,
            parallelism: 4,
            denoising_strength: 0.2,
            attach_outline: false,
        }
    }
}

/// Everything a run depends on. Serialised in full into each manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub spec_path: PathBuf,
    pub background_path: PathBuf,
    pub prompt: PromptConfig,
    /// Random when unset; the value used is always recorded.
    pub seed: Option<u64>,
    pub render: RenderConfig,
    pub control: ControlConfig,
    pub compose: ComposeConfig,
    pub generation: GenerationParams,
    pub backend: BackendConfig,
    pub upscale: UpscaleConfig,
    pub verify: VerifyParams,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            spec_path: PathBuf::from("chart.json"),
            background_path: PathBuf::from("background.png"),
            prompt: PromptConfig::default(),
            seed: None,
            render: RenderConfig::default(),
            control: ControlConfig::default(),
            compose: ComposeConfig::default(),
            generation: GenerationParams::default(),
            backend: BackendConfig::default(),
            upscale: UpscaleConfig::default(),
            verify: VerifyParams::default(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn config_err(message: impl std::fmt::Display) -> StageError {
    StageError::new(Stage::Config, message)
}

fn unit_range(name: &str, v: f64) -> Result<(), StageError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be in [0, 1], got {v}")))
    }
}

impl PipelineConfig {
    /// Reads a JSON config. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, StageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.spec_path,
            &mut config.background_path,
            &mut config.out_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    /// Returns a copy with `overrides` deep-merged over this config.
    /// Objects merge key by key; anything else replaces.
    pub fn with_overrides(
        &self,
        overrides: &serde_json::Value,
    ) -> Result<PipelineConfig, StageError> {
        let mut base = serde_json::to_value(self).expect("config serialises");
        merge(&mut base, overrides);
        serde_json::from_value(base).map_err(|e| config_err(format!("overrides: {e}")))
    }

    pub fn validate(&self) -> Result<(), StageError> {
        self.prompt.render().map_err(config_err)?;
        self.control
            .canny
            .validate()
            .map_err(|e| config_err(format!("control.canny: {e}")))?;
        self.compose
            .bg_edges
            .validate()
            .map_err(|e| config_err(format!("compose.bg_edges: {e}")))?;
        self.verify
            .canny
            .validate()
            .map_err(|e| config_err(format!("verify.canny: {e}")))?;
        if !(self.control.depth_blur.is_finite() && self.control.depth_blur >= 0.0) {
            return Err(config_err("control.depth_blur must be >= 0"));
        }
        let c = &self.compose;
        if !(c.relative_scale > 0.0 && c.relative_scale <= 1.0) {
            return Err(config_err(format!(
                "compose.relative_scale must be in (0, 1], got {}",
                c.relative_scale
            )));
        }
        unit_range("compose.chart_weight", c.chart_weight)?;
        unit_range("compose.bg_weight", c.bg_weight)?;
        let g = &self.generation;
        if let Some(d) = g.denoising_strength {
            unit_range("generation.denoising_strength", d)?;
        }
        unit_range("generation.style_weight", g.style_weight)?;
        unit_range("generation.outline_weight", g.outline_weight)?;
        if !(0.0 <= g.guidance_start && g.guidance_start <= g.guidance_end && g.guidance_end <= 1.0)
        {
            return Err(config_err(
                "generation guidance window must satisfy 0 <= start <= end <= 1",
            ));
        }
        if g.steps == 0 {
            return Err(config_err("generation.steps must be at least 1"));
        }
        if !(g.cfg_scale.is_finite() && g.cfg_scale > 0.0) {
            return Err(config_err("generation.cfg_scale must be positive"));
        }
        let u = &self.upscale;
        if u.rows == 0 || u.cols == 0 || u.factor == 0 {
            return Err(config_err(
                "upscale rows, cols and factor must be at least 1",
            ));
        }
        unit_range("upscale.denoising_strength", u.denoising_strength)?;
        if self.verify.tolerance_px.is_nan() || self.verify.tolerance_px < 0.0 {
            return Err(config_err("verify.tolerance_px must be >= 0"));
        }
        if self.backend.mode == BackendMode::Http {
            self.backend.client_config().map_err(config_err)?;
        }
        Ok(())
    }
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_slots() {
        let p = PromptConfig::default();
        assert_eq!(
            p.render().unwrap(),
            "a detailed picture of a modern building with coloured bars on it"
        );
        let bad = PromptConfig {
            template: "{colour}".into(),
            ..p.clone()
        };
        assert!(bad.render().unwrap_err().contains("colour"));
        let plain = PromptConfig {
            template: "no slots".into(),
            ..p
        };
        assert_eq!(plain.render().unwrap(), "no slots");
    }

    #[test]
    fn overrides_deep_merge() {
        let c = PipelineConfig::default();
        let o = c
            .with_overrides(
                &serde_json::json!({"generation": {"steps": 10}, "compose": {"mode": "blending"}}),
            )
            .unwrap();
        assert_eq!(o.generation.steps, 10);
        assert_eq!(o.generation.cfg_scale, c.generation.cfg_scale);
        assert_eq!(o.compose.mode, ComposeMode::Blending);
        assert!(c
            .with_overrides(&serde_json::json!({"generation": {"stepz": 1}}))
            .is_err());
    }

    #[test]
    fn hed_is_softedge() {
        let c: ControlConfig = serde_json::from_str(r#"{"kind": "hed"}"#).unwrap();
        assert_eq!(c.kind, ControlKind::Softedge);
    }

    #[test]
    fn round_trip() {
        let c = PipelineConfig {
            seed: Some(7),
            ..Default::default()
        };
        let back: PipelineConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
