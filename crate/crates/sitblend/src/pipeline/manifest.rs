use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sitblend_core::compose::{Combine, ComposeMode, PlacementTransform, SourceHashes};
use sitblend_core::control::ControlKind;
use sitblend_core::raster::ResampleMethod;

use super::config::{PipelineConfig, TileMethod};
use crate::backend::UnitKind;
use crate::error::{Stage, StageError};
use crate::hashing::{canonical_json, sha256_hex};

pub const MANIFEST_FORMAT: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
    pub stage_ms: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InputHashes {
    pub chart_spec: Option<String>,
    pub background: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRecord {
    pub mode: ComposeMode,
    pub placement: PlacementTransform,
    pub chart_weight: f64,
    pub bg_weight: f64,
    pub combine: Option<Combine>,
    pub sources: SourceHashes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub kind: UnitKind,
    pub weight: f64,
    pub guidance_start: f64,
    pub guidance_end: f64,
    pub image_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub payload_sha256: String,
    pub model: String,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub steps: u32,
    pub cfg_scale: f64,
    pub denoising_strength: f64,
    pub width: u32,
    pub height: u32,
    /// True when the inputs were padded up to multiples of 8.
    pub padded: bool,
    pub units: Vec<UnitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlanRecord {
    pub rows: u32,
    pub cols: u32,
    pub tiles: usize,
    pub overlap: u32,
    pub factor: u32,
    pub method: TileMethod,
    pub resampler: ResampleMethod,
    pub input_dims: [u32; 2],
    pub output_dims: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegibilitySummary {
    pub report: String,
    pub edge_alignment: f64,
    pub bars_within_tolerance: Option<bool>,
}

/// Durable record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub status: RunStatus,
    pub error: Option<StageError>,
    pub timestamps: Timestamps,
    /// The configuration as run, with the seed filled in.
    pub config: PipelineConfig,
    pub seed: u64,
    pub prompt: Option<String>,
    pub inputs: InputHashes,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    pub outline_kind: ControlKind,
    pub composition: Option<CompositionRecord>,
    pub request: Option<RequestRecord>,
    pub tile_plan: Option<TilePlanRecord>,
    pub legibility: Option<LegibilitySummary>,
    pub backend_info: Option<String>,
    pub job_id: Option<String>,
    /// SHA-256 of the canonical JSON of everything except the run id,
    /// timestamps, job id and this field.
    pub manifest_hash: String,
}

impl RunManifest {
    pub fn compute_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serialises");
        let obj = v.as_object_mut().expect("manifest is an object");
        for key in ["run_id", "timestamps", "job_id", "manifest_hash"] {
            obj.remove(key);
        }
        sha256_hex(&canonical_json(&v))
    }

    pub fn seal(&mut self) {
        self.manifest_hash = self.compute_hash();
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = serde_json::to_vec_pretty(self).expect("manifest serialises");
        b.push(b'\n');
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<RunManifest, String> {
        serde_json::from_slice(bytes).map_err(|e| e.to_string())
    }

    pub fn load(run_dir: &Path) -> Result<RunManifest, StageError> {
        let path = run_dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path)
            .map_err(|e| StageError::new(Stage::Verify, format!("{}: {e}", path.display())))?;
        RunManifest::from_bytes(&bytes)
            .map_err(|e| StageError::new(Stage::Verify, format!("{}: {e}", path.display())))
    }

    pub fn artifact_hashes(&self) -> BTreeMap<String, String> {
        self.artifacts
            .iter()
            .map(|(k, a)| (k.clone(), a.sha256.clone()))
            .collect()
    }
}

/// Checks that every artifact exists with its recorded hash, that the
/// manifest hash is current, and that the file re-serialises to the
/// same bytes.
pub fn verify_manifest(run_dir: &Path) -> Result<RunManifest, StageError> {
    let err = |m: String| StageError::new(Stage::Verify, m);
    let raw = std::fs::read(run_dir.join(MANIFEST_FILE))
        .map_err(|e| err(format!("{MANIFEST_FILE}: {e}")))?;
    let manifest = RunManifest::from_bytes(&raw).map_err(err)?;
    if manifest.to_bytes() != raw {
        return Err(err(
            "manifest does not re-serialise to identical bytes".into()
        ));
    }
    if manifest.compute_hash() != manifest.manifest_hash {
        return Err(err("manifest_hash does not match contents".into()));
    }
    for (name, a) in &manifest.artifacts {
        let bytes = std::fs::read(run_dir.join(&a.path))
            .map_err(|e| err(format!("artifact {name} ({}): {e}", a.path)))?;
        if sha256_hex(&bytes) != a.sha256 {
            return Err(err(format!(
                "artifact {name} ({}) does not match its recorded hash",
                a.path
            )));
        }
    }
    Ok(manifest)
}
