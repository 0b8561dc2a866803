use std::path::Path;

use serde_json::json;
use sitblend::gallery::write_fixtures;
use sitblend::pipeline::{
    legibility_report, run_pipeline, run_pipeline_with, verify_manifest, PipelineConfig,
    RunManifest, RunOptions, RunStatus, MANIFEST_FILE,
};
use sitblend::Stage;
use sitblend_core::control::ControlKind;
use sitblend_core::legibility::LegibilityReport;
use tempfile::TempDir;

/// Config for one gallery fixture, runs going under the temp dir.
fn fixture(tmp: &Path, name: &str) -> PipelineConfig {
    let (_, mut config) = write_fixtures(&tmp.join("fixtures"), &tmp.join("runs"))
        .unwrap()
        .into_iter()
        .find(|(n, _)| n == name)
        .unwrap();
    config.seed = Some(42);
    config
}

fn small(mut config: PipelineConfig) -> PipelineConfig {
    config.upscale.enabled = false;
    config
}

#[test]
fn same_seed_same_bytes() {
    let tmp = TempDir::new().unwrap();
    let config = fixture(tmp.path(), "bar_columns");
    let a = run_pipeline(&config).unwrap();
    let b = run_pipeline(&config).unwrap();
    assert_ne!(a.run_dir, b.run_dir);
    assert_eq!(a.manifest.manifest_hash, b.manifest.manifest_hash);
    assert_eq!(a.manifest.artifact_hashes(), b.manifest.artifact_hashes());
    for name in ["chart", "outline", "background", "output", "upscaled"] {
        assert!(a.manifest.artifacts.contains_key(name), "{name}");
    }
}

#[test]
fn every_config_field_reaches_the_hash() {
    let tmp = TempDir::new().unwrap();
    let base = small(fixture(tmp.path(), "line_facade"));
    let reference = run_pipeline(&base).unwrap().manifest.manifest_hash;
    let changes = [
        json!({"seed": 43}),
        json!({"prompt": {"environment_description": "a glass tower"}}),
        json!({"render": {"antialias": true}}),
        json!({"control": {"kind": "scribble"}}),
        json!({"control": {"canny": {"sigma": 1.2}}}),
        json!({"compose": {"relative_scale": 0.5}}),
        json!({"compose": {"mode": "blending"}}),
        json!({"compose": {"chart_weight": 0.8}}),
        json!({"generation": {"steps": 20}}),
        json!({"generation": {"negative_prompt": "blurry"}}),
        json!({"generation": {"denoising_strength": 0.7}}),
        json!({"verify": {"radius": 3}}),
        json!({"upscale": {"factor": 2}}),
    ];
    for change in changes {
        let config = base.with_overrides(&change).unwrap();
        let hash = run_pipeline(&config).unwrap().manifest.manifest_hash;
        assert_ne!(hash, reference, "{change}");
    }
}

#[test]
fn missing_background_fails_at_its_stage() {
    let tmp = TempDir::new().unwrap();
    let mut config = small(fixture(tmp.path(), "bar_columns"));
    config.background_path = tmp.path().join("nope.png");
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.stage(), Stage::LoadBackground);
    let manifest = err.manifest.unwrap();
    assert_eq!(manifest.status, RunStatus::Failed);
    assert_eq!(manifest.error.unwrap().stage, Stage::LoadBackground);
    assert!(err.run_dir.unwrap().join(MANIFEST_FILE).exists());
}

#[test]
fn bad_spec_fails_at_parse() {
    let tmp = TempDir::new().unwrap();
    let mut config = small(fixture(tmp.path(), "bar_columns"));
    let spec = tmp.path().join("broken.json");
    std::fs::write(&spec, "{\"idiom\": ").unwrap();
    config.spec_path = spec;
    assert_eq!(run_pipeline(&config).unwrap_err().stage(), Stage::ParseSpec);
}

#[test]
fn manifest_verifies_and_detects_tampering() {
    let tmp = TempDir::new().unwrap();
    let config = small(fixture(tmp.path(), "pie_opera_house"));
    let dir = tmp.path().join("fixed");
    let run = run_pipeline_with(
        &config,
        RunOptions {
            run_dir: Some(dir.clone()),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(verify_manifest(&dir).unwrap(), run.manifest);

    let output = dir.join(&run.manifest.artifacts["output"].path);
    let mut bytes = std::fs::read(&output).unwrap();
    std::fs::write(&output, b"x").unwrap();
    let err = verify_manifest(&dir).unwrap_err();
    assert_eq!(err.stage, Stage::Verify);
    assert!(err.message.contains("output"), "{err}");
    std::fs::write(&output, &bytes).unwrap();
    verify_manifest(&dir).unwrap();

    let mut edited = run.manifest.clone();
    edited.seed += 1;
    std::fs::write(dir.join(MANIFEST_FILE), edited.to_bytes()).unwrap();
    assert!(verify_manifest(&dir)
        .unwrap_err()
        .message
        .contains("manifest_hash"));

    bytes = run.manifest.to_bytes();
    bytes.insert(1, b' ');
    std::fs::write(dir.join(MANIFEST_FILE), &bytes).unwrap();
    assert!(verify_manifest(&dir)
        .unwrap_err()
        .message
        .contains("re-serialise"));
}

#[test]
fn stored_report_matches_recomputed() {
    let tmp = TempDir::new().unwrap();
    let run = run_pipeline(&small(fixture(tmp.path(), "bar_columns"))).unwrap();
    let summary = run.manifest.legibility.clone().unwrap();
    let stored: LegibilityReport =
        serde_json::from_slice(&std::fs::read(run.run_dir.join(&summary.report)).unwrap()).unwrap();
    assert_eq!(legibility_report(&run.run_dir).unwrap(), stored);
    assert_eq!(stored.edge_alignment, summary.edge_alignment);
    assert!(stored.bars.as_ref().is_some_and(|b| b.len() == 5));
}

#[test]
fn mock_runs_stay_aligned_for_each_outline_kind() {
    let tmp = TempDir::new().unwrap();
    let base = small(fixture(tmp.path(), "bar_columns"));
    for kind in ControlKind::ALL {
        let mut config = base.clone();
        config.control.kind = kind;
        let run = run_pipeline(&config).unwrap();
        assert_eq!(run.manifest.outline_kind, kind);
        let alignment = run.manifest.legibility.unwrap().edge_alignment;
        assert!(alignment >= 0.9, "{kind:?}: {alignment}");
    }
}

#[test]
fn unset_seed_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let mut config = small(fixture(tmp.path(), "scatter_brick_wall"));
    config.seed = None;
    let run = run_pipeline(&config).unwrap();
    assert_eq!(run.manifest.config.seed, Some(run.manifest.seed));
    let loaded = RunManifest::load(&run.run_dir).unwrap();
    assert_eq!(loaded, run.manifest);
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path(), "bar_columns");
    let config =
        PipelineConfig::load(&tmp.path().join("fixtures/bar_columns/config.json")).unwrap();
    assert!(config
        .spec_path
        .ends_with("fixtures/bar_columns/chart.json"));
    assert!(config.spec_path.exists());
    assert!(config.background_path.exists());
}
