use std::fmt;

use serde::{Deserialize, Serialize};

/// Pipeline stage names, as they appear in errors and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    LoadSpec,
    ParseSpec,
    Layout,
    Render,
    LoadBackground,
    Extract,
    Compose,
    Generate,
    Upscale,
    Verify,
    Write,
    Session,
    Request,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::LoadSpec => "load-spec",
            Stage::ParseSpec => "parse-spec",
            Stage::Layout => "layout",
            Stage::Render => "render",
            Stage::LoadBackground => "load-background",
            Stage::Extract => "extract",
            Stage::Compose => "compose",
            Stage::Generate => "generate",
            Stage::Upscale => "upscale",
            Stage::Verify => "verify",
            Stage::Write => "write",
            Stage::Session => "session",
            Stage::Request => "request",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        StageError {
            stage,
            message: message.to_string(),
        }
    }
}

/// Shorthand for attaching a stage to any displayable error.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: fmt::Display> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}
