//! Chart specs as JSON documents.

use sitblend_core::chart::ChartError;
use sitblend_core::ChartSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid chart spec: {0}")]
    Invalid(#[from] ChartError),
}

/// Parses and validates a chart spec, filling in option defaults.
pub fn parse_spec(text: &str) -> Result<ChartSpec, SpecError> {
    let mut spec: ChartSpec = serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.fill_defaults();
    spec.validate()?;
    Ok(spec)
}

/// Canonical text form: pretty JSON in declaration order, trailing newline.
pub fn serialize_spec(spec: &ChartSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("chart spec serialises");
    s.push('\n');
    s
}
