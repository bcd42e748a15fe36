//! JSON output shapes for the CLI (`--json`). The schema these serialize to
//! is published at `schema/pebc-output.schema.json`.

use serde::Serialize;

#[derive(Serialize)]
pub struct DiagnosticJson {
    pub severity: String,
    pub message: String,
    pub file: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Serialize)]
pub struct CheckJson {
    pub well_formed: bool,
    pub diagnostics: Vec<DiagnosticJson>,
}

#[derive(Serialize)]
pub struct SimulateJson {
    pub seed: u64,
    pub steps: u64,
    pub termination: String,
    pub final_state: serde_json::Value,
    pub rng_algorithm: String,
}

#[derive(Serialize)]
pub struct EstimateJson {
    pub query: String,
    pub mean: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub runs: u64,
    pub seed: u64,
    pub wall_time: f64,
    pub truncated_runs: u64,
    pub rng_algorithm: String,
}

#[derive(Serialize)]
pub struct ExactJson {
    pub query: String,
    /// Exact rational, rendered as `numerator/denominator`.
    pub exact: String,
    /// The same value as a decimal approximation.
    pub decimal: f64,
    pub states: usize,
    pub transitions: usize,
    pub abstracted: Vec<String>,
    pub wall_time: f64,
}

#[derive(Serialize)]
pub struct ExportJson {
    pub states: usize,
    pub transitions: usize,
    pub files: Vec<String>,
}

#[derive(Serialize)]
pub struct ErrorJson {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}
