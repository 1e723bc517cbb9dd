//! Data ingestion, replicate synthesis, metrics and experiments behind the
//! `etp` command line tool.

mod config;
mod experiments;
mod panel;
mod synthesis;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

pub use config::{ExperimentConfig, InputSpec, Strategy, SyntheticSpec, DEFAULT_ALPHA, DEFAULT_DELTA_Z};
pub use experiments::{
    experiment_delta_z_grid, experiment_kng_rate, experiment_manifold, experiment_power, write_delta_z_csv,
    DeltaZRow, KngRateResult, KngRateRow, ManifoldResult, PowerConfig, PowerResult, PowerRow, KNG_DIM,
};
pub use panel::{ingest_panel, synth_panel};
pub use synthesis::{
    contraction_metrics, read_replicates_csv, run_synthesis, validate_replicates, write_contraction_csv, write_metrics_csv,
    write_replicates_csv, ContractionEvents, ContractionRow, ErrorRow, MetricsReport, MonthFailure, Replicate,
    SynthesisOutput,
};

use crate::domain::CountPanel;
use crate::error::Result;

/// Loads the configured input panel.
pub fn load_input(input: &InputSpec) -> Result<CountPanel> {
    match input {
        InputSpec::Csv(path) => ingest_panel(path),
        InputSpec::Synthetic(s) => synth_panel(s.counties, s.months, s.seed),
    }
}

/// Creates `path` and wraps it in a buffered writer.
pub fn create_output(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthesisSummary<'a> {
    config: &'a ExperimentConfig,
    counties: usize,
    months: usize,
    median_case_relative_error: f64,
    worst_county_case_relative_error: f64,
    failures: &'a [MonthFailure],
    chain_acceptance: &'a [(usize, f64)],
}

/// Writes `replicates.csv`, `metrics.csv`, `contraction.csv` and
/// `summary.json` into `dir`.
pub fn write_synthesis_outputs(dir: &Path, config: &ExperimentConfig, panel: &CountPanel, out: &SynthesisOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_replicates_csv(create_output(&dir.join("replicates.csv"))?, &out.replicates)?;
    write_metrics_csv(create_output(&dir.join("metrics.csv"))?, &out.metrics)?;
    write_contraction_csv(create_output(&dir.join("contraction.csv"))?, &out.metrics)?;
    let summary = SynthesisSummary {
        config,
        counties: panel.counties(),
        months: panel.months(),
        median_case_relative_error: out.metrics.median_case_error(),
        worst_county_case_relative_error: out.metrics.worst_county_error(),
        failures: &out.metrics.failures,
        chain_acceptance: &out.metrics.chain_acceptance,
    };
    write_json(&dir.join("summary.json"), &summary)
}
