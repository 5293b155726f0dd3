//! Experiment orchestration: Monte Carlo pipeline, experiments, validation suites, reports.

pub mod config;
pub mod experiments;
pub mod pipeline;
pub mod report;
pub mod sweep;
pub mod validate;

pub use config::{mc_scenario, Budget, ExperimentConfig, ExperimentKind, RunSize, SlopeRun, SweepSpec, SweepVariable, ValidationSizes};
pub use pipeline::{Pipeline, PipelineOptions, TargetModel, TrialResult, TrialState};
pub use report::{CheckResult, ColumnDoc, Comparison, RunReport};

use crate::error::Result;

/// Runs the experiment named by `config.experiment`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    match config.experiment {
        ExperimentKind::AnalyticSweep => sweep::run_analytic_sweep(config),
        ExperimentKind::SimulateImage => experiments::run_simulation(config),
        ExperimentKind::ValidateStats => validate::run_validation(config),
        ExperimentKind::Psf => experiments::run_psf(config),
        ExperimentKind::Contrast => experiments::run_contrast(config),
        ExperimentKind::SnrCurve => experiments::run_snr_curve(config),
    }
}
