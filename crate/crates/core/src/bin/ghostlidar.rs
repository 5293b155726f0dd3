use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ghostlidar::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use ghostlidar::scenario::{Scenario, SourceKind};

/// Reflective ghost imaging through turbulence: analytic model and Monte Carlo simulator.
#[derive(Parser)]
#[command(name = "ghostlidar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SNR sweeps of the three imagers plus the closed-form checks.
    Analytic(Common),
    /// Simulate dc/ac ghost images of a target.
    Simulate(Common),
    /// Run the source, turbulence, optics and exactness suites.
    Validate(Common),
    /// Point-spread-function width with and without turbulence.
    Psf(Common),
    /// dc-coupled contrast of an extended target.
    Contrast(Common),
    /// Trial-ensemble SNR against frame count.
    SnrCurve(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// λ₀ = 1.5 µm, a₀ = 3 cm, L = 1 km parameter set with 𝓘_Ω = 1.
    PaperSec5,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; the bundled preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report, CSV and images.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the scenario with a named parameter set.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Analytic(c) => (ExperimentKind::AnalyticSweep, c),
        Command::Simulate(c) => (ExperimentKind::SimulateImage, c),
        Command::Validate(c) => (ExperimentKind::ValidateStats, c),
        Command::Psf(c) => (ExperimentKind::Psf, c),
        Command::Contrast(c) => (ExperimentKind::Contrast, c),
        Command::SnrCurve(c) => (ExperimentKind::SnrCurve, c),
    };
    match run(kind, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(kind: ExperimentKind, args: Common) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(kind),
    };
    if config.experiment != kind {
        return Err(format!(
            "configuration is for `{}`, not `{}`",
            config.experiment.name(),
            kind.name()
        )
        .into());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.out_dir = Some(out);
    }
    if let Some(Preset::PaperSec5) = args.preset {
        config.scenario = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0);
        config.sweep.use_config_scenario = true;
    }
    if args.dump_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(ExitCode::SUCCESS);
    }
    let report = run_experiment(&config)?;
    print!("{}", report.summary());
    if let Some(dir) = &config.out_dir {
        let path = dir.join("report.json");
        report.write_json(&path)?;
        println!("report: {}", path.display());
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
