//! Experiment configuration, resource budget and the bundled presets.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::TargetShape;
use crate::scenario::{cn2_for_coherence_length, Scenario, SourceKind};

use super::pipeline::PipelineOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AnalyticSweep,
    SimulateImage,
    ValidateStats,
    Psf,
    Contrast,
    SnrCurve,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AnalyticSweep => "analytic-sweep",
            ExperimentKind::SimulateImage => "simulate-image",
            ExperimentKind::ValidateStats => "validate-stats",
            ExperimentKind::Psf => "psf",
            ExperimentKind::Contrast => "contrast",
            ExperimentKind::SnrCurve => "snr-curve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSize {
    pub trials: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub max_grid: usize,
    pub max_frames: usize,
    pub max_trials: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_grid: 256,
            max_frames: 10_000,
            max_trials: 200,
        }
    }
}

impl Budget {
    pub fn check(&self, grid: usize, size: RunSize) -> Result<()> {
        if grid > self.max_grid {
            return Err(Error::Budget(format!("grid {grid}² exceeds {}²", self.max_grid)));
        }
        if size.frames > self.max_frames {
            return Err(Error::Budget(format!("{} frames exceed {}", size.frames, self.max_frames)));
        }
        if size.trials > self.max_trials {
            return Err(Error::Budget(format!("{} trials exceed {}", size.trials, self.max_trials)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Ω_B·T_I
    OmegaTi,
    /// β = A_b/πa₀²
    Beta,
    /// 𝓘_Ω
    BrightnessOmega,
    /// Common C²ₙ on all three paths
    Cn2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub log: bool,
    /// 𝓘_Ω when it is not the swept variable.
    pub brightness_omega: f64,
    /// Ω_B·T_I when it is not the swept variable.
    pub omega_ti: f64,
    /// Uniform target cross-section A_T (m²).
    pub target_area: f64,
    /// Sweep the configured scenario (source kind replaced per curve) instead of the reference parameter set.
    pub use_config_scenario: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variable: SweepVariable::OmegaTi,
            start: 1e2,
            stop: 1e9,
            points: 71,
            log: true,
            brightness_omega: 1.0,
            omega_ti: 1e6,
            target_area: 50.0,
            use_config_scenario: false,
        }
    }
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.start.is_finite() && self.stop.is_finite()) || self.start >= self.stop {
            return Err(Error::Config("sweep needs start < stop and at least 2 points".into()));
        }
        if self.log && self.start <= 0.0 {
            return Err(Error::Config("log sweep needs a positive start".into()));
        }
        let m = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let t = i as f64 / m;
                if self.log {
                    (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSizes {
    pub source_grid: usize,
    pub source_frames: usize,
    pub screen_grid: usize,
    pub screens: usize,
    /// Independent speckle-target draws for the far-field statistics checks.
    pub speckle_draws: usize,
    /// Test hook: multiply the propagation kernel by this factor (negative control).
    pub corrupt_kernel: Option<f64>,
}

impl Default for ValidationSizes {
    fn default() -> Self {
        ValidationSizes {
            source_grid: 64,
            source_frames: 10_000,
            screen_grid: 64,
            screens: 10_000,
            speckle_draws: 2_000,
            corrupt_kernel: None,
        }
    }
}

/// Low-light run for the pre-saturation SNR growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeRun {
    /// Multiplies the scenario photon flux.
    pub flux_scale: f64,
    pub run: RunSize,
    pub roi: usize,
    pub checkpoints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub scenario: Scenario,
    pub pipeline: PipelineOptions,
    pub target: TargetShape,
    pub run: RunSize,
    /// Vacuum counterpart for the PSF ratio.
    #[serde(default)]
    pub reference_run: Option<RunSize>,
    /// Frame counts at which SNR is evaluated (snr-curve); defaults to the run length.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default)]
    pub slope: Option<SlopeRun>,
    /// Contrast region: target support dilated by this many √α ρ_L.
    #[serde(default = "default_dilation")]
    pub region_dilation: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub validation: ValidationSizes,
}

fn default_dilation() -> f64 {
    2.0
}

fn default_bootstrap() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Referenced files exist, the output directory is writable and the run fits the budget.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate_parameters()?;
        if let TargetShape::Pgm { path } = &self.target {
            if !path.is_file() {
                return Err(Error::Config(format!("target file {} does not exist", path.display())));
            }
        }
        if let Some(dir) = &self.out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let probe = dir.join(".ghostlidar-write-test");
            std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
            let _ = std::fs::remove_file(&probe);
        }
        let simulated = !matches!(self.experiment, ExperimentKind::AnalyticSweep | ExperimentKind::ValidateStats);
        if simulated {
            self.budget.check(self.pipeline.grid_size, self.run)?;
            if let Some(r) = self.reference_run {
                self.budget.check(self.pipeline.grid_size, r)?;
            }
            if let Some(s) = &self.slope {
                self.budget.check(self.pipeline.grid_size, s.run)?;
            }
            if let Some(&last) = self.checkpoints.last() {
                if last != self.run.frames {
                    return Err(Error::Config("the last checkpoint must equal the run length".into()));
                }
            }
        } else {
            let v = &self.validation;
            let frames = v.source_frames.max(v.screens).max(v.speckle_draws);
            let budget = Budget {
                max_trials: usize::MAX,
                ..self.budget
            };
            budget.check(v.source_grid.max(v.screen_grid), RunSize { trials: 1, frames })?;
        }
        Ok(())
    }

    /// The bundled configuration of each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::AnalyticSweep => analytic_preset(),
            ExperimentKind::ValidateStats => ExperimentConfig {
                experiment: kind,
                ..analytic_preset()
            },
            ExperimentKind::SimulateImage => simulate_preset(),
            ExperimentKind::Psf => psf_preset(),
            ExperimentKind::Contrast => contrast_preset(),
            ExperimentKind::SnrCurve => snr_preset(),
        }
    }
}

const MC_SOURCE_RADIUS: f64 = 0.01;

/// Desk-scale pseudothermal scenario: λ₀ = 1.5 µm, a₀ = 1 cm, L = 1 km, Ω_BT₀ = 10³, vacuum.
///
/// ρ₀ is set through `a0_over_rho0`; the physical ρ₀ of a ground-glass diffuser cannot be
/// gridded at this a₀, so the dimensionless ratios are what the runs preserve.
pub fn mc_scenario(a0_over_rho0: f64, photon_flux: f64, pixel_area: f64) -> Scenario {
    let t0 = 1e-6;
    Scenario {
        wavelength: 1.5e-6,
        source_radius: MC_SOURCE_RADIUS,
        coherence_length: MC_SOURCE_RADIUS / a0_over_rho0,
        coherence_time: t0,
        photon_flux,
        path_length: 1000.0,
        cn2_reference: 0.0,
        cn2_signal: 0.0,
        cn2_target: 0.0,
        quantum_efficiency: 0.9,
        detector_bandwidth: 1e9,
        notch_bandwidth: 1e6,
        pixel_area,
        bucket_area: PI * MC_SOURCE_RADIUS * MC_SOURCE_RADIUS,
        integration_time: 1000.0 * t0,
        source_kind: SourceKind::Pseudothermal,
    }
}

fn analytic_preset() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentKind::AnalyticSweep,
        scenario: Scenario::paper_preset(SourceKind::Pseudothermal, 1.0),
        pipeline: PipelineOptions::new(64),
        target: TargetShape::Point,
        run: RunSize { trials: 1, frames: 2 },
        reference_run: None,
        checkpoints: Vec::new(),
        slope: None,
        region_dilation: default_dilation(),
        bootstrap: default_bootstrap(),
        seed: 1,
        out_dir: None,
        budget: Budget::default(),
        sweep: SweepSpec::default(),
        validation: ValidationSizes::default(),
    }
}

fn with_frames(mut s: Scenario, frames: usize) -> Scenario {
    s.integration_time = frames as f64 * s.coherence_time;
    s
}

fn psf_preset() -> ExperimentConfig {
    let base = mc_scenario(4.0, 2e21, 3e-15);
    let cn2 = cn2_for_coherence_length(base.wavenumber(), base.path_length, base.source_radius)
        .expect("positive inputs");
    let mut pipeline = PipelineOptions::new(256);
    pipeline.roi = Some(32);
    ExperimentConfig {
        experiment: ExperimentKind::Psf,
        scenario: with_frames(base.with_turbulence(cn2, cn2, 0.0), 100),
        pipeline,
        target: TargetShape::Point,
        run: RunSize { trials: 96, frames: 100 },
        reference_run: Some(RunSize { trials: 1, frames: 2000 }),
        ..analytic_preset()
    }
}

fn contrast_preset() -> ExperimentConfig {
    let s = with_frames(mc_scenario(12.0, 4e20, 1.4e-12), 250);
    let rho_l = 2.0 * s.path_length / (s.wavenumber() * s.source_radius);
    let mut pipeline = PipelineOptions::new(256);
    pipeline.roi = Some(32);
    pipeline.source_pitch = Some(s.coherence_length / 3.0);
    ExperimentConfig {
        experiment: ExperimentKind::Contrast,
        scenario: s,
        pipeline,
        target: TargetShape::Disc {
            radius: 2.5 * rho_l,
            center: [0.0, 0.0],
        },
        run: RunSize { trials: 60, frames: 250 },
        ..analytic_preset()
    }
}

fn snr_preset() -> ExperimentConfig {
    let s = with_frames(mc_scenario(4.0, 3.5e19, 1.5e-12), 2000);
    let mut pipeline = PipelineOptions::new(128);
    pipeline.roi = Some(16);
    pipeline.source_pitch = Some(s.coherence_length / 3.0);
    ExperimentConfig {
        experiment: ExperimentKind::SnrCurve,
        scenario: s,
        pipeline,
        target: TargetShape::Disc {
            radius: 0.57,
            center: [0.0, 0.0],
        },
        run: RunSize { trials: 200, frames: 2000 },
        checkpoints: vec![50, 100, 200, 400, 1000, 2000],
        slope: Some(SlopeRun {
            flux_scale: 3e-4,
            run: RunSize { trials: 200, frames: 400 },
            roi: 32,
            checkpoints: vec![50, 100, 200, 400],
        }),
        ..analytic_preset()
    }
}

fn simulate_preset() -> ExperimentConfig {
    let s = with_frames(mc_scenario(4.0, 2e21, 3e-15), 2000);
    let rho_l = 2.0 * s.path_length / (s.wavenumber() * s.source_radius);
    let mut pipeline = PipelineOptions::new(256);
    pipeline.roi = Some(32);
    ExperimentConfig {
        experiment: ExperimentKind::SimulateImage,
        scenario: s,
        pipeline,
        target: TargetShape::TwoPoint {
            separation: 4.0 * rho_l,
            spot_radius: 0.0,
        },
        run: RunSize { trials: 1, frames: 2000 },
        ..analytic_preset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in [
            ExperimentKind::AnalyticSweep,
            ExperimentKind::SimulateImage,
            ExperimentKind::ValidateStats,
            ExperimentKind::Psf,
            ExperimentKind::Contrast,
            ExperimentKind::SnrCurve,
        ] {
            let c = ExperimentConfig::preset(kind);
            c.validate().unwrap();
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), c);
        }
    }

    #[test]
    fn budget_and_files() {
        let mut c = ExperimentConfig::preset(ExperimentKind::Psf);
        c.run.frames = 20_000;
        assert!(matches!(c.validate(), Err(Error::Budget(_))));
        let mut c = ExperimentConfig::preset(ExperimentKind::SimulateImage);
        c.target = TargetShape::Pgm {
            path: "/nonexistent/target.pgm".into(),
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_grid() {
        let v = SweepSpec::default().values().unwrap();
        assert_eq!(v.len(), 71);
        assert!((v[0] - 1e2).abs() < 1e-9 && (v[70] / 1e9 - 1.0).abs() < 1e-12);
        let bad = SweepSpec {
            start: 0.0,
            ..SweepSpec::default()
        };
        assert!(bad.values().is_err());
    }

    #[test]
    fn psf_preset_has_source_sized_turbulence() {
        let c = ExperimentConfig::preset(ExperimentKind::Psf);
        let g = crate::scenario::derive_geometry(&c.scenario).unwrap();
        assert!((g.alpha - 2.0).abs() < 1e-9);
        assert!(g.signal.logamp_variance() < 0.3);
    }
}
