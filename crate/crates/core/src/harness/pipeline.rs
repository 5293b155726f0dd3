//! One Monte Carlo trial: source → screens → target → bucket, with the reference arm on a CCD.
//!
//! Screens follow the endpoint-factorized model: R and S multiply the source-plane field,
//! T multiplies the reflected field at the target plane. Within a trial the target speckle
//! and screens are frozen; every frame draws a fresh source field and fresh shot noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::{apply_screen_in_place, ScreenSampler, TurbulenceScreen};
use crate::error::{Error, Result};
use crate::fieldgen::{PseudothermalGenerator, SlmGenerator, SourceFrame};
use crate::grid::{ComplexGrid, GridSpec, Plane, RealGrid};
use crate::optics::{reflect_in_place, sample_target, BucketAperture, Propagator, SpeckleTarget, TargetShape};
use crate::scenario::{derive_geometry, DerivedGeometry, Path3, Scenario, SourceKind};
use crate::seed::{Purpose, SeedRecord};
use crate::sensing::{poisson, CorrelationSums, Correlator};

const FRAME_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetModel {
    /// Fully developed speckle, T ~ CN(0, λ²𝒯/Δx²), redrawn per trial.
    Speckle,
    /// Deterministic T = (λ/Δx)√𝒯; same mean power, no speckle.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    /// Grid side N for every plane.
    pub grid_size: usize,
    /// Source-plane pitch (m); defaults to ρ₀/4.
    #[serde(default)]
    pub source_pitch: Option<f64>,
    /// Side of the centred CCD window that is read out; defaults to the full grid.
    #[serde(default)]
    pub roi: Option<usize>,
    /// Jackknife blocks per trial.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// e⁻¹ radius of the logamplitude kernel (m); defaults to √(λ₀L).
    #[serde(default)]
    pub logamp_width: Option<f64>,
    /// SLM macropixel side (m) for the computational source; defaults to √π ρ₀.
    #[serde(default)]
    pub slm_macropixel: Option<f64>,
    #[serde(default = "default_target_model")]
    pub target_model: TargetModel,
    /// Poisson detection; off feeds mean counts to the correlator.
    #[serde(default = "default_true")]
    pub shot_noise: bool,
    /// Reuse trial 0's turbulence screens in every trial.
    #[serde(default)]
    pub condition_on_screens: bool,
}

fn default_blocks() -> usize {
    8
}

fn default_target_model() -> TargetModel {
    TargetModel::Speckle
}

fn default_true() -> bool {
    true
}

impl PipelineOptions {
    pub fn new(grid_size: usize) -> Self {
        PipelineOptions {
            grid_size,
            source_pitch: None,
            roi: None,
            blocks: default_blocks(),
            logamp_width: None,
            slm_macropixel: None,
            target_model: TargetModel::Speckle,
            shot_noise: true,
            condition_on_screens: false,
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Pseudothermal(PseudothermalGenerator),
    Slm(SlmGenerator),
}

impl Source {
    fn frame(&self, seed: SeedRecord) -> SourceFrame {
        match self {
            Source::Pseudothermal(g) => g.frame(seed),
            Source::Slm(g) => g.frame(seed),
        }
    }
}

/// Frozen per-trial randomness.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub trial: u64,
    pub reference_screen: TurbulenceScreen,
    pub signal_screen: TurbulenceScreen,
    pub target_screen: TurbulenceScreen,
    pub target: SpeckleTarget,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: u64,
    /// Sums after each requested frame count, in the order requested.
    pub snapshots: Vec<CorrelationSums>,
    /// Mean bucket flux over the trial (photons/s).
    pub mean_bucket_flux: f64,
}

impl TrialResult {
    pub fn sums(&self) -> &CorrelationSums {
        self.snapshots.last().expect("at least one snapshot")
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    scenario: Scenario,
    geometry: DerivedGeometry,
    options: PipelineOptions,
    master_seed: u64,
    source_spec: GridSpec,
    target_spec: GridSpec,
    roi_spec: GridSpec,
    roi_indices: Vec<usize>,
    source: Source,
    forward: Propagator,
    back: Propagator,
    bucket: BucketAperture,
    samplers: [Option<ScreenSampler>; 3],
    reflectivity: RealGrid,
}

fn path_slot(path: Path3) -> usize {
    match path {
        Path3::Reference => 0,
        Path3::Signal => 1,
        Path3::Target => 2,
    }
}

impl Pipeline {
    pub fn new(scenario: &Scenario, options: PipelineOptions, target: &TargetShape, master_seed: u64) -> Result<Self> {
        let spec = Self::source_grid(scenario, &options)?;
        let target_spec = crate::optics::output_spec(&spec, scenario.wavelength, scenario.path_length, Plane::Target)?;
        let reflectivity = target.render(target_spec)?;
        Self::with_reflectivity(scenario, options, reflectivity, master_seed)
    }

    /// Source grid implied by the options.
    pub fn source_grid(scenario: &Scenario, options: &PipelineOptions) -> Result<GridSpec> {
        let pitch = options.source_pitch.unwrap_or(scenario.coherence_length / 4.0);
        GridSpec::new(options.grid_size, pitch, Plane::Source)
    }

    /// CCD/target grid implied by the options.
    pub fn target_grid(scenario: &Scenario, options: &PipelineOptions) -> Result<GridSpec> {
        let spec = Self::source_grid(scenario, options)?;
        crate::optics::output_spec(&spec, scenario.wavelength, scenario.path_length, Plane::Target)
    }

    pub fn with_reflectivity(
        scenario: &Scenario,
        options: PipelineOptions,
        reflectivity: RealGrid,
        master_seed: u64,
    ) -> Result<Self> {
        scenario.validate_parameters()?;
        let geometry = derive_geometry(scenario)?;
        let spec = Self::source_grid(scenario, &options)?;
        let source = match scenario.source_kind {
            SourceKind::Pseudothermal => Source::Pseudothermal(PseudothermalGenerator::new(spec, scenario)?),
            SourceKind::Computational => {
                spec.check_source_sampling(scenario.source_radius, scenario.coherence_length)?;
                let m = options
                    .slm_macropixel
                    .unwrap_or(std::f64::consts::PI.sqrt() * scenario.coherence_length);
                Source::Slm(SlmGenerator::new(spec, scenario, m)?)
            }
            SourceKind::Spdc => {
                return Err(Error::Unsupported(
                    "spdc light has no classical-field representation; its imager is covered by the analytic module only"
                        .into(),
                ))
            }
        };
        let (lambda, l) = (scenario.wavelength, scenario.path_length);
        let forward = Propagator::new(spec, lambda, l, Plane::Target)?;
        let target_spec = *forward.output();
        reflectivity.spec.ensure_congruent(&target_spec)?;
        let back = Propagator::new(target_spec, lambda, l, Plane::Detector)?;
        let bucket = BucketAperture::disc(*back.output(), scenario.bucket_area)?;
        let roi = options.roi.unwrap_or(options.grid_size);
        let (roi_spec, _) = target_spec.window(roi)?;
        let roi_indices = target_spec.window_indices(roi)?;
        if options.blocks == 0 {
            return Err(Error::Config("need at least one jackknife block".into()));
        }
        let width = options.logamp_width.unwrap_or((lambda * l).sqrt());
        let mut samplers: [Option<ScreenSampler>; 3] = [None, None, None];
        for path in [Path3::Reference, Path3::Signal, Path3::Target] {
            let turb = geometry.path(path);
            if turb.is_vacuum() {
                continue;
            }
            if path == Path3::Reference && scenario.source_kind == SourceKind::Computational {
                continue;
            }
            let plane_spec = if path == Path3::Target { target_spec } else { spec };
            samplers[path_slot(path)] = Some(ScreenSampler::new(plane_spec, path, turb, width)?);
        }
        Ok(Pipeline {
            scenario: scenario.clone(),
            geometry,
            options,
            master_seed,
            source_spec: spec,
            target_spec,
            roi_spec,
            roi_indices,
            source,
            forward,
            back,
            bucket,
            samplers,
            reflectivity,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn geometry(&self) -> &DerivedGeometry {
        &self.geometry
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.options
    }

    pub fn source_spec(&self) -> &GridSpec {
        &self.source_spec
    }

    pub fn target_spec(&self) -> &GridSpec {
        &self.target_spec
    }

    /// Grid of the correlated CCD window.
    pub fn roi_spec(&self) -> &GridSpec {
        &self.roi_spec
    }

    pub fn reflectivity(&self) -> &RealGrid {
        &self.reflectivity
    }

    /// Reflectivity over the CCD window.
    pub fn roi_reflectivity(&self) -> Result<RealGrid> {
        self.reflectivity.crop_center(self.roi_spec.n)
    }

    pub fn bucket(&self) -> &BucketAperture {
        &self.bucket
    }

    pub fn trial_state(&self, trial: u64) -> Result<TrialState> {
        let screen_trial = if self.options.condition_on_screens { 0 } else { trial };
        let screen = |path: Path3, spec: GridSpec| match &self.samplers[path_slot(path)] {
            Some(s) => s.sample(SeedRecord::new(self.master_seed, Purpose::Screen(path), screen_trial, 0)),
            None => TurbulenceScreen::identity(spec, path),
        };
        let target = match self.options.target_model {
            TargetModel::Speckle => sample_target(
                &self.reflectivity,
                self.scenario.wavelength,
                SeedRecord::new(self.master_seed, Purpose::Target, trial, 0),
            )?,
            TargetModel::Smooth => {
                let scale = self.scenario.wavelength / self.target_spec.pitch;
                SpeckleTarget {
                    reflectivity: self.reflectivity.clone(),
                    coefficients: self
                        .reflectivity
                        .data
                        .iter()
                        .map(|t| num_complex::Complex64::new(scale * t.sqrt(), 0.0))
                        .collect(),
                    wavelength: self.scenario.wavelength,
                    seed: None,
                }
            }
        };
        Ok(TrialState {
            trial,
            reference_screen: screen(Path3::Reference, self.source_spec),
            signal_screen: screen(Path3::Signal, self.source_spec),
            target_screen: screen(Path3::Target, self.target_spec),
            target,
        })
    }

    /// Target-plane reference intensity over the ROI and the bucket flux for one frame.
    pub fn frame_fields(&self, state: &TrialState, frame: u64) -> Result<(Vec<f64>, f64)> {
        let seed = SeedRecord::new(self.master_seed, Purpose::Source, state.trial, frame);
        let src = self.source.frame(seed);
        let computed = src.reference().is_none();
        let mut signal = src.signal;
        let separate_reference = if computed {
            !state.signal_screen.is_identity()
        } else {
            !(state.signal_screen.is_identity() && state.reference_screen.is_identity())
        };
        let reference = if separate_reference {
            let mut r = signal.clone();
            if !computed {
                apply_screen_in_place(&mut r, &state.reference_screen)?;
            }
            self.forward.propagate_in_place(&mut r)?;
            Some(r)
        } else {
            None
        };
        apply_screen_in_place(&mut signal, &state.signal_screen)?;
        self.forward.propagate_in_place(&mut signal)?;
        let intensity = |f: &ComplexGrid| -> Vec<f64> { self.roi_indices.iter().map(|&k| f.data[k].norm_sqr()).collect() };
        let ref_intensity = intensity(reference.as_ref().unwrap_or(&signal));
        reflect_in_place(&mut signal, &state.target)?;
        apply_screen_in_place(&mut signal, &state.target_screen)?;
        self.back.propagate_in_place(&mut signal)?;
        let flux = self.bucket.flux(&signal)?;
        Ok((ref_intensity, flux))
    }

    /// Detector outputs for one frame: reference values (counts, or computed mean counts) and
    /// bucket count.
    fn frame_counts(&self, state: &TrialState, frame: u64) -> Result<(Vec<f64>, f64, f64)> {
        let (intensity, flux) = self.frame_fields(state, frame)?;
        let s = &self.scenario;
        let t_f = s.coherence_time;
        let pixel_scale = s.quantum_efficiency * s.pixel_area * t_f;
        let bucket_mean = s.quantum_efficiency * flux * t_f;
        let computed = s.source_kind == SourceKind::Computational;
        let reference: Vec<f64> = if computed || !self.options.shot_noise {
            intensity.iter().map(|i| i * pixel_scale).collect()
        } else {
            let mut rng = SeedRecord::new(self.master_seed, Purpose::ShotReference, state.trial, frame).rng();
            intensity
                .iter()
                .map(|i| poisson(i * pixel_scale, &mut rng).map(|n| n as f64))
                .collect::<Result<_>>()?
        };
        let bucket = if self.options.shot_noise {
            let mut rng = SeedRecord::new(self.master_seed, Purpose::ShotBucket, state.trial, frame).rng();
            poisson(bucket_mean, &mut rng)? as f64
        } else {
            bucket_mean
        };
        Ok((reference, bucket, flux))
    }

    /// Run one trial, returning the correlation sums after each of `checkpoints` frames
    /// (strictly increasing).
    pub fn run_trial(&self, trial: u64, checkpoints: &[usize]) -> Result<TrialResult> {
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] < 2 {
            return Err(Error::Config("frame checkpoints must be increasing and ≥ 2".into()));
        }
        let state = self.trial_state(trial)?;
        let total = *checkpoints.last().expect("non-empty");
        let mut corr = Correlator::new(self.roi_spec, self.options.blocks)?;
        let mut snapshots = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        let mut flux_sum = 0.0;
        let mut start = 0;
        while start < total {
            let end = (start + FRAME_BATCH).min(total);
            let batch: Vec<(Vec<f64>, f64, f64)> = (start..end)
                .into_par_iter()
                .map(|k| self.frame_counts(&state, k as u64))
                .collect::<Result<_>>()?;
            for (k, (reference, bucket, flux)) in (start..end).zip(batch) {
                corr.add(&reference, bucket)?;
                flux_sum += flux;
                if k + 1 == checkpoints[next] {
                    snapshots.push(corr.clone().finish());
                    next += 1;
                }
            }
            start = end;
        }
        Ok(TrialResult {
            trial,
            snapshots,
            mean_bucket_flux: flux_sum / total as f64,
        })
    }

    /// Trials `first..first+count` in parallel; results are in trial order.
    pub fn run_trials(&self, first: u64, count: u64, checkpoints: &[usize]) -> Result<Vec<TrialResult>> {
        (first..first + count)
            .into_par_iter()
            .map(|t| self.run_trial(t, checkpoints))
            .collect()
    }
}
