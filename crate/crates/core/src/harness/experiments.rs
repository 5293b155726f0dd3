//! Monte Carlo experiments: image simulation, PSF width, contrast and SNR growth.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::analytic::{predicted_contrast, predicted_resolution, snr, snr_asymptotes, speckle_averaging_gamma, TargetSummary};
use crate::error::{Result, Warning};
use crate::grid::{GridSpec, RealGrid};
use crate::io::{write_pgm, write_raw_f64};
use crate::optics::TargetShape;
use crate::scenario::{derive_geometry, Scenario};
use crate::seed::{Purpose, SeedRecord};
use crate::sensing::{estimate_snr_pooled, fit_gaussian_psf, measure_contrast, Coupling, CorrelationSums, PsfFit, SnrEstimate};
use crate::sensing::estimate::MIN_TRIALS;

use super::config::{ExperimentConfig, RunSize};
use super::pipeline::{Pipeline, TrialResult};
use super::report::{CheckResult, ColumnDoc, RunReport};
use super::validate::regression_slope;

pub const PSF_TOLERANCE: f64 = 0.10;
pub const PSF_RATIO_TOLERANCE: f64 = 0.15;
pub const CONTRAST_TOLERANCE: f64 = 0.20;
pub const SATURATION_TOLERANCE: f64 = 0.25;
pub const SLOPE_TOLERANCE: f64 = 0.15;
/// Allowed |MC − analytic| in the two-point valley/peak ratio.
pub const VALLEY_TOLERANCE: f64 = 0.15;

pub const SNR_FILE: &str = "snr_curve.csv";

fn scaled_source_warning(s: &Scenario) -> Warning {
    Warning::new(
        "scaled_coherence_length",
        format!(
            "simulated ρ₀ = {:.3e} m is scaled up from the λ-scale ground-glass value; a₀/ρ₀ = {:.2} is what the run preserves",
            s.coherence_length,
            s.source_radius / s.coherence_length
        ),
    )
}

fn start(experiment: &str, config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport::new(experiment, serde_json::to_value(config)?);
    report.geometry = Some(derive_geometry(&config.scenario)?);
    report.warnings.push(scaled_source_warning(&config.scenario));
    Ok(report)
}

fn timed<T>(report: &mut RunReport, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f()?;
    report.timings.insert(stage.into(), t.elapsed().as_secs_f64());
    Ok(out)
}

fn run(pipeline: &Pipeline, size: RunSize, checkpoints: &[usize]) -> Result<Vec<TrialResult>> {
    let frames = [size.frames];
    let cps = if checkpoints.is_empty() { &frames[..] } else { checkpoints };
    pipeline.run_trials(0, size.trials as u64, cps)
}

/// Trial sums at one checkpoint stacked so each trial keeps its own blocks.
pub fn pooled(results: &[TrialResult], snapshot: usize) -> Result<CorrelationSums> {
    let parts: Vec<CorrelationSums> = results.iter().map(|r| r.snapshots[snapshot].clone()).collect();
    CorrelationSums::concat(&parts)
}

/// Trial average of the flat-fielded ac images.
pub fn mean_normalized_ac(results: &[TrialResult], snapshot: usize) -> Result<Vec<f64>> {
    let mut avg: Vec<f64> = Vec::new();
    for r in results {
        let img = r.snapshots[snapshot].image(Coupling::Ac)?.normalized();
        if avg.is_empty() {
            avg = img;
        } else {
            avg.iter_mut().zip(&img).for_each(|(a, b)| *a += b);
        }
    }
    let k = results.len() as f64;
    avg.iter_mut().for_each(|a| *a /= k);
    Ok(avg)
}

/// Pixels within `distance` of the target support.
pub fn dilated_region(reflectivity: &RealGrid, distance: f64) -> Vec<bool> {
    let spec = reflectivity.spec;
    let support: Vec<(f64, f64)> = (0..spec.len())
        .filter(|&k| reflectivity.data[k] > 0.0)
        .map(|k| spec.xy(k))
        .collect();
    (0..spec.len())
        .map(|k| {
            let (x, y) = spec.xy(k);
            support.iter().any(|&(u, v)| (x - u).powi(2) + (y - v).powi(2) <= distance * distance)
        })
        .collect()
}

/// Per-pixel ac values across trials (pixel × trial).
fn ac_samples(results: &[TrialResult], snapshot: usize, pixels: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(results.len()); pixels.len()];
    for r in results {
        let img = r.snapshots[snapshot].image(Coupling::Ac)?;
        for (row, &p) in out.iter_mut().zip(pixels) {
            row.push(img.values[p]);
        }
    }
    Ok(out)
}

fn fit(values: &[f64], spec: &GridSpec) -> Result<PsfFit> {
    fit_gaussian_psf(values, spec)
}

#[derive(Serialize)]
struct ImageMeta<'a> {
    experiment: &'a str,
    quantity: &'a str,
    trials: usize,
    frames: usize,
    seed: u64,
}

fn write_image(dir: &Path, name: &str, grid: &RealGrid, config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let pgm = dir.join(format!("{name}.pgm"));
    write_pgm(&pgm, grid)?;
    let raw = dir.join(format!("{name}.f64"));
    let meta = ImageMeta {
        experiment: config.experiment.name(),
        quantity: name,
        trials: config.run.trials,
        frames: config.run.frames,
        seed: config.seed,
    };
    write_raw_f64(&raw, grid, &meta)?;
    report.artifacts.extend([pgm, raw]);
    Ok(())
}

/// Sum of e^{−|ρ−ρ_j|²/w²}𝒯_j over the support: the analytic image up to scale.
fn blurred(reflectivity: &RealGrid, w: f64) -> Vec<f64> {
    let spec = reflectivity.spec;
    let support: Vec<(f64, f64, f64)> = (0..spec.len())
        .filter(|&k| reflectivity.data[k] > 0.0)
        .map(|k| {
            let (x, y) = spec.xy(k);
            (x, y, reflectivity.data[k])
        })
        .collect();
    (0..spec.len())
        .map(|k| {
            let (x, y) = spec.xy(k);
            support.iter().map(|&(u, v, t)| t * (-((x - u).powi(2) + (y - v).powi(2)) / (w * w)).exp()).sum()
        })
        .collect()
}

/// Midpoint over maximum along the centre row.
pub fn valley_ratio(values: &[f64], spec: &GridSpec) -> f64 {
    let n = spec.n;
    let row = &values[(n / 2) * n..(n / 2 + 1) * n];
    let peak = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row[n / 2] / peak
}

pub fn run_simulation(config: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start("simulate-image", config)?;
    let s = &config.scenario;
    let pipeline = Pipeline::new(s, config.pipeline.clone(), &config.target, config.seed)?;
    let geom = pipeline.geometry().clone();
    let results = timed(&mut report, "monte_carlo", || run(&pipeline, config.run, &[]))?;
    let sums = pooled(&results, 0)?;
    let dc = sums.image(Coupling::Dc)?;
    let ac = sums.image(Coupling::Ac)?;
    let spec = *pipeline.roi_spec();
    let normalized = mean_normalized_ac(&results, 0)?;
    report.push(CheckResult::flag(
        "simulate.finite_images",
        dc.values.iter().chain(&ac.values).chain(&normalized).all(|v| v.is_finite()),
    ));
    report.record("mean_bucket_counts", dc.mean_bucket);
    report.record(
        "nonpassive_fraction_trial0",
        pipeline.trial_state(0)?.target.nonpassive_fraction(),
    );

    // background against η²A_pA_b/L²(2P/πa_L²)² × illumination-weighted A_T, in counts
    let full = pipeline.reflectivity();
    let a_weighted: f64 = (0..full.spec.len())
        .map(|k| {
            let (x, y) = full.spec.xy(k);
            full.data[k] * (-2.0 * (x * x + y * y) / geom.a_l.powi(2)).exp()
        })
        .sum::<f64>()
        * full.spec.cell_area();
    let prefactor = s.quantum_efficiency.powi(2) * s.pixel_area * s.bucket_area / s.path_length.powi(2)
        * (2.0 * s.photon_flux / (std::f64::consts::PI * geom.a_l.powi(2))).powi(2);
    // same with the realized |T_j|²Δx²/λ² in place of 𝒯, averaged over the trials' targets
    let unit = full.spec.cell_area() / s.wavelength.powi(2);
    let mut a_realized = 0.0;
    for t in 0..results.len() as u64 {
        let target = pipeline.trial_state(t)?.target;
        a_realized += (0..full.spec.len())
            .map(|k| {
                let (x, y) = full.spec.xy(k);
                target.coefficients[k].norm_sqr() * unit * (-2.0 * (x * x + y * y) / geom.a_l.powi(2)).exp()
            })
            .sum::<f64>()
            * full.spec.cell_area();
    }
    a_realized /= results.len() as f64;
    let centre = spec.index_of(0.0, 0.0).expect("origin on grid");
    let counts = prefactor * s.coherence_time.powi(2);
    report.record("analytic.background_counts_centre", counts * a_weighted);
    report.record("analytic.background_counts_centre_realized_target", counts * a_realized);
    report.record("mc.background_counts_centre", dc.background[centre]);
    report.record("mc_over_analytic.background", dc.background[centre] / (counts * a_weighted));
    report.record("mc_over_analytic.background_realized_target", dc.background[centre] / (counts * a_realized));

    let roi_refl = pipeline.roi_reflectivity()?;
    let w = predicted_resolution(&geom, s.source_kind);
    report.record("analytic.psf_radius", w);
    match &config.target {
        TargetShape::Point => {
            let f = fit(&normalized, &spec)?;
            report.record("mc.psf_radius", f.radius);
            report.record("mc_over_analytic.psf_radius", f.radius / w);
        }
        TargetShape::TwoPoint { .. } => {
            let predicted = valley_ratio(&blurred(&roi_refl, w), &spec);
            let measured = valley_ratio(&normalized, &spec);
            report.record("analytic.valley_ratio", predicted);
            report.record("mc.valley_ratio", measured);
            report.push(
                CheckResult::within("simulate.two_point_valley", measured, predicted, VALLEY_TOLERANCE)
                    .with_note("midpoint/peak of the flat-fielded ac image along the separation axis"),
            );
        }
        _ => {
            let a_t = full.integral();
            let expected = predicted_contrast(&geom, &TargetSummary::uniform(a_t)?, s.source_kind, s)?;
            report.warnings.extend(expected.warnings.clone());
            let region = dilated_region(&roi_refl, config.region_dilation * geom.rho_l * geom.alpha_for(s.source_kind).sqrt());
            match measure_contrast(&sums, &region, true) {
                Ok(c) => {
                    report.record("analytic.contrast", expected.value);
                    report.record("mc.contrast", c.value);
                    report.record("mc_over_analytic.contrast", c.value / expected.value);
                }
                Err(e) => report.warnings.push(Warning::new("contrast_unavailable", e.to_string())),
            }
        }
    }

    if results.len() >= MIN_TRIALS {
        let pixels: Vec<usize> = (0..spec.len()).filter(|&k| roi_refl.data[k] > 0.0).collect();
        if !pixels.is_empty() {
            let e = estimate_snr_pooled(
                &ac_samples(&results, 0, &pixels)?,
                config.bootstrap,
                SeedRecord::new(config.seed, Purpose::Bootstrap, 0, 0),
            )?;
            report.record("mc.snr", e.value);
        }
    }

    if let Some(dir) = &config.out_dir {
        write_image(dir, "dc", &dc.to_grid(), config, &mut report)?;
        write_image(dir, "ac", &ac.to_grid(), config, &mut report)?;
        let g = RealGrid {
            spec,
            data: normalized,
        };
        write_image(dir, "ac_normalized", &g, config, &mut report)?;
    }
    Ok(report)
}

/// Vacuum PSF radius and the turbulent/vacuum radius ratio.
pub fn run_psf(config: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start("psf", config)?;
    let s = &config.scenario;
    let vacuum = s.with_turbulence(0.0, 0.0, 0.0);
    let size = config.reference_run.unwrap_or(RunSize { trials: 1, frames: 2000 });
    let p0 = Pipeline::new(&vacuum, config.pipeline.clone(), &config.target, config.seed.wrapping_add(1))?;
    let r0 = timed(&mut report, "vacuum", || run(&p0, size, &[]))?;
    let spec = *p0.roi_spec();
    let f0 = fit(&mean_normalized_ac(&r0, 0)?, &spec)?;
    let raw0 = fit(&pooled(&r0, 0)?.image(Coupling::Ac)?.values, &spec)?;

    let p1 = Pipeline::new(s, config.pipeline.clone(), &config.target, config.seed)?;
    let r1 = timed(&mut report, "turbulent", || run(&p1, config.run, &[]))?;
    let f1 = fit(&mean_normalized_ac(&r1, 0)?, &spec)?;

    let geom = p1.geometry();
    let rho_l = geom.rho_l;
    let alpha = geom.alpha_for(s.source_kind);
    report.record("rho_l", rho_l);
    report.record("alpha", alpha);
    report.record("mc.vacuum_radius", f0.radius);
    report.record("mc.vacuum_radius_unflattened", raw0.radius);
    report.record("mc.turbulent_radius", f1.radius);
    report.record("mc.vacuum_fit_residual", f0.residual_rms);
    report.record("mc.turbulent_fit_residual", f1.residual_rms);
    report.record("analytic.turbulent_radius", predicted_resolution(geom, s.source_kind));
    let gsm = (1.0 + (vacuum.coherence_length / vacuum.source_radius).powi(2)).sqrt();
    report.record("analytic.vacuum_radius_finite_source", rho_l * gsm);
    report.push(CheckResult::relative("psf.vacuum_radius", f0.radius / rho_l, 1.0, PSF_TOLERANCE));
    report.push(
        CheckResult::relative("psf.turbulence_ratio", f1.radius / f0.radius, alpha.sqrt(), PSF_RATIO_TOLERANCE)
            .with_note("single transmit-plane screens per path"),
    );
    Ok(report)
}

/// dc-coupled contrast of an extended target against πρ_L²/A_T.
pub fn run_contrast(config: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start("contrast", config)?;
    let s = &config.scenario;
    let pipeline = Pipeline::new(s, config.pipeline.clone(), &config.target, config.seed)?;
    let geom = pipeline.geometry().clone();
    let results = timed(&mut report, "monte_carlo", || run(&pipeline, config.run, &[]))?;
    let sums = pooled(&results, 0)?;
    let a_t = pipeline.reflectivity().integral();
    let expected = predicted_contrast(&geom, &TargetSummary::uniform(a_t)?, s.source_kind, s)?;
    report.warnings.extend(expected.warnings.clone());
    let distance = config.region_dilation * geom.rho_l * geom.alpha_for(s.source_kind).sqrt();
    let region = dilated_region(&pipeline.roi_reflectivity()?, distance);
    let flat = measure_contrast(&sums, &region, true)?;
    let raw = measure_contrast(&sums, &region, false)?;
    report.record("target_area", a_t);
    report.record("analytic.contrast", expected.value);
    report.record("mc.contrast", flat.value);
    report.record("mc.contrast_std_error", flat.std_error);
    report.record("mc.contrast_unflattened", raw.value);
    report.record("region_pixels", region.iter().filter(|r| **r).count() as f64);
    report.push(
        CheckResult::relative("contrast.dc", flat.value, expected.value, CONTRAST_TOLERANCE)
            .with_note("flat-fielded dc image, (max − min)/background over the dilated target region"),
    );
    Ok(report)
}

fn snr_curve(
    pipeline: &Pipeline,
    results: &[TrialResult],
    checkpoints: &[usize],
    config: &ExperimentConfig,
    stream: u64,
) -> Result<Vec<(usize, SnrEstimate)>> {
    let refl = pipeline.roi_reflectivity()?;
    let pixels: Vec<usize> = (0..refl.spec.len()).filter(|&k| refl.data[k] > 0.0).collect();
    checkpoints
        .iter()
        .enumerate()
        .map(|(i, &nf)| {
            let e = estimate_snr_pooled(
                &ac_samples(results, i, &pixels)?,
                config.bootstrap,
                SeedRecord::new(config.seed, Purpose::Bootstrap, stream, i as u64),
            )?;
            Ok((nf, e))
        })
        .collect()
}

/// SNR against frame count: saturation at high flux and the pre-saturation growth at low flux.
pub fn run_snr_curve(config: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start("snr-curve", config)?;
    let s = &config.scenario;
    let checkpoints = if config.checkpoints.is_empty() {
        vec![config.run.frames]
    } else {
        config.checkpoints.clone()
    };
    let pipeline = Pipeline::new(s, config.pipeline.clone(), &config.target, config.seed)?;
    let geom = pipeline.geometry().clone();
    let gamma = speckle_averaging_gamma(geom.beta)?.value;
    let centre = pipeline.target_spec().index_of(0.0, 0.0).expect("origin on grid");
    let target = TargetSummary::from_grid(pipeline.reflectivity(), centre)?;
    let sat = snr_asymptotes(&geom, &target, s, gamma)?.saturation;
    let results = timed(&mut report, "saturation", || run(&pipeline, config.run, &checkpoints))?;
    let curve = snr_curve(&pipeline, &results, &checkpoints, config, 0)?;
    let mut rows = Vec::new();
    for (nf, e) in &curve {
        let analytic = snr(&geom, &target, &s.with_integration_time(*nf as f64 * s.coherence_time), gamma)?.total;
        rows.push(("saturation", *nf, *e, analytic));
    }
    let last = &curve.last().expect("at least one checkpoint").1;
    report.record("analytic.saturation", sat);
    report.record("mc.snr_final", last.value);
    report.record("mc.snr_final_ci_low", last.ci_low);
    report.record("mc.snr_final_ci_high", last.ci_high);
    report.push(CheckResult::relative("snr.saturation", last.value, sat, SATURATION_TOLERANCE));

    if let Some(slope_run) = &config.slope {
        let mut dim = s.clone();
        dim.photon_flux *= slope_run.flux_scale;
        let mut options = config.pipeline.clone();
        options.roi = Some(slope_run.roi);
        let p = Pipeline::new(&dim, options, &config.target, config.seed.wrapping_add(1))?;
        let r = timed(&mut report, "low_light", || run(&p, slope_run.run, &slope_run.checkpoints))?;
        let c = snr_curve(&p, &r, &slope_run.checkpoints, config, 1)?;
        let g = p.geometry().clone();
        for (nf, e) in &c {
            let analytic = snr(&g, &target, &dim.with_integration_time(*nf as f64 * dim.coherence_time), gamma)?.total;
            rows.push(("low_light", *nf, *e, analytic));
        }
        let xs: Vec<f64> = c.iter().map(|(nf, _)| (*nf as f64).ln()).collect();
        let ys: Vec<f64> = c.iter().map(|(_, e)| e.value.max(f64::MIN_POSITIVE).ln()).collect();
        let slope = regression_slope(&xs, &ys);
        report.record("mc.low_light_slope", slope);
        report.push(CheckResult::within("snr.low_light_slope", slope, 1.0, SLOPE_TOLERANCE));
    }

    report.csv_schema = vec![
        ColumnDoc::new(SNR_FILE, "regime", "", "saturation (configured flux) or low_light (scaled flux)"),
        ColumnDoc::new(SNR_FILE, "frames", "1", "frames per trial N_f = T_I/T₀"),
        ColumnDoc::new(SNR_FILE, "snr", "1", "trial-ensemble ac SNR pooled over target pixels"),
        ColumnDoc::new(SNR_FILE, "ci_low", "1", "2.5% bootstrap bound"),
        ColumnDoc::new(SNR_FILE, "ci_high", "1", "97.5% bootstrap bound"),
        ColumnDoc::new(SNR_FILE, "trials", "1", "independent trials K"),
        ColumnDoc::new(SNR_FILE, "analytic_snr", "1", "closed-form SNR at T_I = N_f T₀"),
    ];
    if let Some(dir) = &config.out_dir {
        let path = dir.join(SNR_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(report.csv_schema.iter().map(|c| c.column.as_str()))?;
        for (regime, nf, e, analytic) in &rows {
            w.write_record([
                regime.to_string(),
                nf.to_string(),
                e.value.to_string(),
                e.ci_low.to_string(),
                e.ci_high.to_string(),
                e.trials.to_string(),
                analytic.to_string(),
            ])?;
        }
        w.flush().map_err(|e| crate::error::Error::io(&path, e))?;
        report.artifacts.push(path);
    }
    Ok(report)
}
