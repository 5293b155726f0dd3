//! Ensemble checks of the source, screen and optics models, plus estimator exactness.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::atmosphere::{apply_screen, ScreenSampler};
use crate::error::{Error, Result};
use crate::fieldgen::{gaussian_envelope, PseudothermalGenerator, SlmGenerator};
use crate::grid::{ComplexGrid, GridSpec, Plane};
use crate::optics::{sample_target, BucketAperture, Propagator, TargetShape};
use crate::scenario::Path3;
use crate::seed::{Purpose, SeedRecord};

use super::config::{mc_scenario, ExperimentConfig, ValidationSizes};
use super::pipeline::{Pipeline, PipelineOptions};
use super::report::{CheckResult, RunReport};

/// Allowed deviation in standard errors.
pub const Z_LIMIT: f64 = 5.0;

const LAMBDA: f64 = 1.5e-6;
const RANGE: f64 = 1000.0;

/// Running mean and standard error (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSe {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanSe {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut m = MeanSe::default();
        xs.into_iter().for_each(|x| m.push(x));
        m
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn se(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }

    /// |mean − expected| in standard errors.
    pub fn z(&self, expected: f64) -> f64 {
        let se = self.se();
        if se == 0.0 {
            return if self.mean == expected { 0.0 } else { f64::INFINITY };
        }
        (self.mean - expected).abs() / se
    }

    pub fn check(&self, name: &str, expected: f64) -> CheckResult {
        CheckResult::within(name, self.mean, expected, Z_LIMIT * self.se())
    }
}

/// One-sample Kolmogorov–Smirnov distance of `samples` from Exp(mean).
pub fn ks_exponential(samples: &[f64], mean: f64) -> f64 {
    let mut x: Vec<f64> = samples.iter().map(|v| v / mean).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-v).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn worst_z(name: &str, zs: &[f64]) -> CheckResult {
    CheckResult::at_most(name, zs.iter().cloned().fold(0.0, f64::max), Z_LIMIT)
}

/// Probe pairs (pixel offsets from the centre) for the autocovariance test.
fn probe_pairs() -> Vec<((i64, i64), (i64, i64))> {
    (0..20i64)
        .map(|i| {
            let p1 = ((i % 4) * 3 - 4, (i / 4) * 2 - 4);
            (p1, (p1.0 + i / 2, p1.1 + i % 3))
        })
        .collect()
}

fn at(spec: &GridSpec, p: (i64, i64)) -> usize {
    let c = (spec.n / 2) as i64;
    ((c + p.1) * spec.n as i64 + c + p.0) as usize
}

/// Pseudothermal autocovariance, phase-sensitive correlation, frame power and SLM speckle.
pub fn source_suite(sizes: &ValidationSizes, seed: u64) -> Result<Vec<CheckResult>> {
    let n = sizes.source_grid;
    let dx = 1e-3;
    let spec = GridSpec::new(n, dx, Plane::Source)?;
    // largest envelope the grid captures, ρ₀ at the coarsest allowed sampling
    let a0 = n as f64 * dx / 6.0;
    let rho0 = 3.0 * dx;
    let flux = 1.0;
    spec.check_source_sampling(a0, rho0)?;
    let generator = PseudothermalGenerator::from_parts(spec, flux, a0, rho0)?;
    let pairs = probe_pairs();
    let idx: Vec<(usize, usize)> = pairs.iter().map(|&(p, q)| (at(&spec, p), at(&spec, q))).collect();

    // per frame: conj(E1)E2 and E1E2 at each pair, then the frame power
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>, f64)> = (0..sizes.source_frames as u64)
        .into_par_iter()
        .map(|f| {
            let frame = generator.frame(SeedRecord::new(seed, Purpose::Source, 0, f));
            let e = &frame.signal.data;
            let cov = idx.iter().map(|&(a, b)| e[a].conj() * e[b]).collect();
            let pse = idx.iter().map(|&(a, b)| e[a] * e[b]).collect();
            (cov, pse, frame.signal.power())
        })
        .collect();

    let peak = 2.0 * flux / (PI * a0 * a0);
    let mut cov_z = Vec::new();
    let mut pse_z = Vec::new();
    let mut checks = Vec::new();
    for (j, &(a, b)) in idx.iter().enumerate() {
        let (x1, y1) = spec.xy(a);
        let (x2, y2) = spec.xy(b);
        let model = peak
            * (-(x1 * x1 + y1 * y1 + x2 * x2 + y2 * y2) / (a0 * a0)).exp()
            * (-((x1 - x2).powi(2) + (y1 - y2).powi(2)) / (2.0 * rho0 * rho0)).exp();
        let re = MeanSe::of(rows.iter().map(|r| r.0[j].re));
        let im = MeanSe::of(rows.iter().map(|r| r.0[j].im));
        let z = re.z(model).max(im.z(0.0));
        cov_z.push(z);
        checks.push(CheckResult::at_most(format!("source.autocov.pair{j:02}"), z, Z_LIMIT));
        let pre = MeanSe::of(rows.iter().map(|r| r.1[j].re));
        let pim = MeanSe::of(rows.iter().map(|r| r.1[j].im));
        pse_z.push(pre.z(0.0).max(pim.z(0.0)));
    }
    checks.push(worst_z("source.autocov.max_z", &cov_z));
    checks.push(worst_z("source.phase_sensitive.max_z", &pse_z));

    let capture = gaussian_envelope(&spec, flux, a0).iter().map(|v| v * v).sum::<f64>() * spec.cell_area() / flux;
    checks.push(CheckResult::at_least("source.power.capture", capture, 0.999));
    checks.push(MeanSe::of(rows.iter().map(|r| r.2)).check("source.power.mean", flux * capture));

    let f0 = generator.frame(SeedRecord::new(seed, Purpose::Source, 0, 0));
    let f1 = generator.frame(SeedRecord::new(seed, Purpose::Source, 0, 0));
    checks.push(CheckResult::flag("source.deterministic", f0.signal == f1.signal));

    checks.extend(slm_speckle(spec, a0, sizes.source_frames, seed)?);
    Ok(checks)
}

/// Far-field intensity of SLM frames at one point against the exponential law.
fn slm_speckle(spec: GridSpec, a0: f64, frames: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut scenario = mc_scenario(4.0, 1.0, 1e-12);
    scenario.source_radius = a0;
    scenario.wavelength = LAMBDA;
    scenario.path_length = RANGE;
    let macropixel = 2.0 * spec.pitch;
    let slm = SlmGenerator::new(spec, &scenario, macropixel)?;
    let prop = Propagator::new(spec, LAMBDA, RANGE, Plane::Target)?;
    let probe = prop.output().index_of(0.0, 0.0).expect("origin on grid");

    // exact mean: Σ_j |c_j|² over the macropixel contributions
    let envelope = gaussian_envelope(&spec, 1.0, a0);
    let n = spec.n;
    let b = slm.block();
    let per_side = n.div_ceil(b);
    let mean: f64 = (0..per_side * per_side)
        .into_par_iter()
        .map(|m| {
            let mut g = ComplexGrid::zeros(spec);
            for (k, (z, &e)) in g.data.iter_mut().zip(&envelope).enumerate() {
                if (k / n / b) * per_side + (k % n) / b == m {
                    *z = Complex64::new(e, 0.0);
                }
            }
            prop.propagate(&g).map(|o| o.data[probe].norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let samples: Vec<f64> = (0..frames as u64)
        .into_par_iter()
        .map(|f| {
            let frame = slm.frame(SeedRecord::new(seed, Purpose::Source, 1, f));
            prop.propagate(&frame.signal).map(|o| o.data[probe].norm_sqr())
        })
        .collect::<Result<_>>()?;
    let d = ks_exponential(&samples, mean);
    let same = slm.phases(SeedRecord::new(seed, Purpose::Source, 1, 0)) == slm.phases(SeedRecord::new(seed, Purpose::Source, 1, 0));
    Ok(vec![
        CheckResult::at_most("source.slm.ks_exponential", d, ks_critical_1pct(frames)),
        CheckResult::flag("source.slm.deterministic", same),
    ])
}

/// Screen mutual coherence, log-amplitude moments, power conservation and path independence.
pub fn turbulence_suite(sizes: &ValidationSizes, seed: u64) -> Result<Vec<CheckResult>> {
    let rho = 0.01;
    let sigma2 = 0.05;
    let width = (LAMBDA * RANGE).sqrt();
    let steps = 10;
    // 2ρ_m spans `steps` pixels
    let spec = GridSpec::new(sizes.screen_grid, 2.0 * rho / steps as f64, Plane::Source)?;
    let sampler = ScreenSampler::from_parts(spec, Path3::Signal, rho, sigma2, width)?;
    let other = ScreenSampler::from_parts(spec, Path3::Reference, rho, sigma2, width)?;
    let centre = at(&spec, (0, 0));
    let probes: Vec<usize> = (1..=steps as i64).map(|k| at(&spec, (k, 0))).collect();
    let field = ComplexGrid::from_fn(spec, |x, y| Complex64::new((-(x * x + y * y) / (16.0 * rho * rho)).exp(), 0.0));
    let p_in = field.power();

    struct Row {
        mcf: Vec<Complex64>,
        chi: f64,
        power: f64,
        other_chi: f64,
    }
    let rows: Vec<Row> = (0..sizes.screens as u64)
        .into_par_iter()
        .map(|f| {
            let s = sampler.sample(SeedRecord::new(seed, Purpose::Screen(Path3::Signal), f, 0));
            let e = s.factor.as_ref().expect("turbulent screen");
            let o = other.sample(SeedRecord::new(seed, Purpose::Screen(Path3::Reference), f, 0));
            let power = apply_screen(&field, &s).map(|g| g.power() / p_in)?;
            Ok(Row {
                mcf: probes.iter().map(|&p| e[centre].conj() * e[p]).collect(),
                chi: e[centre].norm().ln(),
                power,
                other_chi: o.factor.as_ref().expect("turbulent screen")[centre].norm().ln(),
            })
        })
        .collect::<Result<_>>()?;

    let mut checks = Vec::new();
    let mut zs = Vec::new();
    for k in 0..steps {
        let d = (k + 1) as f64 * spec.pitch;
        let target = (-d * d / (2.0 * rho * rho)).exp();
        let re = MeanSe::of(rows.iter().map(|r| r.mcf[k].re));
        let im = MeanSe::of(rows.iter().map(|r| r.mcf[k].im));
        let z = re.z(target).max(im.z(0.0));
        zs.push(z);
        checks.push(re.check(&format!("turbulence.mcf.sep{:02}", k + 1), target));
    }
    checks.push(worst_z("turbulence.mcf.max_z", &zs));
    let e4 = MeanSe::of(rows.iter().map(|r| (4.0 * r.chi).exp()));
    checks.push(e4.check("turbulence.exp4chi", (4.0 * sigma2).exp()));
    checks.push(MeanSe::of(rows.iter().map(|r| (2.0 * r.chi).exp())).check("turbulence.unit_power", 1.0));
    checks.push(MeanSe::of(rows.iter().map(|r| r.chi)).check("turbulence.chi_mean", -sigma2));
    checks.push(MeanSe::of(rows.iter().map(|r| r.power)).check("turbulence.applied_power", 1.0));
    let cross = MeanSe::of(rows.iter().map(|r| (r.chi + sigma2) * (r.other_chi + sigma2)));
    checks.push(cross.check("turbulence.path_independence", 0.0));
    let residual = sampler.fit().map_or(0.0, |f| f.residual);
    checks.push(CheckResult::at_most("turbulence.phase_fit_residual", residual, 0.01));
    Ok(checks)
}

/// Propagation unitarity, inversion, far-field statistics and the speckle target model.
pub fn optics_suite(sizes: &ValidationSizes, seed: u64) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let n = sizes.source_grid;
    let dx = 1e-3;
    let spec = GridSpec::new(n, dx, Plane::Source)?;
    let a0 = n as f64 * dx / 6.0;
    let rho0 = 3.0 * dx;

    let mut prop = Propagator::new(spec, LAMBDA, RANGE, Plane::Target)?;
    if let Some(f) = sizes.corrupt_kernel {
        prop = prop.with_corrupted_scale(f);
    }
    let generator = PseudothermalGenerator::from_parts(spec, 1.0, a0, rho0)?;
    let probe = generator.frame(SeedRecord::new(seed, Purpose::Source, 2, 0)).signal;
    let out = prop.propagate(&probe)?;
    checks.push(CheckResult::at_most("optics.parseval", (out.power() / probe.power() - 1.0).abs(), 1e-10));
    let back = Propagator::new(*prop.output(), LAMBDA, -RANGE, Plane::Source)?.propagate(&out)?;
    let scale = probe.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = probe.data.iter().zip(&back.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    checks.push(CheckResult::at_most("optics.roundtrip", err, 1e-8));

    // far-field mean intensity radius and coherence radius over 10³ frames
    let frames = 1000u64;
    let tspec = *prop.output();
    let c = at(&tspec, (0, 0));
    let lags: Vec<usize> = (1..=3).map(|k| at(&tspec, (k, 0))).collect();
    let clean = Propagator::new(spec, LAMBDA, RANGE, Plane::Target)?;
    let acc = (0..frames)
        .into_par_iter()
        .map(|f| {
            let e = clean.propagate(&generator.frame(SeedRecord::new(seed, Purpose::Source, 3, f)).signal)?;
            let i: Vec<f64> = e.data.iter().map(|z| z.norm_sqr()).collect();
            let mcf: Vec<Complex64> = lags.iter().map(|&l| e.data[c].conj() * e.data[l]).collect();
            Ok((i, mcf))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean_i = vec![0.0; tspec.len()];
    let mut mcf = vec![Complex64::new(0.0, 0.0); lags.len()];
    for (i, m) in &acc {
        mean_i.iter_mut().zip(i).for_each(|(a, b)| *a += b);
        mcf.iter_mut().zip(m).for_each(|(a, b)| *a += b);
    }
    let total: f64 = mean_i.iter().sum();
    let m2 = mean_i
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (x, y) = tspec.xy(k);
            (x * x + y * y) * v
        })
        .sum::<f64>()
        / total;
    let k0 = 2.0 * PI / LAMBDA;
    let a_l = 2.0 * RANGE / (k0 * rho0);
    let rho_l = 2.0 * RANGE / (k0 * a0);
    checks.push(CheckResult::relative("optics.far_field_radius", (2.0 * m2).sqrt(), a_l, 0.1));
    // least squares of −2 ln|μ| = Δ²/ρ²
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (j, &l) in lags.iter().enumerate() {
        let mu = mcf[j].norm() / (mean_i[c] * mean_i[l]).sqrt();
        let d2 = ((j + 1) as f64 * tspec.pitch).powi(2);
        sxy += d2 * (-2.0 * mu.ln());
        sxx += d2 * d2;
    }
    checks.push(CheckResult::relative("optics.far_field_coherence", (sxx / sxy).sqrt(), rho_l, 0.1));

    checks.extend(speckle_checks(sizes, seed)?);
    Ok(checks)
}

fn speckle_checks(sizes: &ValidationSizes, seed: u64) -> Result<Vec<CheckResult>> {
    let n = sizes.source_grid;
    let tspec = GridSpec::new(n, 0.02, Plane::Target)?;
    let radius = 0.25 * n as f64 * tspec.pitch;
    let disc = TargetShape::Disc { radius, center: [0.0, 0.0] }.render(tspec)?;
    let a_t = disc.integral();
    let inside: Vec<usize> = (0..tspec.len()).filter(|&k| disc.data[k] > 0.0).collect();

    let one = sample_target(&disc, LAMBDA, SeedRecord::new(seed, Purpose::Target, 0, 0))?;
    let unit = tspec.cell_area() / (LAMBDA * LAMBDA);
    let moment = MeanSe::of(inside.iter().map(|&k| one.coefficients[k].norm_sqr() * unit));
    let mut checks = vec![moment.check("optics.speckle_moment", 1.0)];

    // unit illumination: ⟨I⟩ = A_T/L² everywhere in the far field
    let back = Propagator::new(tspec, LAMBDA, RANGE, Plane::Detector)?;
    let probe = back.output().index_of(0.0, 0.0).expect("origin on grid");
    let draws = sizes.speckle_draws;
    let samples: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let t = sample_target(&disc, LAMBDA, SeedRecord::new(seed, Purpose::Target, 1, d))?;
            let field = ComplexGrid {
                spec: tspec,
                data: t.coefficients,
            };
            back.propagate(&field).map(|o| o.data[probe].norm_sqr())
        })
        .collect::<Result<_>>()?;
    checks.push(CheckResult::at_most(
        "optics.speckle_ks_exponential",
        ks_exponential(&samples, a_t / (RANGE * RANGE)),
        ks_critical_1pct(draws),
    ));

    // ⟨P_b⟩ ∝ A_b/L² at fixed A_b
    let ranges = [1000.0, 1500.0, 2000.0, 3000.0];
    let bucket_area = PI * 0.03 * 0.03;
    let per_range = (draws / ranges.len()).max(50) as u64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, &l) in ranges.iter().enumerate() {
        let p = Propagator::new(tspec, LAMBDA, l, Plane::Source)?;
        let ap = BucketAperture::disc(*p.output(), bucket_area)?;
        let mean = (0..per_range)
            .into_par_iter()
            .map(|d| {
                let t = sample_target(&disc, LAMBDA, SeedRecord::new(seed, Purpose::Target, 2 + r as u64, d))?;
                let field = ComplexGrid {
                    spec: tspec,
                    data: t.coefficients,
                };
                ap.flux(&p.propagate(&field)?)
            })
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum::<f64>()
            / per_range as f64;
        xs.push(l.ln());
        ys.push(mean.ln());
    }
    let slope = regression_slope(&xs, &ys);
    checks.push(CheckResult::within("optics.bucket_range_slope", slope, -2.0, 0.1));
    Ok(checks)
}

/// Ordinary least-squares slope.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Integer estimator identity, Parseval on the pipeline grids and thread-count determinism.
pub fn exactness_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let s = mc_scenario(4.0, 1e20, 1.5e-12);
    let mut options = PipelineOptions::new(128);
    options.roi = Some(16);
    options.source_pitch = Some(s.coherence_length / 3.0);
    let target = TargetShape::Disc {
        radius: 0.3,
        center: [0.0, 0.0],
    };
    let pipeline = Pipeline::new(&s, options, &target, seed)?;
    let frames = 64;
    let run = |threads: usize| -> Result<_> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| pipeline.run_trials(0, 2, &[frames]))
    };
    let one = run(1)?;
    let three = run(3)?;
    let again = run(1)?;
    let sums = one[0].sums();
    let mut checks = Vec::new();
    checks.push(CheckResult::flag("exact.integer_sums", sums.exact));
    let identity = (0..sums.spec.len()).all(|p| {
        sums.exact_numerators(p)
            .is_some_and(|(dc, ac, bg)| dc - ac == bg)
    });
    checks.push(CheckResult::flag("exact.dc_minus_ac_identity", identity));
    let same = |a: &[super::TrialResult], b: &[super::TrialResult]| {
        a.iter().zip(b).all(|(x, y)| x.snapshots == y.snapshots && x.mean_bucket_flux.to_bits() == y.mean_bucket_flux.to_bits())
    };
    checks.push(CheckResult::flag("exact.rerun_bitwise", same(&one, &again)));
    checks.push(CheckResult::flag("exact.thread_count_invariant", same(&one, &three)));

    let generator = PseudothermalGenerator::new(*pipeline.source_spec(), pipeline.scenario())?;
    let field = generator.frame(SeedRecord::new(seed, Purpose::Source, 0, 0)).signal;
    let fwd = Propagator::with_output(field.spec, s.wavelength, s.path_length, *pipeline.target_spec())?;
    let out = fwd.propagate(&field)?;
    checks.push(CheckResult::at_most(
        "exact.pipeline_parseval",
        (out.power() / field.power() - 1.0).abs(),
        1e-10,
    ));
    Ok(checks)
}

pub fn run_validation(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport::new("validate-stats", serde_json::to_value(config)?);
    let seed = config.seed;
    let sizes = &config.validation;
    type Suite = fn(&ValidationSizes, u64) -> Result<Vec<CheckResult>>;
    let suites: [(&str, Suite); 4] = [
        ("source", source_suite),
        ("turbulence", turbulence_suite),
        ("optics", optics_suite),
        ("exactness", |_, seed| exactness_suite(seed)),
    ];
    for (name, suite) in suites {
        let t = Instant::now();
        for c in suite(sizes, seed)? {
            report.push(c);
        }
        report.timings.insert(name.into(), t.elapsed().as_secs_f64());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_and_ks() {
        let m = MeanSe::of([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean(), 2.5);
        assert!((m.se() - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        let q: Vec<f64> = (0..1000).map(|i| -(1.0 - (i as f64 + 0.5) / 1000.0).ln()).collect();
        assert!(ks_exponential(&q, 1.0) < 1e-3);
        assert!(ks_exponential(&q, 2.0) > 0.1);
        assert!((regression_slope(&[0.0, 1.0, 2.0], &[1.0, -1.0, -3.0]) + 2.0).abs() < 1e-12);
    }
}
