//! PSF width, contrast and SNR estimators.

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::seed::SeedRecord;

use super::correlate::{BlockSums, CorrelationSums, GhostImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfFit {
    /// e⁻¹ radius (m)
    pub radius: f64,
    pub center: [f64; 2],
    pub amplitude: f64,
    pub offset: f64,
    /// rms of the fit residual over the window
    pub residual_rms: f64,
    pub iterations: usize,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Levenberg–Marquardt fit of A e^{−|ρ−c|²/w²} + B around the brightest pixel.
pub fn fit_gaussian_psf(values: &[f64], spec: &GridSpec) -> Result<PsfFit> {
    if values.len() != spec.len() {
        return Err(Error::GridMismatch("image and grid sizes differ".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("non-finite pixel values".into()));
    }
    let offset0 = median(values);
    let (peak, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty image");
    let amp0 = vmax - offset0;
    if !(amp0 > 0.0) {
        return Err(Error::Estimation("image has no peak above its median".into()));
    }
    let above = values.iter().filter(|&&v| v - offset0 > amp0 / std::f64::consts::E).count();
    let w0 = (above as f64 * spec.cell_area() / std::f64::consts::PI).sqrt().max(spec.pitch);
    let (px, py) = spec.xy(peak);
    let window = (6.0 * w0).max(4.0 * spec.pitch);
    let pts: Vec<(f64, f64, f64)> = (0..spec.len())
        .filter_map(|k| {
            let (x, y) = spec.xy(k);
            ((x - px).powi(2) + (y - py).powi(2) <= window * window).then_some((x, y, values[k]))
        })
        .collect();
    if pts.len() < 8 {
        return Err(Error::Estimation(format!("only {} pixels in the fit window", pts.len())));
    }

    type V5 = SVector<f64, 5>;
    type M5 = SMatrix<f64, 5, 5>;
    let cost_and_normal = |p: &V5| -> (f64, M5, V5) {
        let (a, cx, cy, w, b) = (p[0], p[1], p[2], p[3], p[4]);
        let mut jtj = M5::zeros();
        let mut jtr = V5::zeros();
        let mut cost = 0.0;
        for &(x, y, v) in &pts {
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            let g = (-d2 / (w * w)).exp();
            let r = a * g + b - v;
            let j = V5::new(
                g,
                a * g * 2.0 * (x - cx) / (w * w),
                a * g * 2.0 * (y - cy) / (w * w),
                a * g * 2.0 * d2 / (w * w * w),
                1.0,
            );
            jtj += j * j.transpose();
            jtr += j * r;
            cost += r * r;
        }
        (cost, jtj, jtr)
    };

    let mut p = V5::new(amp0, px, py, w0, offset0);
    let (mut cost, mut jtj, mut jtr) = cost_and_normal(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        iterations += 1;
        let mut m = jtj;
        for i in 0..5 {
            m[(i, i)] *= 1.0 + lambda;
        }
        let Some(step) = m.lu().solve(&(-jtr)) else {
            lambda *= 10.0;
            continue;
        };
        let trial = p + step;
        if !(trial[3] > 0.0) {
            lambda *= 10.0;
            continue;
        }
        let (c2, j2, r2) = cost_and_normal(&trial);
        if c2 <= cost {
            let rel = (cost - c2) / cost.max(f64::MIN_POSITIVE);
            p = trial;
            cost = c2;
            jtj = j2;
            jtr = r2;
            lambda = (lambda / 3.0).max(1e-12);
            let small_step = step[3].abs() <= 1e-10 * p[3] && step[1].abs().max(step[2].abs()) <= 1e-10 * p[3];
            if small_step || rel < 1e-14 {
                converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Estimation(format!(
            "PSF fit did not converge after {iterations} iterations (w = {:.3e})",
            p[3]
        )));
    }
    if !(p[0] > 0.0) {
        return Err(Error::Estimation(format!("PSF fit produced amplitude {:.3e}", p[0])));
    }
    Ok(PsfFit {
        radius: p[3].abs(),
        center: [p[1], p[2]],
        amplitude: p[0],
        offset: p[4],
        residual_rms: (cost / pts.len() as f64).sqrt(),
        iterations,
    })
}

pub fn measure_psf(image: &GhostImage) -> Result<PsfFit> {
    fit_gaussian_psf(&image.values, &image.spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastEstimate {
    pub value: f64,
    /// Jackknife over frame blocks; NaN with a single block.
    pub std_error: f64,
    pub max: f64,
    pub min: f64,
    pub background: f64,
}

/// (max − min)/Ĉ₀ of the dc image over `region`.
///
/// With `flat_field`, each pixel is divided by its mean reference count, so the envelope
/// of the reference illumination cancels: G = Ĉ_dc/n̄_p and Ĉ₀ → n̄_b.
fn contrast_from(t: &BlockSums, region: &[bool], flat_field: bool) -> Result<ContrastEstimate> {
    let n = t.frames as f64;
    if t.frames < 2 {
        return Err(Error::Estimation("contrast needs at least 2 frames".into()));
    }
    let mean_b = t.bucket / n;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut bg_sum = 0.0;
    let mut count = 0usize;
    for (k, _) in region.iter().enumerate().filter(|(_, &r)| r) {
        let mean_p = t.reference[k] / n;
        let dc = t.cross[k] / n;
        let v = if flat_field {
            if !(mean_p > 0.0) {
                return Err(Error::Estimation(format!("pixel {k} has no reference signal")));
            }
            dc / mean_p
        } else {
            dc
        };
        max = max.max(v);
        min = min.min(v);
        bg_sum += if flat_field { mean_b } else { mean_p * mean_b };
        count += 1;
    }
    if count == 0 {
        return Err(Error::Estimation("empty contrast region".into()));
    }
    let background = bg_sum / count as f64;
    if !(background > 0.0) {
        return Err(Error::Estimation(format!("background Ĉ₀ = {background} is not positive")));
    }
    Ok(ContrastEstimate {
        value: (max - min) / background,
        std_error: f64::NAN,
        max,
        min,
        background,
    })
}

pub fn measure_contrast(sums: &CorrelationSums, region: &[bool], flat_field: bool) -> Result<ContrastEstimate> {
    if region.len() != sums.spec.len() {
        return Err(Error::GridMismatch("region mask size differs from image".into()));
    }
    let mut est = contrast_from(&sums.totals(), region, flat_field)?;
    let b = sums.blocks.len();
    if b >= 2 {
        let loo: Vec<f64> = (0..b)
            .map(|i| contrast_from(&sums.leave_one_out(i), region, flat_field).map(|c| c.value))
            .collect::<Result<_>>()?;
        let m = loo.iter().sum::<f64>() / b as f64;
        let bf = b as f64;
        est.std_error = ((bf - 1.0) / bf * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt();
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub value: f64,
    pub mean: f64,
    pub variance: f64,
    pub trials: usize,
    pub pixels: usize,
    /// 95% percentile-bootstrap interval over trials.
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const MIN_TRIALS: usize = 30;

/// Σ_i (μ̂_i² − v̂_i/K) / Σ_i v̂_i over pixels i; the v̂/K term removes the bias of μ̂², which
/// matters when the per-trial SNR is small.
fn pooled(samples: &[Vec<f64>], idx: &[usize]) -> (f64, f64, f64) {
    let k = idx.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut mean_all = 0.0;
    for s in samples {
        let m = idx.iter().map(|&i| s[i]).sum::<f64>() / k;
        let v = idx.iter().map(|&i| (s[i] - m).powi(2)).sum::<f64>() / (k - 1.0);
        num += m * m - v / k;
        den += v;
        mean_all += m;
    }
    (num / den, mean_all / samples.len() as f64, den / samples.len() as f64)
}

/// SNR of pixel values pooled over statistically equivalent pixels; `samples[i][t]` is
/// pixel i in trial t.
pub fn estimate_snr_pooled(samples: &[Vec<f64>], bootstrap: usize, seed: SeedRecord) -> Result<SnrEstimate> {
    let trials = samples.first().map_or(0, |s| s.len());
    if samples.is_empty() || samples.iter().any(|s| s.len() != trials) {
        return Err(Error::Estimation("pixels must share one trial count".into()));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Estimation(format!("need ≥ {MIN_TRIALS} trials, got {trials}")));
    }
    let all: Vec<usize> = (0..trials).collect();
    let (value, mean, variance) = pooled(samples, &all);
    if !(variance > 0.0) {
        return Err(Error::Estimation("zero variance across trials".into()));
    }
    let mut rng = seed.rng();
    let mut boot: Vec<f64> = (0..bootstrap)
        .map(|_| {
            let idx: Vec<usize> = (0..trials).map(|_| rng.random_range(0..trials)).collect();
            pooled(samples, &idx).0
        })
        .filter(|v| v.is_finite())
        .collect();
    boot.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if boot.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let q = |p: f64| boot[((boot.len() - 1) as f64 * p).round() as usize];
        (q(0.025), q(0.975))
    };
    Ok(SnrEstimate {
        value,
        mean,
        variance,
        trials,
        pixels: samples.len(),
        ci_low,
        ci_high,
    })
}

pub fn estimate_snr(samples: &[f64], bootstrap: usize, seed: SeedRecord) -> Result<SnrEstimate> {
    estimate_snr_pooled(&[samples.to_vec()], bootstrap, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Plane;
    use crate::seed::Purpose;
    use crate::sensing::correlate::Correlator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn psf_fit_recovers_synthetic_gaussian() {
        let spec = GridSpec::new(64, 0.5, Plane::Detector).unwrap();
        let (r, cx, cy) = (2.3, 0.7, -1.1);
        let vals: Vec<f64> = (0..spec.len())
            .map(|k| {
                let (x, y) = spec.xy(k);
                5.0 * (-((x - cx).powi(2) + (y - cy).powi(2)) / (r * r)).exp() + 0.4
            })
            .collect();
        let fit = fit_gaussian_psf(&vals, &spec).unwrap();
        assert!((fit.radius / r - 1.0).abs() < 0.005);
        assert!((fit.center[0] - cx).abs() < 1e-6 && (fit.center[1] - cy).abs() < 1e-6);
        assert!((fit.offset - 0.4).abs() < 1e-6);
    }

    #[test]
    fn psf_fit_rejects_flat_image() {
        let spec = GridSpec::new(16, 1.0, Plane::Detector).unwrap();
        assert!(matches!(fit_gaussian_psf(&vec![1.0; 256], &spec), Err(Error::Estimation(_))));
    }

    #[test]
    fn snr_of_iid_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Normal::new(3.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..400).map(|_| d.sample(&mut rng)).collect();
        let est = estimate_snr(&xs, 500, SeedRecord::new(1, Purpose::Bootstrap, 0, 0)).unwrap();
        let truth = 9.0 / 2.25;
        assert!(est.ci_low <= truth && truth <= est.ci_high, "{est:?}");
        assert!(estimate_snr(&xs[..10], 10, SeedRecord::new(1, Purpose::Bootstrap, 0, 0)).is_err());
        assert!(estimate_snr(&[1.0; 40], 10, SeedRecord::new(1, Purpose::Bootstrap, 0, 0)).is_err());
    }

    #[test]
    fn flat_image_has_zero_contrast() {
        let spec = GridSpec::new(4, 1.0, Plane::Detector).unwrap();
        let mut c = Correlator::new(spec, 4).unwrap();
        for k in 0..40 {
            c.add(&[2.0; 16], (k % 5) as f64 + 1.0).unwrap();
        }
        let sums = c.finish();
        let est = measure_contrast(&sums, &[true; 16], true).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        let mut z = Correlator::new(spec, 1).unwrap();
        z.add(&[0.0; 16], 0.0).unwrap();
        z.add(&[0.0; 16], 0.0).unwrap();
        assert!(measure_contrast(&z.finish(), &[true; 16], false).is_err());
    }
}
