//! Thin turbulence screens e^{χ+iφ} with Gaussian-covariance phase and log-amplitude.
//!
//! Fields are synthesized exactly on the (non-periodic) grid: a separable Gaussian
//! covariance factors as C ⊗ C, so a field is σ·L Z Lᵀ with C = LLᵀ from one 1-D
//! eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, GridSpec};
use crate::scenario::{Path3, PathTurbulence};
use crate::seed::SeedRecord;

/// Phase variance and covariance width chosen so that the total mutual coherence
/// e^{−D_χ−D_φ} tracks e^{−Δ²/2ρ_m²}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    /// σ_φ² (rad²)
    pub variance: f64,
    /// e⁻¹ radius of the phase covariance (m)
    pub width: f64,
    /// max |MCF_model − e^{−Δ²/2ρ_m²}| over Δ ∈ [0, 2ρ_m]
    pub residual: f64,
}

/// Exponent of the screen mutual coherence, D_χ(Δ) + D_φ(Δ).
pub fn coherence_exponent(delta: f64, logamp_variance: f64, logamp_width: f64, fit: &PhaseFit) -> f64 {
    let d2 = delta * delta;
    logamp_variance * (1.0 - (-d2 / (logamp_width * logamp_width)).exp())
        + fit.variance * (1.0 - (-d2 / (fit.width * fit.width)).exp())
}

/// Exact at Δ = ρ_m; width scanned over [ρ_m, 16ρ_m] for the smallest max error on [0, 2ρ_m].
pub fn fit_phase(coherence_length: f64, logamp_variance: f64, logamp_width: f64) -> Result<PhaseFit> {
    let rho = coherence_length;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain("coherence_length", format!("must be finite and > 0, got {rho}")));
    }
    if !(logamp_variance >= 0.0) {
        return Err(Error::domain("logamp_variance", format!("must be ≥ 0, got {logamp_variance}")));
    }
    let chi_at_rho = logamp_variance * (1.0 - (-(rho * rho) / (logamp_width * logamp_width)).exp());
    let remaining = 0.5 - chi_at_rho;
    if remaining < 0.0 {
        return Err(Error::Config(format!(
            "log-amplitude decorrelation {chi_at_rho:.3} alone exceeds the ρ_m target of 1/2"
        )));
    }
    let probes: Vec<f64> = (0..=200).map(|i| 2.0 * rho * i as f64 / 200.0).collect();
    let mut best: Option<PhaseFit> = None;
    for i in 0..=400 {
        let width = rho * 16f64.powf(i as f64 / 400.0);
        let variance = remaining / (1.0 - (-(rho * rho) / (width * width)).exp());
        let mut fit = PhaseFit {
            variance,
            width,
            residual: 0.0,
        };
        fit.residual = probes
            .iter()
            .map(|&d| {
                let model = (-coherence_exponent(d, logamp_variance, logamp_width, &fit)).exp();
                (model - (-(d * d) / (2.0 * rho * rho)).exp()).abs()
            })
            .fold(0.0, f64::max);
        if best.is_none_or(|b| fit.residual < b.residual) {
            best = Some(fit);
        }
    }
    Ok(best.expect("scan is non-empty"))
}

/// 1-D factor L with LLᵀ = [e^{−(x_i−x_j)²/w²}], negative eigenvalues clipped.
fn gaussian_factor(spec: &GridSpec, width: f64) -> DMatrix<f64> {
    let n = spec.n;
    let c = DMatrix::from_fn(n, n, |i, j| {
        let d = (i as f64 - j as f64) * spec.pitch;
        (-(d * d) / (width * width)).exp()
    });
    let eig = SymmetricEigen::new(c);
    let mut v = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceScreen {
    pub spec: GridSpec,
    pub path: Path3,
    /// ρ_m; infinite for vacuum
    pub coherence_length: f64,
    pub logamp_variance: f64,
    pub seed: Option<SeedRecord>,
    /// e^{ψ}; `None` is the identity screen.
    pub factor: Option<Vec<Complex64>>,
}

impl TurbulenceScreen {
    pub fn identity(spec: GridSpec, path: Path3) -> Self {
        TurbulenceScreen {
            spec,
            path,
            coherence_length: f64::INFINITY,
            logamp_variance: 0.0,
            seed: None,
            factor: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.factor.is_none()
    }

    /// Uniform e^{c}; mostly for tests.
    pub fn uniform(spec: GridSpec, path: Path3, c: Complex64) -> Self {
        TurbulenceScreen {
            factor: Some(vec![c.exp(); spec.len()]),
            ..TurbulenceScreen::identity(spec, path)
        }
    }
}

/// Cached synthesis operators for one path on one grid.
#[derive(Debug, Clone)]
pub struct ScreenSampler {
    spec: GridSpec,
    path: Path3,
    coherence_length: f64,
    logamp_variance: f64,
    logamp_width: f64,
    fit: Option<PhaseFit>,
    phase_factor: Option<DMatrix<f64>>,
    chi_factor: Option<DMatrix<f64>>,
}

impl ScreenSampler {
    /// `logamp_width` is the e⁻¹ radius of K_χ, √(λ₀L) by default.
    pub fn new(spec: GridSpec, path: Path3, turbulence: &PathTurbulence, logamp_width: f64) -> Result<Self> {
        Self::from_parts(spec, path, turbulence.coherence_length(), turbulence.logamp_variance(), logamp_width)
    }

    pub fn from_parts(
        spec: GridSpec,
        path: Path3,
        coherence_length: f64,
        logamp_variance: f64,
        logamp_width: f64,
    ) -> Result<Self> {
        if logamp_variance.is_nan() || logamp_variance < 0.0 {
            return Err(Error::domain("logamp_variance", format!("must be ≥ 0, got {logamp_variance}")));
        }
        if !(coherence_length > 0.0) {
            return Err(Error::domain("coherence_length", format!("must be > 0, got {coherence_length}")));
        }
        if !(logamp_width > 0.0) {
            return Err(Error::domain("logamp_width", format!("must be > 0, got {logamp_width}")));
        }
        let vacuum = coherence_length.is_infinite();
        let fit = if vacuum {
            None
        } else {
            Some(fit_phase(coherence_length, logamp_variance, logamp_width)?)
        };
        let phase_factor = fit.map(|f| gaussian_factor(&spec, f.width));
        let chi_factor = (logamp_variance > 0.0).then(|| gaussian_factor(&spec, logamp_width));
        Ok(ScreenSampler {
            spec,
            path,
            coherence_length,
            logamp_variance,
            logamp_width,
            fit,
            phase_factor,
            chi_factor,
        })
    }

    pub fn fit(&self) -> Option<&PhaseFit> {
        self.fit.as_ref()
    }

    pub fn logamp_width(&self) -> f64 {
        self.logamp_width
    }

    pub fn is_vacuum(&self) -> bool {
        self.phase_factor.is_none() && self.chi_factor.is_none()
    }

    fn correlated(factor: &DMatrix<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
        let n = factor.nrows();
        let z = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        factor * z * factor.transpose()
    }

    pub fn sample(&self, seed: SeedRecord) -> TurbulenceScreen {
        if self.is_vacuum() {
            return TurbulenceScreen::identity(self.spec, self.path);
        }
        let mut rng = seed.rng();
        let n = self.spec.n;
        let phase = self.phase_factor.as_ref().map(|l| Self::correlated(l, &mut rng));
        let chi = self.chi_factor.as_ref().map(|l| Self::correlated(l, &mut rng));
        let sigma_phi = self.fit.map_or(0.0, |f| f.variance.sqrt());
        let sigma_chi = self.logamp_variance.sqrt();
        let factor = (0..self.spec.len())
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let phi = phase.as_ref().map_or(0.0, |p| sigma_phi * p[(i, j)]);
                let x = chi.as_ref().map_or(0.0, |c| sigma_chi * c[(i, j)]) - self.logamp_variance;
                Complex64::new(x, phi).exp()
            })
            .collect();
        TurbulenceScreen {
            spec: self.spec,
            path: self.path,
            coherence_length: self.coherence_length,
            logamp_variance: self.logamp_variance,
            seed: Some(seed),
            factor: Some(factor),
        }
    }
}

/// Pointwise product; the identity screen returns the input unchanged.
pub fn apply_screen(field: &ComplexGrid, screen: &TurbulenceScreen) -> Result<ComplexGrid> {
    field.spec.ensure_congruent(&screen.spec)?;
    match &screen.factor {
        None => Ok(field.clone()),
        Some(f) => Ok(ComplexGrid {
            spec: field.spec,
            data: field.data.iter().zip(f).map(|(a, b)| a * b).collect(),
        }),
    }
}

pub fn apply_screen_in_place(field: &mut ComplexGrid, screen: &TurbulenceScreen) -> Result<()> {
    field.spec.ensure_congruent(&screen.spec)?;
    if let Some(f) = &screen.factor {
        field.data.iter_mut().zip(f).for_each(|(a, b)| *a *= b);
    }
    Ok(())
}
