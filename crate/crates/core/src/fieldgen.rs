//! Source frames: Gaussian-Schell pseudothermal fields and SLM phase patterns.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fourier::Fft2;
use crate::grid::{ComplexGrid, GridSpec, Plane};
use crate::scenario::Scenario;
use crate::seed::SeedRecord;

/// Whether the reference arm sees the same field or a computed pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// 50-50 split of one classical field.
    Shared,
    /// Not emitted; the consumer computes the reference intensity.
    Computed,
}

#[derive(Debug, Clone)]
pub struct SourceFrame {
    pub signal: ComplexGrid,
    pub reference_kind: ReferenceKind,
    pub frame: u64,
    pub seed: SeedRecord,
}

impl SourceFrame {
    pub fn reference(&self) -> Option<&ComplexGrid> {
        match self.reference_kind {
            ReferenceKind::Shared => Some(&self.signal),
            ReferenceKind::Computed => None,
        }
    }
}

/// √(2P/πa₀²) e^{−|ρ|²/a₀²} sampled on `spec`.
pub fn gaussian_envelope(spec: &GridSpec, photon_flux: f64, source_radius: f64) -> Vec<f64> {
    let peak = (2.0 * photon_flux / (PI * source_radius * source_radius)).sqrt();
    let inv = 1.0 / (source_radius * source_radius);
    (0..spec.len())
        .map(|k| {
            let (x, y) = spec.xy(k);
            peak * (-(x * x + y * y) * inv).exp()
        })
        .collect()
}

fn check_source_spec(spec: &GridSpec) -> Result<()> {
    if spec.plane != Plane::Source {
        return Err(Error::Config(format!(
            "source frames need a source-plane grid, got {:?}",
            spec.plane
        )));
    }
    Ok(())
}

/// Envelope × unit circular Gaussian field with correlation e^{−|Δρ|²/2ρ₀²}.
#[derive(Debug, Clone)]
pub struct PseudothermalGenerator {
    spec: GridSpec,
    envelope: Vec<f64>,
    /// √(power spectrum) in centered frequency order, Σ filter² = 1.
    filter: Vec<f64>,
    fft: Fft2,
}

impl PseudothermalGenerator {
    pub fn new(spec: GridSpec, scenario: &Scenario) -> Result<Self> {
        spec.check_source_sampling(scenario.source_radius, scenario.coherence_length)?;
        Self::from_parts(spec, scenario.photon_flux, scenario.source_radius, scenario.coherence_length)
    }

    /// `coherence_length` may be infinite (coherent beam with a random global phase).
    pub fn from_parts(spec: GridSpec, photon_flux: f64, source_radius: f64, coherence_length: f64) -> Result<Self> {
        check_source_spec(&spec)?;
        if !(coherence_length > 0.0) {
            return Err(Error::domain("coherence_length", format!("must be > 0, got {coherence_length}")));
        }
        if !(photon_flux >= 0.0 && source_radius > 0.0) {
            return Err(Error::domain("source", "need P ≥ 0 and a₀ > 0"));
        }
        let n = spec.n;
        let df = 1.0 / spec.extent();
        let mut filter: Vec<f64> = if coherence_length.is_infinite() {
            let mut f = vec![0.0; spec.len()];
            f[(n / 2) * n + n / 2] = 1.0;
            f
        } else {
            let c = PI * PI * coherence_length * coherence_length;
            (0..spec.len())
                .map(|k| {
                    let fx = ((k % n) as f64 - (n / 2) as f64) * df;
                    let fy = ((k / n) as f64 - (n / 2) as f64) * df;
                    (-c * (fx * fx + fy * fy)).exp()
                })
                .collect()
        };
        let norm = filter.iter().map(|v| v * v).sum::<f64>().sqrt();
        filter.iter_mut().for_each(|v| *v /= norm);
        Ok(PseudothermalGenerator {
            spec,
            envelope: gaussian_envelope(&spec, photon_flux, source_radius),
            filter,
            fft: Fft2::new(n),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Unit-variance correlated field s(ρ).
    pub fn unit_field(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut data: Vec<Complex64> = self
            .filter
            .iter()
            .map(|&h| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (scale * h)
            })
            .collect();
        self.fft.centered(&mut data, true);
        data
    }

    pub fn frame(&self, seed: SeedRecord) -> SourceFrame {
        let mut rng = seed.rng();
        let mut data = self.unit_field(&mut rng);
        for (z, a) in data.iter_mut().zip(&self.envelope) {
            *z *= *a;
        }
        SourceFrame {
            signal: ComplexGrid { spec: self.spec, data },
            reference_kind: ReferenceKind::Shared,
            frame: seed.frame,
            seed,
        }
    }
}

/// Envelope × e^{iθ_j}, θ_j i.i.d. uniform per square macropixel.
#[derive(Debug, Clone)]
pub struct SlmGenerator {
    spec: GridSpec,
    envelope: Vec<f64>,
    /// Macropixel side in grid pixels.
    block: usize,
}

impl SlmGenerator {
    pub fn new(spec: GridSpec, scenario: &Scenario, macropixel: f64) -> Result<Self> {
        check_source_spec(&spec)?;
        if !(macropixel >= spec.pitch) {
            return Err(Error::Config(format!(
                "SLM macropixel {macropixel:.4e} m is smaller than the grid pitch {:.4e} m",
                spec.pitch
            )));
        }
        Ok(SlmGenerator {
            spec,
            envelope: gaussian_envelope(&spec, scenario.photon_flux, scenario.source_radius),
            block: (macropixel / spec.pitch).round().max(1.0) as usize,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn phases(&self, seed: SeedRecord) -> Vec<f64> {
        let per_side = self.spec.n.div_ceil(self.block);
        let mut rng = seed.rng();
        (0..per_side * per_side)
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect()
    }

    pub fn frame(&self, seed: SeedRecord) -> SourceFrame {
        let n = self.spec.n;
        let per_side = n.div_ceil(self.block);
        let theta = self.phases(seed);
        let data = (0..self.spec.len())
            .map(|k| {
                let b = (k / n / self.block) * per_side + (k % n) / self.block;
                Complex64::from_polar(self.envelope[k], theta[b])
            })
            .collect();
        SourceFrame {
            signal: ComplexGrid { spec: self.spec, data },
            reference_kind: ReferenceKind::Computed,
            frame: seed.frame,
            seed,
        }
    }
}
