//! Fresnel propagation, speckle targets and bucket collection.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Fft2;
use crate::grid::{ComplexGrid, GridSpec, Plane, RealGrid};
use crate::seed::SeedRecord;

/// Output grid of a single-transform Fresnel step: Δx_out = λ|L|/(NΔx_in).
pub fn output_spec(input: &GridSpec, wavelength: f64, distance: f64, plane: Plane) -> Result<GridSpec> {
    if !(wavelength > 0.0) || distance == 0.0 || !distance.is_finite() {
        return Err(Error::domain("propagation", "need λ > 0 and finite nonzero L"));
    }
    GridSpec::new(input.n, wavelength * distance.abs() / (input.n as f64 * input.pitch), plane)
}

/// E_out(x') = (1/iλL) e^{ik|x'|²/2L} Σ E(x) e^{ik|x|²/2L} e^{−ikx·x'/L} Δx².
///
/// Negative L propagates backwards and inverts a forward step exactly.
#[derive(Debug, Clone)]
pub struct Propagator {
    input: GridSpec,
    output: GridSpec,
    in_chirp: Vec<Complex64>,
    out_chirp: Vec<Complex64>,
    scale: Complex64,
    inverse: bool,
    fft: Fft2,
}

impl Propagator {
    pub fn new(input: GridSpec, wavelength: f64, distance: f64, out_plane: Plane) -> Result<Self> {
        let output = output_spec(&input, wavelength, distance, out_plane)?;
        Self::with_output(input, wavelength, distance, output)
    }

    pub fn with_output(input: GridSpec, wavelength: f64, distance: f64, output: GridSpec) -> Result<Self> {
        let expect = output_spec(&input, wavelength, distance, output.plane)?;
        if output.n != input.n || (output.pitch / expect.pitch - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "output grid (N={}, Δx={:.6e}) violates Δx_out = λ|L|/(NΔx_in) = {:.6e}",
                output.n, output.pitch, expect.pitch
            )));
        }
        let k = 2.0 * PI / wavelength;
        let chirp = |spec: &GridSpec| -> Vec<Complex64> {
            (0..spec.n)
                .map(|i| {
                    let x = spec.coord(i);
                    Complex64::from_polar(1.0, k * x * x / (2.0 * distance))
                })
                .collect()
        };
        let scale = Complex64::new(0.0, -1.0) / (wavelength * distance) * input.cell_area();
        Ok(Propagator {
            input,
            output,
            in_chirp: chirp(&input),
            out_chirp: chirp(&output),
            scale,
            inverse: distance < 0.0,
            fft: Fft2::new(input.n),
        })
    }

    pub fn input(&self) -> &GridSpec {
        &self.input
    }

    pub fn output(&self) -> &GridSpec {
        &self.output
    }

    /// Negative control for validation: multiplies the kernel by `factor`.
    pub fn with_corrupted_scale(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn propagate(&self, field: &ComplexGrid) -> Result<ComplexGrid> {
        let mut out = field.clone();
        self.propagate_in_place(&mut out)?;
        Ok(out)
    }

    pub fn propagate_in_place(&self, field: &mut ComplexGrid) -> Result<()> {
        field.spec.ensure_congruent(&self.input)?;
        let n = self.input.n;
        for (k, z) in field.data.iter_mut().enumerate() {
            *z *= self.in_chirp[k / n] * self.in_chirp[k % n];
        }
        self.fft.centered(&mut field.data, self.inverse);
        for (k, z) in field.data.iter_mut().enumerate() {
            *z *= self.out_chirp[k / n] * self.out_chirp[k % n] * self.scale;
        }
        field.spec = self.output;
        Ok(())
    }
}

/// One-shot propagation onto `out`, which must satisfy the sampling relation.
pub fn fraunhofer_propagate(field: &ComplexGrid, wavelength: f64, distance: f64, out: &GridSpec) -> Result<ComplexGrid> {
    Propagator::with_output(field.spec, wavelength, distance, *out)?.propagate(field)
}

/// Rough-surface reflection coefficients T_j ~ CN(0, λ²𝒯_j/Δx²).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleTarget {
    pub reflectivity: RealGrid,
    pub coefficients: Vec<Complex64>,
    pub wavelength: f64,
    pub seed: Option<SeedRecord>,
}

fn check_reflectivity(map: &RealGrid) -> Result<()> {
    if map.data.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::domain("reflectivity", "𝒯 must lie in [0, 1]"));
    }
    Ok(())
}

pub fn sample_target(reflectivity: &RealGrid, wavelength: f64, seed: SeedRecord) -> Result<SpeckleTarget> {
    check_reflectivity(reflectivity)?;
    if !(wavelength > 0.0) {
        return Err(Error::domain("wavelength", "must be > 0"));
    }
    let mut rng = seed.rng();
    let base = wavelength / reflectivity.spec.pitch * std::f64::consts::FRAC_1_SQRT_2;
    let coefficients = reflectivity
        .data
        .iter()
        .map(|&t| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (base * t.sqrt())
        })
        .collect();
    Ok(SpeckleTarget {
        reflectivity: reflectivity.clone(),
        coefficients,
        wavelength,
        seed: Some(seed),
    })
}

impl SpeckleTarget {
    /// Deterministic T ≡ 1 mirror (test mode).
    pub fn mirror(spec: GridSpec, wavelength: f64) -> Self {
        SpeckleTarget {
            reflectivity: RealGrid::from_fn(spec, |_, _| 1.0),
            coefficients: vec![Complex64::new(1.0, 0.0); spec.len()],
            wavelength,
            seed: None,
        }
    }

    /// Fraction of pixels with |T| > 1 (the Gaussian model is not passive).
    pub fn nonpassive_fraction(&self) -> f64 {
        self.coefficients.iter().filter(|t| t.norm_sqr() > 1.0).count() as f64 / self.coefficients.len() as f64
    }
}

pub fn reflect(field: &ComplexGrid, target: &SpeckleTarget) -> Result<ComplexGrid> {
    let mut out = field.clone();
    reflect_in_place(&mut out, target)?;
    Ok(out)
}

pub fn reflect_in_place(field: &mut ComplexGrid, target: &SpeckleTarget) -> Result<()> {
    field.spec.ensure_congruent(&target.reflectivity.spec)?;
    field.data.iter_mut().zip(&target.coefficients).for_each(|(a, t)| *a *= t);
    Ok(())
}

/// Pixel-centred disc mask of nominal area A_b.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketAperture {
    pub spec: GridSpec,
    pub area: f64,
    pub indices: Vec<usize>,
}

impl BucketAperture {
    pub fn disc(spec: GridSpec, area: f64) -> Result<Self> {
        if !(area > 0.0) {
            return Err(Error::domain("bucket_area", "must be > 0"));
        }
        let radius = (area / PI).sqrt();
        if radius > 0.5 * spec.extent() - spec.pitch {
            return Err(Error::Config(format!(
                "bucket radius {radius:.4e} m does not fit a grid of extent {:.4e} m",
                spec.extent()
            )));
        }
        let indices = (0..spec.len())
            .filter(|&k| {
                let (x, y) = spec.xy(k);
                x * x + y * y <= radius * radius
            })
            .collect();
        Ok(BucketAperture { spec, area, indices })
    }

    /// Mask area as sampled.
    pub fn mask_area(&self) -> f64 {
        self.indices.len() as f64 * self.spec.cell_area()
    }

    /// ∫_{A_b}|E|² dρ (photons/s).
    pub fn flux(&self, field: &ComplexGrid) -> Result<f64> {
        field.spec.ensure_congruent(&self.spec)?;
        Ok(self.indices.iter().map(|&k| field.data[k].norm_sqr()).sum::<f64>() * self.spec.cell_area())
    }
}

pub fn bucket_flux(field: &ComplexGrid, aperture: &BucketAperture) -> Result<f64> {
    aperture.flux(field)
}

/// Built-in and file-based reflectivity maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TargetShape {
    /// One pixel with 𝒯 = 1 at the origin.
    Point,
    Disc { radius: f64, #[serde(default)] center: [f64; 2] },
    /// Two discs on the x axis at ±separation/2; radius 0 means single pixels.
    TwoPoint { separation: f64, #[serde(default)] spot_radius: f64 },
    /// `count` vertical bars of width period/2 and height `length`.
    Bars { period: f64, count: usize, length: f64 },
    /// 8- or 16-bit P5 file, centred on the grid, one file pixel per grid pixel.
    Pgm { path: PathBuf },
}

impl TargetShape {
    pub fn render(&self, spec: GridSpec) -> Result<RealGrid> {
        let disc = |cx: f64, cy: f64, r: f64| {
            move |x: f64, y: f64| (x - cx).powi(2) + (y - cy).powi(2) <= r * r
        };
        match self {
            TargetShape::Point => {
                let mut g = RealGrid::zeros(spec);
                g.data[spec.index_of(0.0, 0.0).expect("origin on grid")] = 1.0;
                Ok(g)
            }
            TargetShape::Disc { radius, center } => {
                if !(*radius > 0.0) {
                    return Err(Error::domain("radius", "must be > 0"));
                }
                let inside = disc(center[0], center[1], *radius);
                Ok(RealGrid::from_fn(spec, |x, y| if inside(x, y) { 1.0 } else { 0.0 }))
            }
            TargetShape::TwoPoint { separation, spot_radius } => {
                let h = 0.5 * separation;
                if *spot_radius <= 0.0 {
                    let mut g = RealGrid::zeros(spec);
                    for cx in [-h, h] {
                        let k = spec
                            .index_of(cx, 0.0)
                            .ok_or_else(|| Error::Config("two-point target off grid".into()))?;
                        g.data[k] = 1.0;
                    }
                    return Ok(g);
                }
                let a = disc(-h, 0.0, *spot_radius);
                let b = disc(h, 0.0, *spot_radius);
                Ok(RealGrid::from_fn(spec, |x, y| if a(x, y) || b(x, y) { 1.0 } else { 0.0 }))
            }
            TargetShape::Bars { period, count, length } => {
                if !(*period > 0.0 && *length > 0.0) || *count == 0 {
                    return Err(Error::domain("bars", "need period, length > 0 and count ≥ 1"));
                }
                let total = *period * *count as f64;
                Ok(RealGrid::from_fn(spec, |x, y| {
                    let u = x + 0.5 * total;
                    if y.abs() <= 0.5 * length && (0.0..total).contains(&u) && (u % period) < 0.5 * period {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
            TargetShape::Pgm { path } => {
                let img = crate::io::read_pgm(path)?;
                if img.width > spec.n || img.height > spec.n {
                    return Err(Error::Config(format!(
                        "PGM {}×{} exceeds the {}² target grid",
                        img.width, img.height, spec.n
                    )));
                }
                let mut g = RealGrid::zeros(spec);
                let (oi, oj) = ((spec.n - img.height) / 2, (spec.n - img.width) / 2);
                for i in 0..img.height {
                    for j in 0..img.width {
                        g.data[(oi + i) * spec.n + oj + j] = img.pixels[i * img.width + j] as f64 / img.maxval as f64;
                    }
                }
                Ok(g)
            }
        }
    }
}
