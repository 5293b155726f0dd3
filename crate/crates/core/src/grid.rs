//! Square sampling grids shared by the field generators, propagator and detectors.
//!
//! Sample (i, j) sits at x = (j − N/2)Δx, y = (i − N/2)Δx; data is row-major.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Source,
    Target,
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Δx (m)
    pub pitch: f64,
    pub plane: Plane,
}

impl GridSpec {
    pub fn new(n: usize, pitch: f64, plane: Plane) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid side must be a power of two ≥ 2, got {n}")));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::domain("pitch", format!("must be positive, got {pitch}")));
        }
        Ok(GridSpec { n, pitch, plane })
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Physical side length NΔx.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn cell_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn coord(&self, index: usize) -> f64 {
        (index as f64 - (self.n / 2) as f64) * self.pitch
    }

    /// (x, y) of flat index k.
    pub fn xy(&self, k: usize) -> (f64, f64) {
        (self.coord(k % self.n), self.coord(k / self.n))
    }

    /// Flat index of the sample nearest to (x, y), if inside the grid.
    pub fn index_of(&self, x: f64, y: f64) -> Option<usize> {
        let half = (self.n / 2) as f64;
        let j = (x / self.pitch + half).round();
        let i = (y / self.pitch + half).round();
        if j < 0.0 || i < 0.0 || j >= self.n as f64 || i >= self.n as f64 {
            return None;
        }
        Some(i as usize * self.n + j as usize)
    }

    /// Source-plane sampling rules: NΔx ≥ 6a₀ captures the envelope, Δx ≤ ρ₀/3 resolves coherence.
    pub fn check_source_sampling(&self, source_radius: f64, coherence_length: f64) -> Result<()> {
        if self.extent() < 6.0 * source_radius {
            return Err(Error::Config(format!(
                "source grid extent {:.4e} m is below 6a₀ = {:.4e} m",
                self.extent(),
                6.0 * source_radius
            )));
        }
        if self.pitch > coherence_length / 3.0 {
            return Err(Error::Sampling {
                pitch: self.pitch,
                limit: coherence_length / 3.0,
            });
        }
        Ok(())
    }

    pub fn congruent(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.pitch == other.pitch && self.plane == other.plane
    }

    /// Centred m×m window with the same pitch and coordinates; returns the window and the
    /// offset of its first row/column in this grid.
    pub fn window(&self, m: usize) -> Result<(GridSpec, usize)> {
        if m > self.n {
            return Err(Error::Config(format!("window {m} exceeds grid side {}", self.n)));
        }
        Ok((GridSpec::new(m, self.pitch, self.plane)?, (self.n - m) / 2))
    }

    /// Flat indices in this grid of every sample of the centred m×m window.
    pub fn window_indices(&self, m: usize) -> Result<Vec<usize>> {
        let (_, off) = self.window(m)?;
        Ok((0..m * m).map(|k| (k / m + off) * self.n + k % m + off).collect())
    }

    pub fn ensure_congruent(&self, other: &GridSpec) -> Result<()> {
        if self.congruent(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Sampled complex envelope, √(photons/m²s).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub spec: GridSpec,
    pub data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        ComplexGrid {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let data = (0..spec.len())
            .map(|k| {
                let (x, y) = spec.xy(k);
                f(x, y)
            })
            .collect();
        ComplexGrid { spec, data }
    }

    /// ∫|E|² dρ.
    pub fn power(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spec.cell_area()
    }

    pub fn intensity(&self) -> RealGrid {
        RealGrid {
            spec: self.spec,
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Sampled real map (intensity, reflectivity, image).
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl RealGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        RealGrid {
            spec,
            data: vec![0.0; spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..spec.len())
            .map(|k| {
                let (x, y) = spec.xy(k);
                f(x, y)
            })
            .collect();
        RealGrid { spec, data }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.spec.n + j]
    }

    /// ∫ f dρ.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn crop_center(&self, m: usize) -> Result<RealGrid> {
        let (spec, _) = self.spec.window(m)?;
        let idx = self.spec.window_indices(m)?;
        Ok(RealGrid {
            spec,
            data: idx.iter().map(|&k| self.data[k]).collect(),
        })
    }

    /// Value at the point reflected through the origin; zero where the mirror falls off-grid.
    pub fn point_reflected(&self) -> RealGrid {
        let n = self.spec.n;
        let mut out = RealGrid::zeros(self.spec);
        for i in 1..n {
            for j in 1..n {
                out.data[i * n + j] = self.data[(n - i) * n + (n - j)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(100, 1.0, Plane::Source).is_err());
        assert!(GridSpec::new(64, 0.0, Plane::Source).is_err());
    }

    #[test]
    fn centered_coordinates() {
        let g = GridSpec::new(8, 0.5, Plane::Target).unwrap();
        assert_eq!(g.coord(4), 0.0);
        assert_eq!(g.coord(0), -2.0);
        assert_eq!(g.index_of(0.0, 0.0), Some(4 * 8 + 4));
        assert_eq!(g.index_of(0.5, -0.5), Some(3 * 8 + 5));
        assert_eq!(g.index_of(10.0, 0.0), None);
    }

    #[test]
    fn point_reflection_involution_off_border() {
        let g = GridSpec::new(8, 1.0, Plane::Target).unwrap();
        let f = RealGrid::from_fn(g, |x, y| if x.abs() < 3.5 && y.abs() < 3.5 { x + 10.0 * y } else { 0.0 });
        let r = f.point_reflected();
        assert_eq!(r.at(4 + 1, 4 + 2), f.at(4 - 1, 4 - 2));
        assert_eq!(r.point_reflected(), f);
    }

    #[test]
    fn window_keeps_coordinates() {
        let g = GridSpec::new(16, 0.5, Plane::Target).unwrap();
        let idx = g.window_indices(4).unwrap();
        let (w, _) = g.window(4).unwrap();
        for (k, &gk) in idx.iter().enumerate() {
            assert_eq!(w.xy(k), g.xy(gk));
        }
        assert!(g.window(32).is_err());
    }

    #[test]
    fn source_sampling_rules() {
        let g = GridSpec::new(128, 1e-3, Plane::Source).unwrap();
        assert!(g.check_source_sampling(0.02, 3e-3).is_ok());
        assert!(g.check_source_sampling(0.03, 3e-3).is_err());
        assert!(matches!(
            g.check_source_sampling(0.01, 2e-3),
            Err(Error::Sampling { .. })
        ));
    }
}
