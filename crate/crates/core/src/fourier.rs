//! Centered 2-D DFT on square grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized transform, e^{-2πi jk/N} when `inverse` is false.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }

    /// Sum over centered indices: out_m = Σ_j f_j e^{∓2πi (j−N/2)(m−N/2)/N}.
    pub fn centered(&self, data: &mut [Complex64], inverse: bool) {
        shift(data, self.n);
        self.transform(data, inverse);
        shift(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Swap quadrants; its own inverse for even N.
pub fn shift(data: &mut [Complex64], n: usize) {
    let h = n / 2;
    for i in 0..h {
        for j in 0..n {
            let jj = (j + h) % n;
            data.swap(i * n + j, (i + h) * n + jj);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn centered_matches_direct_sum() {
        let n = 8;
        let f: Vec<Complex64> = (0..n * n)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut g = f.clone();
        Fft2::new(n).centered(&mut g, false);
        let c = |i: usize| i as f64 - (n / 2) as f64;
        for m in 0..n {
            for l in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let ph = -2.0 * PI * (c(i) * c(m) + c(j) * c(l)) / n as f64;
                        s += f[i * n + j] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((s - g[m * n + l]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 16;
        let f: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(k as f64, -(k as f64) * 0.5)).collect();
        let mut g = f.clone();
        let fft = Fft2::new(n);
        fft.centered(&mut g, false);
        fft.centered(&mut g, true);
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b / (n * n) as f64).norm() < 1e-9);
        }
    }
}
