//! Bucket-aperture averaging of target-induced speckle.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::quadrature::{integrate, Quadrature};

/// Overlap area of two circles of diameter `d` whose centres are `zeta` apart.
pub fn circle_overlap(zeta: f64, d: f64) -> Result<f64> {
    if zeta.is_nan() || zeta < 0.0 {
        return Err(Error::domain("zeta", format!("must be ≥ 0, got {zeta}")));
    }
    if !(d > 0.0) {
        return Err(Error::domain("diameter", format!("must be > 0, got {d}")));
    }
    if zeta >= d {
        return Ok(0.0);
    }
    let u = zeta / d;
    Ok(0.5 * d * d * (u.acos() - u * (1.0 - u * u).sqrt()))
}

/// Γ(β) with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFactor {
    pub value: f64,
    pub quadrature: Quadrature,
}

/// Γ = (4πβ)⁻² ∫d²ν e^{−|ν|²/2} O(|ν|, 4√β).
///
/// Radial symmetry reduces this to ∫₀^D 2πr e^{−r²/2} O(r, D) dr with D = 4√β. The
/// substitution r = D cos θ removes the square-root endpoint of the overlap function,
/// leaving a smooth integrand on [0, π/2].
pub fn speckle_averaging_gamma(beta: f64) -> Result<GammaFactor> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain("beta", format!("must be finite and > 0, got {beta}")));
    }
    let d = 4.0 * beta.sqrt();
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let r = d * c;
        let overlap = 0.5 * d * d * (theta - s * c);
        2.0 * PI * r * (-0.5 * r * r).exp() * overlap * d * s
    };
    // 64 panels × 8 nodes = 512 nodes minimum; doubled until converged.
    let q = integrate(integrand, 0.0, 0.5 * PI, 64, 1 << 14, 1e-13);
    let norm = (4.0 * PI * beta).powi(2);
    let quadrature = Quadrature {
        value: q.value / norm,
        error_estimate: q.error_estimate / norm,
        nodes: q.nodes,
    };
    Ok(GammaFactor {
        value: quadrature.value,
        quadrature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn overlap_limits() {
        assert_relative_eq!(circle_overlap(0.0, 2.0).unwrap(), PI, max_relative = 1e-15);
        assert_eq!(circle_overlap(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(circle_overlap(7.0, 2.0).unwrap(), 0.0);
        // continuity at ζ = D
        assert!(circle_overlap(2.0 - 1e-9, 2.0).unwrap() < 1e-12);
        assert!(circle_overlap(-1.0, 2.0).is_err());
        assert!(circle_overlap(1.0, 0.0).is_err());
    }

    #[test]
    fn overlap_half_separation() {
        // mpmath: O(1, 2) = 1.22836969860875684554...
        assert_relative_eq!(
            circle_overlap(1.0, 2.0).unwrap(),
            1.228_369_698_608_756_8,
            max_relative = 1e-14
        );
    }

    #[test]
    fn overlap_matches_pixel_counting() {
        // Independent check: count lattice points inside both discs.
        let d: f64 = 2.0;
        let zeta = 1.0;
        let n = 2000;
        let h = 2.0 * d / n as f64;
        let r2 = 0.25 * d * d;
        let mut count = 0usize;
        for i in 0..n {
            let x = -d + (i as f64 + 0.5) * h;
            for j in 0..n {
                let y = -d + (j as f64 + 0.5) * h;
                if x * x + y * y <= r2 && (x - zeta).powi(2) + y * y <= r2 {
                    count += 1;
                }
            }
        }
        let area = count as f64 * h * h;
        assert_relative_eq!(area, circle_overlap(zeta, d).unwrap(), max_relative = 2e-3);
    }

    #[test]
    fn gamma_reference_values() {
        // 30-digit mpmath quadrature of the 2-D definition.
        let cases = [
            (1e-4, 0.999_800_033_328_667_2),
            (1.0, 0.307_123_619_636_789),
            (2.0, 0.180_606_431_212_612_9),
            (100.0, 0.004_800_591_223_795_782),
        ];
        for (beta, expect) in cases {
            let g = speckle_averaging_gamma(beta).unwrap();
            assert!((g.value - expect).abs() < 1e-10, "beta={beta}: {}", g.value);
            assert!(g.quadrature.error_estimate < 1e-6);
            assert!(g.quadrature.nodes >= 512);
        }
    }

    #[test]
    fn gamma_small_and_large_detector_limits() {
        let g = speckle_averaging_gamma(1e-4).unwrap().value;
        assert!((0.99..=1.0).contains(&g));
        let g = speckle_averaging_gamma(100.0).unwrap().value;
        assert!((2.0 * 100.0 * g - 1.0).abs() <= 0.05);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(speckle_averaging_gamma(0.0).is_err());
        assert!(speckle_averaging_gamma(-1.0).is_err());
    }

    #[test]
    fn gamma_decreasing() {
        let mut prev = 1.0;
        for i in 0..40 {
            let beta = 10f64.powf(-3.0 + 0.15 * i as f64);
            let g = speckle_averaging_gamma(beta).unwrap().value;
            assert!(g > 0.0 && g <= 1.0 && g < prev, "beta={beta}");
            prev = g;
        }
    }
}
