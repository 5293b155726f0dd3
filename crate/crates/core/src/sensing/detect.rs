//! Poisson photocounting with sub-unity quantum efficiency.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Counts from one frame of duration T_f.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameCounts {
    pub pixels: Vec<u64>,
    pub bucket: u64,
    pub frame: u64,
}

pub fn poisson(mean: f64, rng: &mut impl Rng) -> Result<u64> {
    if mean.is_nan() || mean < 0.0 {
        return Err(Error::Internal(format!("negative or NaN photocount mean {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Internal(format!("poisson({mean}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Counts with means η·I_p·A_p·T_f for each intensity sample.
pub fn detect_counts(
    intensity: &[f64],
    efficiency: f64,
    pixel_area: f64,
    duration: f64,
    rng: &mut impl Rng,
) -> Result<Vec<u64>> {
    let scale = efficiency * pixel_area * duration;
    intensity.iter().map(|&i| poisson(i * scale, rng)).collect()
}

/// Bucket count with mean η·P_b·T_f.
pub fn detect_bucket(flux: f64, efficiency: f64, duration: f64, rng: &mut impl Rng) -> Result<u64> {
    poisson(flux * efficiency * duration, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_mean_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(detect_counts(&[0.0; 10], 0.9, 1.0, 1.0, &mut rng).unwrap(), vec![0; 10]);
        assert!(poisson(-1.0, &mut rng).is_err());
        assert!(matches!(poisson(f64::NAN, &mut rng), Err(Error::Internal(_))));
    }

    #[test]
    fn poisson_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 3.7;
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| poisson(m, &mut rng).unwrap() as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - m).abs() < 5.0 * (m / n as f64).sqrt());
        // var of sample variance ≈ (μ₄ − σ⁴)/n with μ₄ = m + 3m² for Poisson
        assert!((var - m).abs() < 5.0 * ((m + 2.0 * m * m) / n as f64).sqrt());
    }

    #[test]
    fn efficiency_thins_counts() {
        let intensity = vec![50.0; 20_000];
        let full: u64 = detect_counts(&intensity, 1.0, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().iter().sum();
        let half: u64 = detect_counts(&intensity, 0.5, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().iter().sum();
        let ratio = half as f64 / full as f64;
        assert!((ratio - 0.5).abs() < 0.01, "{ratio}");
    }
}
