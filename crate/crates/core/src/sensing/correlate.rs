//! Frame-wise cross-correlation of reference pixels with the bucket.
//!
//! Count sums are carried in f64 but stay exact integers below 2⁵³, which makes the
//! result independent of summation order; the `exact` flag records whether that held.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

use super::detect::FrameCounts;

const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Dc,
    Ac,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub frames: u64,
    /// Σ_k n_{p,k}
    pub reference: Vec<f64>,
    /// Σ_k n_{p,k} n_{b,k}
    pub cross: Vec<f64>,
    /// Σ_k n_{b,k}
    pub bucket: f64,
}

impl BlockSums {
    fn zeros(len: usize) -> Self {
        BlockSums {
            frames: 0,
            reference: vec![0.0; len],
            cross: vec![0.0; len],
            bucket: 0.0,
        }
    }

    fn absorb(&mut self, other: &BlockSums) {
        self.frames += other.frames;
        self.bucket += other.bucket;
        self.reference.iter_mut().zip(&other.reference).for_each(|(a, b)| *a += b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a += b);
    }

    fn remove(&mut self, other: &BlockSums) {
        self.frames -= other.frames;
        self.bucket -= other.bucket;
        self.reference.iter_mut().zip(&other.reference).for_each(|(a, b)| *a -= b);
        self.cross.iter_mut().zip(&other.cross).for_each(|(a, b)| *a -= b);
    }
}

/// Streaming accumulator; frame k lands in block k mod B.
#[derive(Debug, Clone)]
pub struct Correlator {
    spec: GridSpec,
    blocks: Vec<BlockSums>,
    frames: u64,
    exact: bool,
}

impl Correlator {
    pub fn new(spec: GridSpec, n_blocks: usize) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::Config("correlator needs at least one block".into()));
        }
        Ok(Correlator {
            spec,
            blocks: vec![BlockSums::zeros(spec.len()); n_blocks],
            frames: 0,
            exact: true,
        })
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Reference values are counts, or computed mean counts for the computational imager.
    pub fn add(&mut self, reference: &[f64], bucket: f64) -> Result<()> {
        if reference.len() != self.spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} reference samples for a {}-pixel image",
                reference.len(),
                self.spec.len()
            )));
        }
        if !bucket.is_finite() || reference.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("non-finite detector output".into()));
        }
        let nb = self.blocks.len() as u64;
        let block = &mut self.blocks[(self.frames % nb) as usize];
        block.frames += 1;
        block.bucket += bucket;
        let mut exact = bucket.fract() == 0.0;
        for ((r, c), &v) in block.reference.iter_mut().zip(block.cross.iter_mut()).zip(reference) {
            *r += v;
            *c += v * bucket;
            exact &= v.fract() == 0.0;
        }
        self.exact &= exact;
        self.frames += 1;
        Ok(())
    }

    pub fn add_counts(&mut self, counts: &FrameCounts) -> Result<()> {
        let reference: Vec<f64> = counts.pixels.iter().map(|&n| n as f64).collect();
        self.add(&reference, counts.bucket as f64)
    }

    pub fn finish(self) -> CorrelationSums {
        let mut sums = CorrelationSums {
            spec: self.spec,
            blocks: self.blocks,
            exact: self.exact,
        };
        sums.exact &= sums.within_exact_range();
        sums
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSums {
    pub spec: GridSpec,
    pub blocks: Vec<BlockSums>,
    /// All inputs were integers and every partial sum stayed below 2⁵³.
    pub exact: bool,
}

impl CorrelationSums {
    pub fn totals(&self) -> BlockSums {
        let mut t = BlockSums::zeros(self.spec.len());
        for b in &self.blocks {
            t.absorb(b);
        }
        t
    }

    pub fn frames(&self) -> u64 {
        self.blocks.iter().map(|b| b.frames).sum()
    }

    fn within_exact_range(&self) -> bool {
        let t = self.totals();
        t.bucket < EXACT_LIMIT && t.reference.iter().chain(&t.cross).all(|&v| v < EXACT_LIMIT)
    }

    /// Pool another set of sums over the same pixels (block-wise).
    pub fn merge(&mut self, other: &CorrelationSums) -> Result<()> {
        self.spec.ensure_congruent(&other.spec)?;
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::Config("cannot merge sums with different block counts".into()));
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.absorb(b);
        }
        self.exact = self.exact && other.exact && self.within_exact_range();
        Ok(())
    }

    /// Stack independent runs so each contributes its own blocks (jackknife over runs).
    pub fn concat(parts: &[CorrelationSums]) -> Result<CorrelationSums> {
        let first = parts.first().ok_or_else(|| Error::Estimation("no correlation sums to pool".into()))?;
        let mut out = CorrelationSums {
            spec: first.spec,
            blocks: Vec::new(),
            exact: true,
        };
        for p in parts {
            out.spec.ensure_congruent(&p.spec)?;
            out.blocks.extend(p.blocks.iter().cloned());
            out.exact &= p.exact;
        }
        out.exact &= out.within_exact_range();
        Ok(out)
    }

    /// Totals with block `b` left out (jackknife).
    pub fn leave_one_out(&self, b: usize) -> BlockSums {
        let mut t = self.totals();
        t.remove(&self.blocks[b]);
        t
    }

    pub fn image(&self, coupling: Coupling) -> Result<GhostImage> {
        GhostImage::from_sums(self.spec, &self.totals(), coupling, self.exact)
    }

    /// (N·S_pb, N·S_pb − S_p·S_b, S_p·S_b) for one pixel, when the sums are exact integers.
    ///
    /// dc = S_pb/N, ac = (N·S_pb − S_p·S_b)/N², background = S_p·S_b/N².
    pub fn exact_numerators(&self, pixel: usize) -> Option<(i128, i128, i128)> {
        if !self.exact {
            return None;
        }
        let t = self.totals();
        let n = t.frames as i128;
        let s_pb = t.cross[pixel] as i128;
        let s_p = t.reference[pixel] as i128;
        let s_b = t.bucket as i128;
        Some((n * s_pb, n * s_pb - s_p * s_b, s_p * s_b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhostImage {
    pub spec: GridSpec,
    pub coupling: Coupling,
    pub frames: u64,
    /// Ĉ(ρ_p)
    pub values: Vec<f64>,
    /// n̄_p·n̄_b per pixel
    pub background: Vec<f64>,
    pub mean_reference: Vec<f64>,
    pub mean_bucket: f64,
}

impl GhostImage {
    pub fn from_sums(spec: GridSpec, t: &BlockSums, coupling: Coupling, exact: bool) -> Result<Self> {
        if t.frames < 2 {
            return Err(Error::Estimation(format!("need at least 2 frames, got {}", t.frames)));
        }
        let n = t.frames as f64;
        let mean_bucket = t.bucket / n;
        let mean_reference: Vec<f64> = t.reference.iter().map(|s| s / n).collect();
        let background: Vec<f64> = mean_reference.iter().map(|m| m * mean_bucket).collect();
        let values = match coupling {
            Coupling::Dc => t.cross.iter().map(|c| c / n).collect(),
            Coupling::Ac if exact => {
                let ni = t.frames as i128;
                let sb = t.bucket as i128;
                t.cross
                    .iter()
                    .zip(&t.reference)
                    .map(|(&c, &r)| (ni * c as i128 - r as i128 * sb) as f64 / (n * n))
                    .collect()
            }
            Coupling::Ac => t
                .cross
                .iter()
                .zip(&t.reference)
                .map(|(c, r)| (c - r * t.bucket / n) / n)
                .collect(),
        };
        Ok(GhostImage {
            spec,
            coupling,
            frames: t.frames,
            values,
            background,
            mean_reference,
            mean_bucket,
        })
    }

    /// Ĉ/Ĉ₀ per pixel (flat-fielded); zero where the background vanishes.
    pub fn normalized(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.background)
            .map(|(v, b)| if *b > 0.0 { v / b } else { 0.0 })
            .collect()
    }

    /// Ĉ₀ averaged over the image.
    pub fn background_level(&self) -> f64 {
        self.background.iter().sum::<f64>() / self.background.len() as f64
    }

    pub fn to_grid(&self) -> crate::grid::RealGrid {
        crate::grid::RealGrid {
            spec: self.spec,
            data: self.values.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Plane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> GridSpec {
        GridSpec::new(2, 1.0, Plane::Detector).unwrap()
    }

    #[test]
    fn identical_streams_give_sample_variance() {
        let mut c = Correlator::new(spec(), 4).unwrap();
        let xs = [3.0, 7.0, 1.0, 4.0, 9.0, 2.0];
        for &x in &xs {
            c.add(&[x; 4], x).unwrap();
        }
        let img = c.finish().image(Coupling::Ac).unwrap();
        let m = xs.iter().sum::<f64>() / 6.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 6.0;
        assert!((img.values[0] - v).abs() < 1e-12);
    }

    #[test]
    fn dc_ac_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = Correlator::new(spec(), 3).unwrap();
        let mut frames = Vec::new();
        for _ in 0..500 {
            let r: Vec<f64> = (0..4).map(|_| rng.random_range(0..40) as f64).collect();
            let b = rng.random_range(0..100_000) as f64;
            c.add(&r, b).unwrap();
            frames.push((r, b));
        }
        let sums = c.finish();
        assert!(sums.exact);
        let n = frames.len() as i128;
        for p in 0..4 {
            let (dc, ac, bg) = sums.exact_numerators(p).unwrap();
            assert_eq!(dc - ac, bg);
            // two-pass centred sum: Σ(N n_p − S_p)(N n_b − S_b) = N·(N S_pb − S_p S_b)
            let sp: i128 = frames.iter().map(|(r, _)| r[p] as i128).sum();
            let sb: i128 = frames.iter().map(|(_, b)| *b as i128).sum();
            let centred: i128 = frames
                .iter()
                .map(|(r, b)| (n * r[p] as i128 - sp) * (n * *b as i128 - sb))
                .sum();
            assert_eq!(centred, n * ac);
        }
        let dc = sums.image(Coupling::Dc).unwrap();
        let ac = sums.image(Coupling::Ac).unwrap();
        for p in 0..4 {
            let lhs = dc.values[p] - ac.values[p];
            assert!((lhs - dc.background[p]).abs() <= 4.0 * f64::EPSILON * dc.values[p]);
        }
    }

    #[test]
    fn independent_streams_have_zero_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = Correlator::new(spec(), 1).unwrap();
        let n = 20_000;
        for _ in 0..n {
            let r: Vec<f64> = (0..4).map(|_| rng.random_range(0..10) as f64).collect();
            c.add(&r, rng.random_range(0..10) as f64).unwrap();
        }
        let img = c.finish().image(Coupling::Ac).unwrap();
        // var of uniform{0..9} = 8.25; SE of covariance ≈ 8.25/√n
        for v in img.values {
            assert!(v.abs() < 5.0 * 8.25 / (n as f64).sqrt());
        }
    }

    #[test]
    fn order_independent_and_errors() {
        let mut a = Correlator::new(spec(), 1).unwrap();
        let mut b = Correlator::new(spec(), 1).unwrap();
        let frames: Vec<(Vec<f64>, f64)> = (0..50).map(|k| (vec![(k % 7) as f64; 4], (k * 13 % 11) as f64)).collect();
        for (r, x) in &frames {
            a.add(r, *x).unwrap();
        }
        for (r, x) in frames.iter().rev() {
            b.add(r, *x).unwrap();
        }
        assert_eq!(a.finish().image(Coupling::Ac).unwrap(), b.finish().image(Coupling::Ac).unwrap());
        let mut c = Correlator::new(spec(), 1).unwrap();
        assert!(c.add(&[1.0; 3], 1.0).is_err());
        c.add(&[1.0; 4], 1.0).unwrap();
        assert!(c.finish().image(Coupling::Dc).is_err());
        assert!(Correlator::new(spec(), 0).is_err());
    }
}
