//! Counter-based seed splitting: every (purpose, trial, frame) stream is derivable in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Path3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Source,
    Screen(Path3),
    Target,
    ShotReference,
    ShotBucket,
    Bootstrap,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Source => 1,
            Purpose::Screen(Path3::Reference) => 2,
            Purpose::Screen(Path3::Signal) => 3,
            Purpose::Screen(Path3::Target) => 4,
            Purpose::Target => 5,
            Purpose::ShotReference => 6,
            Purpose::ShotBucket => 7,
            Purpose::Bootstrap => 8,
        }
    }
}

/// Identifies one random stream; serialized into artifact sidecars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub purpose: Purpose,
    pub trial: u64,
    pub frame: u64,
}

impl SeedRecord {
    pub fn new(master: u64, purpose: Purpose, trial: u64, frame: u64) -> Self {
        SeedRecord {
            master,
            purpose,
            trial,
            frame,
        }
    }

    pub fn seed(&self) -> u64 {
        let mut h = splitmix64(self.master);
        h = splitmix64(h ^ self.purpose.code());
        h = splitmix64(h ^ self.trial);
        splitmix64(h ^ self.frame)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed())
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn streams_are_distinct_and_stable() {
        let mut seen = HashSet::new();
        for p in [Purpose::Source, Purpose::Target, Purpose::ShotBucket, Purpose::Screen(Path3::Signal)] {
            for trial in 0..20 {
                for frame in 0..20 {
                    assert!(seen.insert(SeedRecord::new(7, p, trial, frame).seed()));
                }
            }
        }
        let a: u64 = SeedRecord::new(7, Purpose::Source, 3, 4).rng().random();
        let b: u64 = SeedRecord::new(7, Purpose::Source, 3, 4).rng().random();
        assert_eq!(a, b);
    }
}
