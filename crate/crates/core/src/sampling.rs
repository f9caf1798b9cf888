//! Deterministic sample sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton sequence with a Cranley–Patterson shift drawn from `seed`.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sequence supports at most {} dimensions",
            PRIMES.len()
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// The `index`-th point in `[0, 1)^dim`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| (radical_inverse(index + 1, p) + s).fract())
            .collect()
    }
}

/// Unit-cube points: Halton while the dimension allows it, otherwise
/// per-index ChaCha streams.
#[derive(Debug, Clone)]
pub enum UnitSampler {
    Halton(Halton),
    Random { dim: usize, seed: u64 },
}

impl UnitSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        if dim <= PRIMES.len() {
            UnitSampler::Halton(Halton::new(dim, seed))
        } else {
            UnitSampler::Random { dim, seed }
        }
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        match self {
            UnitSampler::Halton(h) => h.point(index),
            UnitSampler::Random { dim, seed } => {
                let mut rng = trial_rng(*seed, index);
                (0..*dim).map(|_| rng.random::<f64>()).collect()
            }
        }
    }
}

/// Independent generator for trial `stream` under `seed`: one ChaCha key,
/// one stream per trial, so results do not depend on execution order.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
