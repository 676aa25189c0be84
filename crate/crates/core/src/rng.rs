//! Seeded randomness and the choice interface shared by the decoders.
//!
//! Decoders never touch a generator directly. Every random decision goes
//! through [`Chooser`], which lets the same decoding loop run either on a
//! [`RandomSource`] (Monte Carlo) or on the oracle's branch enumerator
//! (exact laws).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::categorical::Categorical;
use crate::error::{Error, Result};
use crate::grid::VocabId;

/// Identifier of the generator algorithm, recorded in every report.
pub const RNG_ALGORITHM: &str = "chacha20 (rand_chacha 0.3, seed_from_u64, f64 via rand 0.8 Standard)";

/// The two kinds of random decision a decoder makes.
pub trait Chooser {
    /// Draw an id from `dist`. Never returns an id with zero mass.
    fn categorical(&mut self, dist: &Categorical) -> Result<VocabId>;

    /// Return `true` with probability `p` (clamped to `[0, 1]`).
    fn bernoulli(&mut self, p: f64) -> bool;
}

/// Deterministic, replayable generator. ChaCha20 is a counter-mode stream,
/// so identical seeds give identical draw sequences on every platform.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    draws: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            draws: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of uniforms consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.gen::<f64>()
    }

    pub fn sample(&mut self, dist: &Categorical) -> VocabId {
        let u = self.uniform();
        inverse_cdf(dist, u)
    }
}

/// Inverse-CDF lookup that skips zero-mass ids, so rounding at the top of
/// the cumulative sum lands on the last id with positive mass.
fn inverse_cdf(dist: &Categorical, u: f64) -> VocabId {
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (id, m) in dist.support() {
        cumulative += m;
        last_positive = Some(id);
        if u < cumulative {
            return id;
        }
    }
    // Categorical invariants guarantee a non-empty support.
    last_positive.expect("categorical with empty support")
}

impl Chooser for RandomSource {
    fn categorical(&mut self, dist: &Categorical) -> Result<VocabId> {
        if dist.support().next().is_none() {
            return Err(Error::Contract("sampling from an all-zero distribution".into()));
        }
        Ok(self.sample(dist))
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// Free-function form of [`RandomSource::sample`].
pub fn sample(dist: &Categorical, rng: &mut RandomSource) -> VocabId {
    rng.sample(dist)
}
