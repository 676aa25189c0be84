//! Autoregressive model and resampler interfaces, plus the toy families
//! used at desk scale.

mod sampler;
mod toy;

use serde::{Deserialize, Serialize};

pub use sampler::ToyBlockSampler;
pub use toy::{derive_drafter, ToyMarkovModel};

use crate::categorical::Categorical;
use crate::error::Result;
use crate::grid::{GridShape, VocabId};

/// Prompt surrogate shared by target and drafter within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditioning {
    pub seed_token: VocabId,
}

impl Conditioning {
    pub fn new(seed_token: VocabId) -> Self {
        Self { seed_token }
    }
}

/// Conditional next-token distribution over a raster-ordered grid.
///
/// `evaluate` must be a pure function of the conditioning, `prefix[..position]`
/// and `position`. Tokens at or after `position` are ignored.
pub trait ArModel {
    fn vocab_size(&self) -> usize;

    fn grid_shape(&self) -> GridShape;

    fn evaluate(&self, cond: Conditioning, prefix: &[VocabId], position: usize) -> Result<Categorical>;
}

/// Maps complete low-resolution rows to `r x r` times as many high-resolution
/// tokens. Row-causal: output rows for low row `b` depend only on low rows `<= b`.
pub trait Upsampler {
    fn factor(&self) -> usize;

    /// `low_rows` holds whole rows of width `low_width`. `high_context` is the
    /// finalized high-resolution prefix. Returns raster-ordered tokens for the
    /// `r` high-resolution rows produced by each low-resolution row.
    fn up_sample(
        &self,
        low_rows: &[VocabId],
        low_width: usize,
        high_context: &[VocabId],
    ) -> Result<Vec<VocabId>>;
}

/// Maps groups of `r` finalized high-resolution rows to one low-resolution row.
pub trait Downsampler {
    fn factor(&self) -> usize;

    fn down_sample(&self, high_rows: &[VocabId], high_width: usize) -> Result<Vec<VocabId>>;
}
