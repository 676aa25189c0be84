//! Speculative decoding over 2D token grids.
//!
//! The crate provides an exact speculative decoder, a pooled-acceptance
//! variant that relaxes acceptance over latent codebook neighborhoods, and a
//! multi-scale decoder that drafts at low resolution, verifies at high
//! resolution and resamples only locally around rejections. Toy Markov models
//! make every decoder small enough for [`oracle`] to compute exact output
//! laws, and [`metrics`] turns decode traces into NFE-based speedups.

pub mod acceptance;
pub mod categorical;
pub mod cli;
pub mod codebook;
pub mod engine;
pub mod error;
pub mod grid;
pub mod locality;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod rng;

pub use categorical::{tvd, Categorical};
pub use codebook::Codebook;
pub use error::{Error, Result};
pub use grid::{GridShape, TokenGrid, VocabId};
pub use rng::{Chooser, RandomSource};
