//! Decoding loops: sequential baseline, exact speculative decoding, pooled
//! (LANTERN-style) speculative decoding and multi-scale local speculative
//! decoding. Every loop draws its randomness through a [`Chooser`] and
//! returns a [`DecodeTrace`].

mod multiscale;
mod speculative;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use multiscale::decode_mulosd;
pub use speculative::{decode_baseline, decode_lantern, decode_specdec, speculative_step, StepOutcome};
pub use trace::{Counters, DecodeTrace, IterationRecord};

use crate::acceptance::AcceptanceRule;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::grid::{TokenGrid, VocabId};
use crate::locality::RejectionMode;
use crate::models::{ArModel, Conditioning, Downsampler, Upsampler};
use crate::rng::{Chooser, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Baseline,
    SpecDec,
    Lantern,
    MuLoSd,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Baseline => "baseline",
            DecoderKind::SpecDec => "specdec",
            DecoderKind::Lantern => "lantern",
            DecoderKind::MuLoSd => "mulosd",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(DecoderKind::Baseline),
            "specdec" => Ok(DecoderKind::SpecDec),
            "lantern" => Ok(DecoderKind::Lantern),
            "mulosd" | "mulo-sd" => Ok(DecoderKind::MuLoSd),
            other => Err(Error::Config(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Distribution used to replace a draft rejected by a ratio rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// `norm(max(0, p - q))` (with `p` relaxed for pooled rules).
    #[default]
    Adjusted,
    /// Samples straight from the target conditional. Biased; exists so the
    /// verification suite can demonstrate that it detects a wrong residual.
    TargetOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub decoder: DecoderKind,
    pub rule: AcceptanceRule,
    pub mode: RejectionMode,
    /// Resolution ratio between target and drafter.
    pub ratio: usize,
    /// Low-resolution rows drafted per multi-scale iteration.
    pub draft_window_rows: usize,
    /// Tokens drafted per iteration by the token-level speculative decoders.
    pub draft_len: usize,
    pub seed: u64,
    pub conditioning: Conditioning,
    #[serde(default)]
    pub residual: ResidualKind,
}

impl DecodeConfig {
    pub fn baseline(seed: u64, conditioning: Conditioning) -> Self {
        Self {
            decoder: DecoderKind::Baseline,
            rule: AcceptanceRule::Exact,
            mode: RejectionMode::RasterScan,
            ratio: 1,
            draft_window_rows: 1,
            draft_len: 1,
            seed,
            conditioning,
            residual: ResidualKind::Adjusted,
        }
    }

    pub fn specdec(draft_len: usize, seed: u64, conditioning: Conditioning) -> Self {
        Self {
            decoder: DecoderKind::SpecDec,
            draft_len,
            ..Self::baseline(seed, conditioning)
        }
    }

    pub fn lantern(k: usize, delta: f64, draft_len: usize, seed: u64, conditioning: Conditioning) -> Self {
        Self {
            decoder: DecoderKind::Lantern,
            rule: AcceptanceRule::PooledRatio { k, delta },
            draft_len,
            ..Self::baseline(seed, conditioning)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn mulosd(
        ratio: usize,
        k: usize,
        delta: f64,
        tau: f64,
        mode: RejectionMode,
        draft_window_rows: usize,
        seed: u64,
        conditioning: Conditioning,
    ) -> Self {
        Self {
            decoder: DecoderKind::MuLoSd,
            rule: AcceptanceRule::PooledThreshold { k, delta, tau },
            mode,
            ratio,
            draft_window_rows,
            ..Self::baseline(seed, conditioning)
        }
    }
}

/// Borrowed models for one decode. Which fields are required depends on the decoder.
#[derive(Clone, Copy)]
pub struct DecodeModels<'a> {
    pub target: &'a dyn ArModel,
    pub drafter: Option<&'a dyn ArModel>,
    pub upsampler: Option<&'a dyn Upsampler>,
    pub downsampler: Option<&'a dyn Downsampler>,
    pub codebook: Option<&'a Codebook>,
}

impl<'a> DecodeModels<'a> {
    pub fn target_only(target: &'a dyn ArModel) -> Self {
        Self {
            target,
            drafter: None,
            upsampler: None,
            downsampler: None,
            codebook: None,
        }
    }

    pub fn with_drafter(mut self, drafter: &'a dyn ArModel) -> Self {
        self.drafter = Some(drafter);
        self
    }

    pub fn with_codebook(mut self, codebook: &'a Codebook) -> Self {
        self.codebook = Some(codebook);
        self
    }

    pub fn with_samplers(mut self, up: &'a dyn Upsampler, down: &'a dyn Downsampler) -> Self {
        self.upsampler = Some(up);
        self.downsampler = Some(down);
        self
    }

    pub(crate) fn drafter(&self) -> Result<&'a dyn ArModel> {
        self.drafter
            .ok_or_else(|| Error::Config("decoder needs a drafter model".into()))
    }

    pub(crate) fn codebook(&self) -> Result<&'a Codebook> {
        self.codebook
            .ok_or_else(|| Error::Config("decoder needs a codebook".into()))
    }
}

/// Runs the configured decoder with a fresh [`RandomSource`] seeded from the config.
pub fn decode(models: &DecodeModels<'_>, config: &DecodeConfig) -> Result<(TokenGrid, DecodeTrace)> {
    let mut rng = RandomSource::new(config.seed);
    decode_with(models, config, &mut rng)
}

/// Runs the configured decoder on an arbitrary source of choices.
pub fn decode_with(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    match config.decoder {
        DecoderKind::Baseline => decode_baseline(models.target, config, chooser),
        DecoderKind::SpecDec => decode_specdec(models, config, chooser),
        DecoderKind::Lantern => decode_lantern(models, config, chooser),
        DecoderKind::MuLoSd => decode_mulosd(models, config, chooser),
    }
}

fn check_same_vocab(target: &dyn ArModel, other: &dyn ArModel) -> Result<()> {
    if target.vocab_size() != other.vocab_size() {
        return Err(Error::Config(format!(
            "target vocabulary {} differs from drafter vocabulary {}",
            target.vocab_size(),
            other.vocab_size()
        )));
    }
    Ok(())
}

fn check_conditioning(target: &dyn ArModel, cond: Conditioning) -> Result<()> {
    if cond.seed_token.0 >= target.vocab_size() {
        return Err(Error::Config(format!(
            "conditioning token {} outside vocabulary",
            cond.seed_token
        )));
    }
    Ok(())
}

pub(crate) fn grid_from(target: &dyn ArModel, tokens: Vec<VocabId>) -> Result<TokenGrid> {
    TokenGrid::from_tokens(target.grid_shape(), target.vocab_size(), tokens)
}
