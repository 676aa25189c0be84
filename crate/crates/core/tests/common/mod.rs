#![allow(dead_code)]

use specdec_grid::codebook::Codebook;
use specdec_grid::engine::DecodeModels;
use specdec_grid::grid::{GridShape, VocabId};
use specdec_grid::models::{derive_drafter, Conditioning, ToyBlockSampler, ToyMarkovModel};

/// Target, drafter, codebook and block sampler for one toy setting.
pub struct Instance {
    pub target: ToyMarkovModel,
    pub drafter: ToyMarkovModel,
    pub codebook: Codebook,
    pub sampler: Option<ToyBlockSampler>,
}

impl Instance {
    /// Same-resolution drafter for token-level speculative decoding.
    pub fn token_level(seed: u64, vocab: usize, h: usize, w: usize, temperature: f64, noise: f64) -> Self {
        let shape = GridShape::new(h, w).unwrap();
        let target = ToyMarkovModel::build(seed, vocab, shape, temperature).unwrap();
        let drafter = derive_drafter(&target, 1, noise, seed ^ 0xD2AF).unwrap();
        let codebook = Codebook::random(seed ^ 0xC0DE, vocab, 2).unwrap();
        Self {
            target,
            drafter,
            codebook,
            sampler: None,
        }
    }

    /// Low-resolution drafter plus block sampler for multi-scale decoding.
    #[allow(clippy::too_many_arguments)]
    pub fn multi_scale(seed: u64, vocab: usize, h: usize, w: usize, r: usize, temperature: f64, noise: f64) -> Self {
        let shape = GridShape::new(h, w).unwrap();
        let target = ToyMarkovModel::build(seed, vocab, shape, temperature).unwrap();
        let drafter = derive_drafter(&target, r, noise, seed ^ 0xD2AF).unwrap();
        let codebook = Codebook::random(seed ^ 0xC0DE, vocab, 2).unwrap();
        let sampler = ToyBlockSampler::build(codebook.clone(), r, seed ^ 0xB10C).unwrap();
        Self {
            target,
            drafter,
            codebook,
            sampler: Some(sampler),
        }
    }

    pub fn models(&self) -> DecodeModels<'_> {
        let m = DecodeModels::target_only(&self.target)
            .with_drafter(&self.drafter)
            .with_codebook(&self.codebook);
        match &self.sampler {
            Some(s) => m.with_samplers(s, s),
            None => m,
        }
    }
}

pub fn cond(id: usize) -> Conditioning {
    Conditioning::new(VocabId(id))
}
