use serde::{Deserialize, Serialize};

use crate::engine::DecodeConfig;
use crate::grid::{GridShape, TokenGrid, VocabId};

/// Sequential and parallel work done during one decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Sequential drafter forward passes.
    pub draft_seq_nfe: usize,
    /// Sequential target forward passes (baseline sampling and MuLo-SD resampling).
    pub target_seq_nfe: usize,
    /// Batched verification calls, each scoring a whole window.
    pub target_parallel_calls: usize,
    pub downsample_calls: usize,
    pub upsample_calls: usize,
}

/// One draft-verify-resample iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub window_start: usize,
    /// Positions finalized by this iteration, starting at `window_start`.
    pub window_len: usize,
    /// Low-resolution draft tokens (multi-scale decoding only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub low_res_drafts: Vec<VocabId>,
    /// High-resolution positions that received a draft token.
    pub drafted: Vec<usize>,
    pub draft_tokens: Vec<VocabId>,
    /// Per verified draft: acceptance probability (ratio rules) or pooled
    /// mass (threshold rule). Ratio rules stop at the first rejection, so
    /// this can be shorter than `drafted`.
    pub scores: Vec<f64>,
    pub accepted: Vec<bool>,
    /// `R_T`.
    pub rejected: Vec<usize>,
    /// `R_X`.
    pub expanded: Vec<usize>,
    /// Positions sampled from the target (or residual) in this iteration.
    pub resampled: Vec<(usize, VocabId)>,
}

impl IterationRecord {
    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub config: DecodeConfig,
    pub rng_algorithm: String,
    pub target_shape: GridShape,
    pub iterations: Vec<IterationRecord>,
    pub counters: Counters,
    /// Row-major token ids of the output grid.
    pub final_grid: Vec<Vec<usize>>,
}

impl DecodeTrace {
    pub fn target_len(&self) -> usize {
        self.target_shape.len()
    }

    pub fn drafted_total(&self) -> usize {
        self.iterations.iter().map(|it| it.drafted.len()).sum()
    }

    pub fn accepted_total(&self) -> usize {
        self.iterations.iter().map(IterationRecord::accepted_count).sum()
    }

    pub fn expanded_total(&self) -> usize {
        self.iterations.iter().map(|it| it.expanded.len()).sum()
    }

    /// Accepted draft tokens over drafted tokens; zero when nothing was drafted.
    pub fn acceptance_rate(&self) -> f64 {
        let drafted = self.drafted_total();
        if drafted == 0 {
            0.0
        } else {
            self.accepted_total() as f64 / drafted as f64
        }
    }

    pub fn is_complete(&self) -> bool {
        self.final_grid.iter().map(Vec::len).sum::<usize>() == self.target_len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub(crate) fn finish(
        config: DecodeConfig,
        iterations: Vec<IterationRecord>,
        counters: Counters,
        grid: &TokenGrid,
    ) -> Self {
        Self {
            config,
            rng_algorithm: crate::rng::RNG_ALGORITHM.to_owned(),
            target_shape: grid.shape(),
            iterations,
            counters,
            final_grid: grid.rows(),
        }
    }
}
