//! NFE accounting, acceptance rates and the abstract latency model.
//!
//! Costs are in abstract units. A sequential forward pass costs `c_seq` for
//! both drafter and target (they share an architecture), a batched
//! verification call costs `c_par`, and each up/down-sampler call costs
//! `c_overhead`. The baseline samples all `N` target tokens sequentially.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{Counters, DecodeTrace, DecoderKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_seq: f64,
    pub c_par: f64,
    pub c_overhead: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c_seq: 1.0,
            c_par: 1.0,
            c_overhead: 0.05,
        }
    }
}

impl CostModel {
    /// Counts only sequential forward passes.
    pub fn pure_nfe() -> Self {
        Self {
            c_seq: 1.0,
            c_par: 0.0,
            c_overhead: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !(ok(self.c_seq) && ok(self.c_par) && ok(self.c_overhead)) {
            return Err(Error::Parameter(format!("costs must be finite and >= 0: {self:?}")));
        }
        if self.c_seq == 0.0 {
            return Err(Error::Parameter("c_seq must be positive".into()));
        }
        Ok(())
    }
}

/// Share of the simulated cost spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostFractions {
    /// Sequential drafter sampling.
    pub draft: f64,
    /// Batched verification calls.
    pub verify: f64,
    /// Sequential target sampling.
    pub resample: f64,
    /// Up- and down-sampler calls.
    pub samplers: f64,
}

impl CostFractions {
    pub fn sum(&self) -> f64 {
        self.draft + self.verify + self.resample + self.samplers
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub decoder: DecoderKind,
    /// Target sequence length `T_p = N`.
    pub target_len: usize,
    /// Draft tokens sampled, `T_q`.
    pub draft_len: usize,
    /// Accepted draft tokens over drafted tokens.
    pub acceptance_rate: f64,
    /// `1 - (sequentially sampled target tokens) / N`.
    pub a_effective: f64,
    pub counters: Counters,
    pub cost: CostModel,
    pub simulated_cost: f64,
    pub baseline_cost: f64,
    pub measured_speedup: f64,
    pub theoretical_speedup: f64,
    pub cost_fractions: CostFractions,
    /// [`consistency_check`] of this summary.
    pub deviation: f64,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// `S_T = T_p / ((1 - a) * T_p + T_q)`.
pub fn theoretical_speedup(target_len: usize, draft_len: usize, acceptance: f64) -> Result<f64> {
    if target_len == 0 {
        return Err(Error::Parameter("target length must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&acceptance) {
        return Err(Error::Parameter(format!("acceptance rate {acceptance} outside [0, 1]")));
    }
    let tp = target_len as f64;
    let denom = (1.0 - acceptance) * tp + draft_len as f64;
    if denom <= 0.0 {
        return Err(Error::Parameter("no sequential work: speedup is unbounded".into()));
    }
    Ok(tp / denom)
}

pub fn summarize(trace: &DecodeTrace, cost: &CostModel) -> Result<RunSummary> {
    cost.validate()?;
    if !trace.is_complete() {
        return Err(Error::Contract("cannot summarize an incomplete trace".into()));
    }
    let c = trace.counters;
    let n = trace.target_len();
    let parts = CostFractions {
        draft: cost.c_seq * c.draft_seq_nfe as f64,
        verify: cost.c_par * c.target_parallel_calls as f64,
        resample: cost.c_seq * c.target_seq_nfe as f64,
        samplers: cost.c_overhead * (c.upsample_calls + c.downsample_calls) as f64,
    };
    let simulated_cost = parts.sum();
    if simulated_cost <= 0.0 {
        return Err(Error::Contract("trace records no work".into()));
    }
    let baseline_cost = cost.c_seq * n as f64;
    let acceptance_rate = trace.acceptance_rate();
    let a_effective = 1.0 - c.target_seq_nfe as f64 / n as f64;
    let mut summary = RunSummary {
        decoder: trace.config.decoder,
        target_len: n,
        draft_len: c.draft_seq_nfe,
        acceptance_rate,
        a_effective,
        counters: c,
        cost: *cost,
        simulated_cost,
        baseline_cost,
        measured_speedup: baseline_cost / simulated_cost,
        theoretical_speedup: theoretical_speedup(n, c.draft_seq_nfe, acceptance_rate)?,
        cost_fractions: CostFractions {
            draft: parts.draft / simulated_cost,
            verify: parts.verify / simulated_cost,
            resample: parts.resample / simulated_cost,
            samplers: parts.samplers / simulated_cost,
        },
        deviation: 0.0,
    };
    summary.deviation = consistency_check(&summary)?;
    Ok(summary)
}

/// Speedup counting only sequential forward passes.
pub fn pure_nfe_speedup(summary: &RunSummary) -> f64 {
    let c = summary.counters;
    summary.target_len as f64 / (c.draft_seq_nfe + c.target_seq_nfe) as f64
}

/// Relative gap between the pure-NFE speedup and `S_T(N, T_q, a)` with the
/// decision-based acceptance rate. Zero whenever every rejected decision
/// costs exactly one resample (naive local rejection).
pub fn consistency_check(summary: &RunSummary) -> Result<f64> {
    relative_gap(summary, summary.acceptance_rate)
}

/// As [`consistency_check`], using the resampled-fraction rate `a_effective`.
/// This identity is exact for every rejection mode.
pub fn consistency_check_effective(summary: &RunSummary) -> Result<f64> {
    relative_gap(summary, summary.a_effective.clamp(0.0, 1.0))
}

fn relative_gap(summary: &RunSummary, a: f64) -> Result<f64> {
    let st = theoretical_speedup(summary.target_len, summary.draft_len, a)?;
    Ok((pure_nfe_speedup(summary) - st).abs() / st)
}

/// One operating point of a parameter sweep, averaged over a seed ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub acc_rate: f64,
    pub a_effective: f64,
    pub speedup_measured: f64,
    pub speedup_theoretical: f64,
    pub deviation: f64,
}

impl SweepRow {
    /// Ensemble means over per-run summaries.
    pub fn from_summaries(axis: &str, value: String, runs: &[RunSummary]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Parameter("empty seed ensemble".into()));
        }
        let mean = |f: &dyn Fn(&RunSummary) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
        Ok(Self {
            axis: axis.to_owned(),
            value,
            acc_rate: mean(&|s| s.acceptance_rate),
            a_effective: mean(&|s| s.a_effective),
            speedup_measured: mean(&|s| s.measured_speedup),
            speedup_theoretical: mean(&|s| s.theoretical_speedup),
            deviation: mean(&|s| s.deviation),
        })
    }
}

pub const SWEEP_CSV_HEADER: &str =
    "axis,value,acc_rate,a_effective,speedup_measured,speedup_theoretical,deviation";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.axis, r.value, r.acc_rate, r.a_effective, r.speedup_measured, r.speedup_theoretical, r.deviation
        )
        .unwrap();
    }
    s
}
