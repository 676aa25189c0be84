use crate::acceptance::{
    build_bounded_neighborhood, exact_accept_prob, pooled_ratio_accept_prob, residual_distribution,
    AcceptanceRule,
};
use crate::categorical::Categorical;
use crate::codebook::Codebook;
use crate::engine::{
    check_conditioning, check_same_vocab, grid_from, Counters, DecodeConfig, DecodeModels, DecodeTrace,
    DecoderKind, IterationRecord, ResidualKind,
};
use crate::error::{Error, Result};
use crate::grid::{TokenGrid, VocabId};
use crate::models::ArModel;
use crate::rng::Chooser;

/// Outcome of verifying one draft token under a ratio rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accept_prob: f64,
    pub accepted: bool,
    /// The draft when accepted, otherwise the residual sample.
    pub token: VocabId,
}

/// Verifies `draft ~ q` against `p`: one accept coin, and on rejection one
/// residual draw. `Exact` uses the plain ratio; `PooledRatio` pools target
/// mass over the bounded latent neighborhood and draws the residual from the
/// relaxed distribution.
pub fn speculative_step(
    p: &Categorical,
    q: &Categorical,
    draft: VocabId,
    rule: &AcceptanceRule,
    codebook: Option<&Codebook>,
    residual: ResidualKind,
    chooser: &mut dyn Chooser,
) -> Result<StepOutcome> {
    let (accept_prob, relaxed) = match *rule {
        AcceptanceRule::Exact => (exact_accept_prob(p, q, draft)?, None),
        AcceptanceRule::PooledRatio { k, delta } => {
            let codebook = codebook.ok_or_else(|| Error::Config("pooled rule needs a codebook".into()))?;
            let hood = build_bounded_neighborhood(p, draft, codebook, k, delta)?;
            (pooled_ratio_accept_prob(q, draft, &hood)?, Some(hood.relaxed(p)?))
        }
        AcceptanceRule::PooledThreshold { .. } => {
            return Err(Error::Config("threshold rule has no speculative step".into()))
        }
    };
    if chooser.bernoulli(accept_prob) {
        return Ok(StepOutcome {
            accept_prob,
            accepted: true,
            token: draft,
        });
    }
    let token = match residual {
        ResidualKind::Adjusted => {
            let base = relaxed.as_ref().unwrap_or(p);
            let res = residual_distribution(base, q).map_err(|e| match e {
                Error::DegenerateResidual => {
                    Error::Contract("rejection drawn where the residual is degenerate".into())
                }
                other => other,
            })?;
            chooser.categorical(&res)?
        }
        ResidualKind::TargetOnly => chooser.categorical(p)?,
    };
    Ok(StepOutcome {
        accept_prob,
        accepted: false,
        token,
    })
}

/// Samples every position sequentially from the target.
pub fn decode_baseline(
    target: &dyn ArModel,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    check_conditioning(target, config.conditioning)?;
    let n = target.grid_shape().len();
    let mut tokens = Vec::with_capacity(n);
    let mut counters = Counters::default();
    for t in 0..n {
        let p = target.evaluate(config.conditioning, &tokens, t)?;
        counters.target_seq_nfe += 1;
        tokens.push(chooser.categorical(&p)?);
    }
    let grid = grid_from(target, tokens)?;
    let trace = DecodeTrace::finish(config.clone(), Vec::new(), counters, &grid);
    Ok((grid, trace))
}

/// Exact speculative decoding with a same-resolution drafter.
pub fn decode_specdec(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    if config.decoder != DecoderKind::SpecDec || config.rule != AcceptanceRule::Exact {
        return Err(Error::Config("speculative decoding needs the exact acceptance rule".into()));
    }
    token_level_loop(models, config, chooser)
}

/// Speculative decoding with pooled acceptance over latent neighborhoods.
pub fn decode_lantern(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    if config.decoder != DecoderKind::Lantern
        || !matches!(config.rule, AcceptanceRule::PooledRatio { .. })
    {
        return Err(Error::Config("pooled decoding needs a pooled-ratio acceptance rule".into()));
    }
    models.codebook()?;
    token_level_loop(models, config, chooser)
}

fn token_level_loop(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    let target = models.target;
    let drafter = models.drafter()?;
    if config.ratio != 1 {
        return Err(Error::Config(format!(
            "{} runs the drafter at target resolution (ratio 1), got ratio {}",
            config.decoder, config.ratio
        )));
    }
    if drafter.grid_shape() != target.grid_shape() {
        return Err(Error::Config(format!(
            "drafter shape {} differs from target shape {}",
            drafter.grid_shape(),
            target.grid_shape()
        )));
    }
    if config.draft_len == 0 {
        return Err(Error::Config("draft_len must be >= 1".into()));
    }
    check_same_vocab(target, drafter)?;
    check_conditioning(target, config.conditioning)?;
    config.rule.validate(target.vocab_size())?;
    if let Some(cb) = models.codebook {
        if cb.vocab_size() != target.vocab_size() {
            return Err(Error::Config("codebook vocabulary differs from the models".into()));
        }
    }

    let cond = config.conditioning;
    let total = target.grid_shape().len();
    let mut tokens: Vec<VocabId> = Vec::with_capacity(total);
    let mut counters = Counters::default();
    let mut iterations = Vec::new();

    while tokens.len() < total {
        let start = tokens.len();
        let len = config.draft_len.min(total - start);
        let mut record = IterationRecord {
            window_start: start,
            ..Default::default()
        };

        let mut draft_dists = Vec::with_capacity(len);
        for t in start..start + len {
            let q = drafter.evaluate(cond, &tokens, t)?;
            counters.draft_seq_nfe += 1;
            let x = chooser.categorical(&q)?;
            tokens.push(x);
            record.drafted.push(t);
            record.draft_tokens.push(x);
            draft_dists.push(q);
        }

        // One batched target call scores every drafted position.
        counters.target_parallel_calls += 1;
        let target_dists = (start..start + len)
            .map(|t| target.evaluate(cond, &tokens, t))
            .collect::<Result<Vec<_>>>()?;

        let mut finalized = len;
        for (i, (p, q)) in target_dists.iter().zip(&draft_dists).enumerate() {
            let t = start + i;
            let draft = tokens[t];
            let step = speculative_step(p, q, draft, &config.rule, models.codebook, config.residual, chooser)?;
            record.scores.push(step.accept_prob);
            record.accepted.push(step.accepted);
            if !step.accepted {
                tokens[t] = step.token;
                tokens.truncate(t + 1);
                record.rejected.push(t);
                record.expanded = (t..start + len).collect();
                record.resampled.push((t, step.token));
                finalized = i + 1;
                break;
            }
        }
        record.window_len = finalized;
        iterations.push(record);
    }

    let grid = grid_from(target, tokens)?;
    let trace = DecodeTrace::finish(config.clone(), iterations, counters, &grid);
    Ok((grid, trace))
}
