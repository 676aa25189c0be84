use crate::acceptance::{build_bounded_neighborhood, threshold_accept, AcceptanceRule};
use crate::engine::{
    check_conditioning, check_same_vocab, grid_from, Counters, DecodeConfig, DecodeModels, DecodeTrace,
    DecoderKind, IterationRecord,
};
use crate::error::{Error, Result};
use crate::grid::{TokenGrid, VocabId};
use crate::locality::{expand_rejections, Window};
use crate::rng::Chooser;

/// Multi-scale local speculative decoding.
///
/// Each iteration drafts `draft_window_rows` complete low-resolution rows,
/// up-samples them to a window of `L` high-resolution tokens, scores the
/// window with one batched target call, accepts by the pooled-mass threshold,
/// expands the rejections according to the rejection mode and resamples the
/// expanded set sequentially from the target.
pub fn decode_mulosd(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    chooser: &mut dyn Chooser,
) -> Result<(TokenGrid, DecodeTrace)> {
    let setup = Setup::validate(models, config)?;
    let Setup {
        k,
        delta,
        tau,
        low_width,
        high_width,
        window_len,
        low_per_window,
    } = setup;
    let target = models.target;
    let drafter = models.drafter()?;
    let up = models.upsampler.expect("validated");
    let down = models.downsampler.expect("validated");
    let codebook = models.codebook()?;
    let shape = target.grid_shape();
    let cond = config.conditioning;
    let total = shape.len();

    let mut canvas: Vec<VocabId> = Vec::with_capacity(total);
    let mut counters = Counters::default();
    let mut iterations = Vec::new();

    while canvas.len() < total {
        let n = canvas.len();
        let mut record = IterationRecord {
            window_start: n,
            window_len,
            ..Default::default()
        };

        // Low-resolution prefix from the finalized tokens.
        let mut low = if n == 0 {
            Vec::new()
        } else {
            counters.downsample_calls += 1;
            down.down_sample(&canvas, high_width)?
        };
        let low_start = low.len();

        // Draft whole low-resolution rows.
        for _ in 0..low_per_window {
            let q = drafter.evaluate(cond, &low, low.len())?;
            counters.draft_seq_nfe += 1;
            low.push(chooser.categorical(&q)?);
        }
        let low_drafts = &low[low_start..];
        record.low_res_drafts = low_drafts.to_vec();

        counters.upsample_calls += 1;
        let high = up.up_sample(low_drafts, low_width, &canvas)?;
        if high.len() != window_len {
            return Err(Error::Contract(format!(
                "up-sampler produced {} tokens for a window of {window_len}",
                high.len()
            )));
        }
        canvas.extend_from_slice(&high);
        record.drafted = (n..n + window_len).collect();
        record.draft_tokens = high;

        // One batched verification call over the whole window.
        counters.target_parallel_calls += 1;
        for t in n..n + window_len {
            let p = target.evaluate(cond, &canvas, t)?;
            let draft = canvas[t];
            let hood = build_bounded_neighborhood(&p, draft, codebook, k, delta)?;
            let accepted = threshold_accept(draft, &hood, tau)?;
            record.scores.push(hood.pooled);
            record.accepted.push(accepted);
            if !accepted {
                record.rejected.push(t);
            }
        }

        if !record.rejected.is_empty() {
            let window = Window {
                start: n,
                len: window_len,
            };
            record.expanded = expand_rejections(&record.rejected, config.mode, shape, window)?;
            // Hybrid prefix: earlier accepted drafts and earlier resamples both condition.
            for &u in &record.expanded {
                let p = target.evaluate(cond, &canvas, u)?;
                counters.target_seq_nfe += 1;
                let x = chooser.categorical(&p)?;
                canvas[u] = x;
                record.resampled.push((u, x));
            }
        }
        iterations.push(record);
    }

    let grid = grid_from(target, canvas)?;
    let trace = DecodeTrace::finish(config.clone(), iterations, counters, &grid);
    Ok((grid, trace))
}

struct Setup {
    k: usize,
    delta: f64,
    tau: f64,
    low_width: usize,
    high_width: usize,
    window_len: usize,
    low_per_window: usize,
}

impl Setup {
    fn validate(models: &DecodeModels<'_>, config: &DecodeConfig) -> Result<Self> {
        if config.decoder != DecoderKind::MuLoSd {
            return Err(Error::Config(format!("{} is not the multi-scale decoder", config.decoder)));
        }
        let AcceptanceRule::PooledThreshold { k, delta, tau } = config.rule else {
            return Err(Error::Config("multi-scale decoding needs a pooled-threshold rule".into()));
        };
        let r = config.ratio;
        if r < 2 {
            return Err(Error::Config(format!("multi-scale decoding needs ratio >= 2, got {r}")));
        }
        if config.draft_window_rows == 0 {
            return Err(Error::Config("draft_window_rows must be >= 1".into()));
        }
        let target = models.target;
        let drafter = models.drafter()?;
        let shape = target.grid_shape();
        let low_shape = shape
            .downscaled(r)
            .map_err(|e| Error::Config(e.to_string()))?;
        if drafter.grid_shape() != low_shape {
            return Err(Error::Config(format!(
                "drafter shape {} does not match target {shape} / {r}",
                drafter.grid_shape()
            )));
        }
        if low_shape.height % config.draft_window_rows != 0 {
            return Err(Error::Config(format!(
                "{} low-res rows cannot be split into windows of {} rows",
                low_shape.height, config.draft_window_rows
            )));
        }
        check_same_vocab(target, drafter)?;
        check_conditioning(target, config.conditioning)?;
        config.rule.validate(target.vocab_size())?;
        let (Some(up), Some(down)) = (models.upsampler, models.downsampler) else {
            return Err(Error::Config("multi-scale decoding needs an up- and a down-sampler".into()));
        };
        if up.factor() != r || down.factor() != r {
            return Err(Error::Config(format!(
                "sampler factors ({}, {}) differ from ratio {r}",
                up.factor(),
                down.factor()
            )));
        }
        if models.codebook()?.vocab_size() != target.vocab_size() {
            return Err(Error::Config("codebook vocabulary differs from the models".into()));
        }
        let low_per_window = config.draft_window_rows * low_shape.width;
        Ok(Self {
            k,
            delta,
            tau,
            low_width: low_shape.width,
            high_width: shape.width,
            window_len: low_per_window * r * r,
            low_per_window,
        })
    }
}
