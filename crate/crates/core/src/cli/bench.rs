use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{decode, DecoderKind};
use crate::locality::RejectionMode;
use crate::metrics::{summarize, SweepRow};
use crate::models::{derive_drafter, ToyMarkovModel};

use super::assets::Assets;
use super::config::Config;
use super::CliError;

/// Default tau grid: one point per decade plus 5e-5.
pub const DEFAULT_TAUS: [&str; 6] = ["1e-5", "5e-5", "1e-4", "1e-3", "1e-2", "1e-1"];
pub const DEFAULT_NOISES: [&str; 6] = ["0", "0.1", "0.3", "0.5", "0.7", "1"];
pub const DEFAULT_RADII: [&str; 3] = ["1", "3", "5"];
pub const DEFAULT_MODES: [&str; 3] = ["raster", "naive", "expand:3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    #[serde(flatten)]
    pub row: SweepRow,
    /// Mean number of target-resampled positions per run.
    pub mean_resampled: f64,
}

struct Point {
    value: String,
    config: Config,
    drafter: ToyMarkovModel,
}

/// Runs the seed ensemble at every operating point of the configured axis.
/// Rows come back in axis order whatever the completion order.
pub fn run_bench(config: &Config, assets: &Assets) -> Result<Vec<BenchPoint>, CliError> {
    let bench = &config.bench;
    if bench.seeds == 0 {
        return Err(CliError::Config("bench.seeds must be >= 1".into()));
    }
    let points = build_points(config, assets)?;
    let seeds: Vec<u64> = (bench.first_seed..bench.first_seed + bench.seeds).collect();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let p = &points[i];
            let ratio = p.config.decode.drafter_ratio();
            let models = assets.models(&p.drafter, ratio);
            let mut cfg = p
                .config
                .decode
                .to_decode_config(p.config.model.vocab_size, p.config.model.conditioning());
            cfg.seed = seed;
            let (_, trace) = decode(&models, &cfg)?;
            Ok((summarize(&trace, &p.config.cost)?, trace.expanded_total()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let per_point = seeds.len();
    points
        .iter()
        .zip(results.chunks(per_point))
        .map(|(p, runs)| {
            let summaries: Vec<_> = runs.iter().map(|(s, _)| s.clone()).collect();
            let resampled = runs.iter().map(|(_, r)| *r as f64).sum::<f64>() / per_point as f64;
            Ok(BenchPoint {
                row: SweepRow::from_summaries(&bench.axis, p.value.clone(), &summaries)?,
                mean_resampled: resampled,
            })
        })
        .collect()
}

fn build_points(config: &Config, assets: &Assets) -> Result<Vec<Point>, CliError> {
    let axis = config.bench.axis.as_str();
    let decoder = config.decode.decoder;
    let needs = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!("axis {axis} needs {what}, decoder is {decoder}")))
        }
    };
    let defaults: Vec<String> = match axis {
        "tau" => DEFAULT_TAUS.iter().map(|s| s.to_string()).collect(),
        "noise" => DEFAULT_NOISES.iter().map(|s| s.to_string()).collect(),
        "radius" => DEFAULT_RADII.iter().map(|s| s.to_string()).collect(),
        "mode" => DEFAULT_MODES.iter().map(|s| s.to_string()).collect(),
        "pooling_k" => vec!["1".into(), config.model.vocab_size.to_string()],
        other => {
            return Err(CliError::Config(format!(
                "unknown bench axis {other:?} (tau, noise, radius, mode, pooling_k)"
            )))
        }
    };
    match axis {
        "tau" | "radius" | "mode" => needs(decoder == DecoderKind::MuLoSd, "the mulosd decoder")?,
        "pooling_k" => needs(
            matches!(decoder, DecoderKind::MuLoSd | DecoderKind::Lantern),
            "a pooled decoder",
        )?,
        _ => needs(decoder != DecoderKind::Baseline, "a drafter")?,
    }
    let values = if config.bench.values.is_empty() {
        defaults
    } else {
        config.bench.values.clone()
    };

    let ratio = config.decode.drafter_ratio();
    let base_drafter = assets.drafter(ratio, config)?;
    let bad = |v: &str| CliError::Config(format!("bad {axis} value {v:?}"));
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let mut c = config.clone();
        let mut drafter = base_drafter.clone();
        let key = match axis {
            "tau" => {
                c.decode.tau = value.parse().map_err(|_| bad(&value))?;
                c.decode.tau
            }
            "noise" => {
                c.drafter.noise = value.parse().map_err(|_| bad(&value))?;
                drafter = derive_drafter(&assets.target, ratio, c.drafter.noise, c.drafter.seed)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                c.drafter.noise
            }
            "radius" => {
                let radius = value.parse().map_err(|_| bad(&value))?;
                c.decode.mode = RejectionMode::LocalExpand { radius };
                radius as f64
            }
            "pooling_k" => {
                c.decode.k = value.parse().map_err(|_| bad(&value))?;
                if c.decode.k == 0 {
                    return Err(bad(&value));
                }
                c.decode.k as f64
            }
            _ => {
                c.decode.mode = value.parse().map_err(|_| bad(&value))?;
                points.len() as f64
            }
        };
        if !key.is_finite() {
            return Err(bad(&value));
        }
        points.push((key, Point { value, config: c, drafter }));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(points.into_iter().map(|(_, p)| p).collect())
}
