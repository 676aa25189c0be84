//! Exact output laws by exhaustive enumeration.
//!
//! [`target_law`] multiplies target conditionals over every complete grid,
//! independently of any decoder. [`decoder_law`] runs a decoder under a
//! replaying [`Chooser`] that walks every branch of every random decision
//! (draft samples, accept coins, residual draws, resamples) depth-first and
//! weights each leaf by the product of its branch probabilities.

use std::collections::BTreeMap;

use crate::categorical::Categorical;
use crate::engine::{decode_with, speculative_step, DecodeConfig, DecodeModels, DecoderKind};
use crate::error::{Error, Result};
use crate::grid::VocabId;
use crate::models::{ArModel, Conditioning};
use crate::rng::Chooser;

/// Maximum number of grids or weighted branches an enumeration may visit.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Probability of each complete grid, keyed by its raster token ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridDistribution {
    probs: BTreeMap<Vec<usize>, f64>,
}

impl GridDistribution {
    pub fn from_map(probs: BTreeMap<Vec<usize>, f64>) -> Self {
        Self { probs }
    }

    pub fn prob(&self, grid: &[usize]) -> f64 {
        self.probs.get(grid).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn support_len(&self) -> usize {
        self.probs.values().filter(|p| **p > 0.0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &f64)> {
        self.probs.iter()
    }

    /// Largest absolute difference over the union of both supports.
    pub fn max_abs_deviation(&self, other: &GridDistribution) -> f64 {
        let mut worst: f64 = 0.0;
        for (g, p) in &self.probs {
            worst = worst.max((p - other.prob(g)).abs());
        }
        for (g, p) in &other.probs {
            if !self.probs.contains_key(g) {
                worst = worst.max(p.abs());
            }
        }
        worst
    }

    /// Total variation distance over the union of supports.
    pub fn tvd(&self, other: &GridDistribution) -> f64 {
        let mut l1 = 0.0;
        for (g, p) in &self.probs {
            l1 += (p - other.prob(g)).abs();
        }
        for (g, p) in &other.probs {
            if !self.probs.contains_key(g) {
                l1 += p.abs();
            }
        }
        0.5 * l1
    }
}

fn check_enumerable(vocab_size: usize, cells: usize) -> Result<()> {
    let mut size: usize = 1;
    for _ in 0..cells {
        size = size.saturating_mul(vocab_size);
        if size > ENUMERATION_LIMIT {
            return Err(Error::EnumerationLimit(format!(
                "V^N = {vocab_size}^{cells} exceeds {ENUMERATION_LIMIT}"
            )));
        }
    }
    Ok(())
}

/// Chain-rule law of the target over complete grids.
pub fn target_law(model: &dyn ArModel, cond: Conditioning) -> Result<GridDistribution> {
    let n = model.grid_shape().len();
    check_enumerable(model.vocab_size(), n)?;
    let mut probs = BTreeMap::new();
    let mut prefix = Vec::with_capacity(n);
    chain(model, cond, n, &mut prefix, 1.0, &mut probs)?;
    Ok(GridDistribution { probs })
}

fn chain(
    model: &dyn ArModel,
    cond: Conditioning,
    n: usize,
    prefix: &mut Vec<VocabId>,
    weight: f64,
    out: &mut BTreeMap<Vec<usize>, f64>,
) -> Result<()> {
    if prefix.len() == n {
        out.insert(prefix.iter().map(|t| t.0).collect(), weight);
        return Ok(());
    }
    let p = model.evaluate(cond, prefix, prefix.len())?;
    for (id, m) in p.masses().iter().enumerate() {
        prefix.push(VocabId(id));
        chain(model, cond, n, prefix, weight * m, out)?;
        prefix.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    Id(VocabId),
    Coin(bool),
}

struct Decision {
    options: Vec<(Branch, f64)>,
    next: usize,
}

/// Replays a recorded path of decisions, then extends it with first branches.
struct ReplayChooser<'a> {
    path: &'a mut Vec<Decision>,
    depth: usize,
    weight: f64,
    diverged: bool,
}

impl ReplayChooser<'_> {
    fn choose(&mut self, options: impl FnOnce() -> Vec<(Branch, f64)>) -> Branch {
        if self.depth == self.path.len() {
            self.path.push(Decision {
                options: options(),
                next: 0,
            });
        }
        let decision = &self.path[self.depth];
        let (branch, p) = decision.options[decision.next];
        self.depth += 1;
        self.weight *= p;
        branch
    }
}

impl Chooser for ReplayChooser<'_> {
    fn categorical(&mut self, dist: &Categorical) -> Result<VocabId> {
        if self.diverged {
            return Err(Error::Contract("decoder is not replay-deterministic".into()));
        }
        if dist.support().next().is_none() {
            return Err(Error::Contract("sampling from an all-zero distribution".into()));
        }
        match self.choose(|| dist.support().map(|(id, m)| (Branch::Id(id), m)).collect()) {
            Branch::Id(id) => Ok(id),
            Branch::Coin(_) => Err(Error::Contract("decoder is not replay-deterministic".into())),
        }
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        if self.diverged {
            return false;
        }
        let p = p.clamp(0.0, 1.0);
        let branch = self.choose(|| {
            let mut options = Vec::with_capacity(2);
            if p > 0.0 {
                options.push((Branch::Coin(true), p));
            }
            if p < 1.0 {
                options.push((Branch::Coin(false), 1.0 - p));
            }
            options
        });
        match branch {
            Branch::Coin(c) => c,
            // A categorical recorded where a coin is replayed: the run diverged.
            Branch::Id(_) => {
                self.diverged = true;
                false
            }
        }
    }
}

/// Exact law of `run`'s outcome over every branch of its random decisions.
/// `run` must be a deterministic function of the choices it is given.
pub fn enumerate_outcomes<T: Ord>(
    mut run: impl FnMut(&mut dyn Chooser) -> Result<T>,
) -> Result<BTreeMap<T, f64>> {
    let mut path: Vec<Decision> = Vec::new();
    let mut out = BTreeMap::new();
    let mut leaves = 0usize;
    loop {
        let (outcome, weight, depth, diverged) = {
            let mut chooser = ReplayChooser {
                path: &mut path,
                depth: 0,
                weight: 1.0,
                diverged: false,
            };
            let outcome = run(&mut chooser)?;
            (outcome, chooser.weight, chooser.depth, chooser.diverged)
        };
        if diverged || depth != path.len() {
            return Err(Error::Contract("decoder is not replay-deterministic".into()));
        }
        *out.entry(outcome).or_insert(0.0) += weight;
        leaves += 1;
        if leaves > ENUMERATION_LIMIT {
            return Err(Error::EnumerationLimit(format!(
                "more than {ENUMERATION_LIMIT} weighted branches"
            )));
        }
        loop {
            match path.last_mut() {
                None => return Ok(out),
                Some(d) if d.next + 1 < d.options.len() => {
                    d.next += 1;
                    break;
                }
                Some(_) => {
                    path.pop();
                }
            }
        }
    }
}

/// Exact output law of a decoder over complete grids.
pub fn decoder_law(models: &DecodeModels<'_>, config: &DecodeConfig) -> Result<GridDistribution> {
    let target = models.target;
    check_enumerable(target.vocab_size(), target.grid_shape().len())?;
    let probs = enumerate_outcomes(|chooser| {
        let (grid, _) = decode_with(models, config, chooser)?;
        Ok(grid.tokens().iter().map(|t| t.0).collect::<Vec<_>>())
    })?;
    Ok(GridDistribution { probs })
}

/// Law of the token a token-level decoder emits at `position` given `prefix`.
pub fn per_step_law(
    models: &DecodeModels<'_>,
    config: &DecodeConfig,
    prefix: &[VocabId],
    position: usize,
) -> Result<Categorical> {
    let target = models.target;
    let cond = config.conditioning;
    let p = target.evaluate(cond, prefix, position)?;
    match config.decoder {
        DecoderKind::Baseline => Ok(p),
        DecoderKind::SpecDec | DecoderKind::Lantern => {
            let q = models.drafter()?.evaluate(cond, prefix, position)?;
            let law = enumerate_outcomes(|chooser| {
                let draft = chooser.categorical(&q)?;
                let step = speculative_step(&p, &q, draft, &config.rule, models.codebook, config.residual, chooser)?;
                Ok(step.token)
            })?;
            let mut mass = vec![0.0; target.vocab_size()];
            for (id, w) in law {
                mass[id.0] += w;
            }
            Categorical::new(mass)
        }
        DecoderKind::MuLoSd => Err(Error::Config(
            "per-step laws are defined for token-level decoders only".into(),
        )),
    }
}
