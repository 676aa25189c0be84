use std::fmt::Write as _;
use std::path::Path;

use crate::categorical::Categorical;
use crate::error::{Error, Result};
use crate::grid::{GridShape, VocabId};
use crate::models::{ArModel, Conditioning};
use crate::rng::RandomSource;

/// Markov model over the grid whose context is the left neighbor, the
/// neighbor above and the conditioning token. Missing neighbors at the
/// top row and left column use the sentinel id `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMarkovModel {
    vocab_size: usize,
    shape: GridShape,
    temperature: f64,
    seed: u64,
    table: Vec<Categorical>,
}

impl ToyMarkovModel {
    /// Builds a model with pseudo-random rows. Each row is a softmax over
    /// logits `rank + 0.9 * jitter` where `rank` is a random permutation of
    /// `0..V`; adjacent logits are at least 0.1 apart, so rows become one-hot
    /// as the temperature goes to zero.
    pub fn build(seed: u64, vocab_size: usize, shape: GridShape, temperature: f64) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::Parameter(format!("vocabulary size {vocab_size} < 2")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Parameter(format!("temperature {temperature} must be positive")));
        }
        let mut rng = RandomSource::new(seed);
        let rows = Self::row_count(vocab_size);
        let mut table = Vec::with_capacity(rows);
        for _ in 0..rows {
            let keys: Vec<f64> = (0..vocab_size).map(|_| rng.uniform()).collect();
            let mut order: Vec<usize> = (0..vocab_size).collect();
            order.sort_by(|a, b| keys[*a].total_cmp(&keys[*b]));
            let mut logits = vec![0.0; vocab_size];
            for (rank, id) in order.into_iter().enumerate() {
                logits[id] = (rank as f64 + 0.9 * rng.uniform()) / temperature;
            }
            table.push(softmax(&logits)?);
        }
        Ok(Self {
            vocab_size,
            shape,
            temperature,
            seed,
            table,
        })
    }

    /// `(V + 1)^2 * V` contexts: left and above include the sentinel.
    pub fn row_count(vocab_size: usize) -> usize {
        (vocab_size + 1) * (vocab_size + 1) * vocab_size
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &[Categorical] {
        &self.table
    }

    /// Sentinel id used for missing neighbors.
    pub fn sentinel(&self) -> usize {
        self.vocab_size
    }

    fn row_index(&self, left: usize, above: usize, cond: usize) -> usize {
        (left * (self.vocab_size + 1) + above) * self.vocab_size + cond
    }

    /// Row for an explicit context; `left`/`above` may be the sentinel.
    pub fn row(&self, left: usize, above: usize, cond: VocabId) -> Result<&Categorical> {
        let v = self.vocab_size;
        if left > v || above > v || cond.0 >= v {
            return Err(Error::Index(format!(
                "context ({left}, {above}, {cond}) outside table for V = {v}"
            )));
        }
        Ok(&self.table[self.row_index(left, above, cond.0)])
    }

    /// Context key `(left, above)` for `position` given a raster prefix.
    pub fn context(&self, prefix: &[VocabId], position: usize) -> Result<(usize, usize)> {
        let (i, j) = self.shape.raster_to_coord(position)?;
        if prefix.len() < position {
            return Err(Error::Contract(format!(
                "prefix of length {} cannot condition position {position}",
                prefix.len()
            )));
        }
        let left = if j > 0 { prefix[position - 1].0 } else { self.sentinel() };
        let above = if i > 0 { prefix[position - self.shape.width].0 } else { self.sentinel() };
        Ok((left, above))
    }

    pub fn to_text(&self) -> String {
        let v = self.vocab_size;
        let mut s = format!(
            "toy-markov V={v} H={} W={} temperature={} seed={}\n",
            self.shape.height, self.shape.width, self.temperature, self.seed
        );
        for left in 0..=v {
            for above in 0..=v {
                for cond in 0..v {
                    write!(s, "{left},{above},{cond}:").unwrap();
                    let row = &self.table[self.row_index(left, above, cond)];
                    for (i, m) in row.masses().iter().enumerate() {
                        if i > 0 {
                            s.push(',');
                        }
                        write!(s, "{m}").unwrap();
                    }
                    s.push('\n');
                }
            }
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse(origin, "empty model file"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("toy-markov") {
            return Err(Error::parse(origin, "missing toy-markov header"));
        }
        let mut get = |key: &str| -> Result<String> {
            fields
                .next()
                .and_then(|f| f.strip_prefix(key))
                .and_then(|f| f.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::parse(origin, format!("header is missing {key}")))
        };
        let bad = |key: &str| Error::parse(origin, format!("bad header value for {key}"));
        let v: usize = get("V")?.parse().map_err(|_| bad("V"))?;
        let h: usize = get("H")?.parse().map_err(|_| bad("H"))?;
        let w: usize = get("W")?.parse().map_err(|_| bad("W"))?;
        let temperature: f64 = get("temperature")?.parse().map_err(|_| bad("temperature"))?;
        let seed: u64 = get("seed")?.parse().map_err(|_| bad("seed"))?;
        let shape = GridShape::new(h, w).map_err(|e| Error::parse(origin, e.to_string()))?;
        if v < 2 {
            return Err(bad("V"));
        }

        let mut table: Vec<Option<Categorical>> = vec![None; Self::row_count(v)];
        for line in lines {
            let (key, values) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, format!("row without ':' {line:?}")))?;
            let key: Vec<usize> = key
                .split(',')
                .map(|k| k.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, format!("bad context {key:?}")))?;
            let [left, above, cond] = key[..] else {
                return Err(Error::parse(origin, format!("context {key:?} needs 3 fields")));
            };
            if left > v || above > v || cond >= v {
                return Err(Error::parse(origin, format!("context {key:?} out of range")));
            }
            let mass: Vec<f64> = values
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, format!("bad masses in row {key:?}")))?;
            if mass.len() != v {
                return Err(Error::parse(origin, format!("row {key:?} has {} masses", mass.len())));
            }
            let row = Categorical::new(mass).map_err(|e| Error::parse(origin, e.to_string()))?;
            table[(left * (v + 1) + above) * v + cond] = Some(row);
        }
        let table = table
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::parse(origin, "table is missing context rows"))?;
        Ok(Self {
            vocab_size: v,
            shape,
            temperature,
            seed,
            table,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl ArModel for ToyMarkovModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn grid_shape(&self) -> GridShape {
        self.shape
    }

    fn evaluate(&self, cond: Conditioning, prefix: &[VocabId], position: usize) -> Result<Categorical> {
        let (left, above) = self.context(prefix, position)?;
        self.row(left, above, cond.seed_token).cloned()
    }
}

/// Low-resolution drafter sharing the target's context table, mixed with
/// uniform noise: `q = (1 - noise) * p + noise / V`.
pub fn derive_drafter(
    target: &ToyMarkovModel,
    r: usize,
    noise: f64,
    drafter_seed: u64,
) -> Result<ToyMarkovModel> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Parameter(format!("noise {noise} outside [0, 1]")));
    }
    let shape = target.shape.downscaled(r)?;
    let uniform = 1.0 / target.vocab_size as f64;
    let table = target
        .table
        .iter()
        .map(|row| {
            Categorical::new(
                row.masses()
                    .iter()
                    .map(|p| (1.0 - noise) * p + noise * uniform)
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ToyMarkovModel {
        vocab_size: target.vocab_size,
        shape,
        temperature: target.temperature,
        seed: drafter_seed,
        table,
    })
}

fn softmax(logits: &[f64]) -> Result<Categorical> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Categorical::from_weights(logits.iter().map(|l| (l - max).exp()).collect())
}
