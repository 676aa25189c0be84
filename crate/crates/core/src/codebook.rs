//! Per-token latent vectors and exact k-nearest-neighbor queries.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::VocabId;
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Parameter("codebook needs at least one row of dim >= 1".into()));
        }
        for (id, row) in vectors.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Parameter(format!(
                    "codebook row {id} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!("codebook row {id} is not finite")));
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Random codebook with entries uniform in `[-1, 1)`.
    pub fn random(seed: u64, vocab_size: usize, dim: usize) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::Parameter("codebook needs V >= 1 and dim >= 1".into()));
        }
        let mut rng = RandomSource::new(seed);
        let vectors = (0..vocab_size)
            .map(|_| (0..dim).map(|_| rng.uniform() * 2.0 - 1.0).collect())
            .collect();
        Self::new(vectors)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, id: VocabId) -> Result<&[f64]> {
        self.vectors
            .get(id.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Index(format!("{id} outside codebook of size {}", self.vocab_size())))
    }

    /// Squared Euclidean distance between two codebook rows.
    pub fn sq_distance(&self, a: VocabId, b: VocabId) -> Result<f64> {
        let (va, vb) = (self.vector(a)?, self.vector(b)?);
        Ok(va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum())
    }

    /// The `k` ids closest to `center`, ascending by squared distance with
    /// ties broken by ascending id. `center` always comes first.
    pub fn nearest_neighbors(&self, center: VocabId, k: usize) -> Result<Vec<VocabId>> {
        let v = self.vocab_size();
        if k == 0 || k > v {
            return Err(Error::Parameter(format!("k = {k} outside [1, {v}]")));
        }
        self.vector(center)?;
        let mut others = Vec::with_capacity(v - 1);
        for id in (0..v).map(VocabId).filter(|id| *id != center) {
            others.push((self.sq_distance(center, id)?, id));
        }
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::with_capacity(k);
        out.push(center);
        out.extend(others.into_iter().take(k - 1).map(|(_, id)| id));
        Ok(out)
    }

    /// CSV text: header `id,dim=<d>` then `id,v0,...,v{d-1}` per row.
    pub fn to_csv(&self) -> String {
        let mut s = format!("id,dim={}\n", self.dim);
        for (id, row) in self.vectors.iter().enumerate() {
            write!(s, "{id}").unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse(origin, "empty codebook file"))?;
        let dim: usize = header
            .trim()
            .strip_prefix("id,dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::parse(origin, format!("bad header {header:?}")))?;
        let mut vectors = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut fields = line.trim().split(',');
            let id: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(origin, format!("row {lineno}: bad id")))?;
            if id != vectors.len() {
                return Err(Error::parse(
                    origin,
                    format!("row {lineno}: expected id {}, found {id}", vectors.len()),
                ));
            }
            let row = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(origin, format!("row {lineno}: {e}")))?;
            if row.len() != dim {
                return Err(Error::parse(
                    origin,
                    format!("row {lineno}: {} values, header says dim={dim}", row.len()),
                ));
            }
            vectors.push(row);
        }
        Self::new(vectors).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
