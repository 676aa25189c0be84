use std::fmt::Write as _;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::grid::VocabId;
use crate::models::{Downsampler, Upsampler};
use crate::rng::RandomSource;

/// Template-based resampler pair. Each low-resolution token expands to a
/// fixed `r x r` block; a high-resolution block maps back to the token whose
/// template is closest in summed squared codebook distance (ties to the
/// lowest id).
///
/// The top-left cell of the template for `y` is `y` itself, so templates are
/// pairwise distinct and `down(up(y)) == y` whenever codebook rows are distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBlockSampler {
    factor: usize,
    seed: u64,
    codebook: Codebook,
    templates: Vec<Vec<VocabId>>,
}

/// Number of codebook neighbors the non-anchor template cells draw from.
const TEMPLATE_NEIGHBORS: usize = 4;

impl ToyBlockSampler {
    pub fn build(codebook: Codebook, factor: usize, seed: u64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Parameter("resampling factor must be >= 1".into()));
        }
        let v = codebook.vocab_size();
        let k = TEMPLATE_NEIGHBORS.min(v);
        let mut rng = RandomSource::new(seed);
        let mut templates = Vec::with_capacity(v);
        for y in (0..v).map(VocabId) {
            let near = codebook.nearest_neighbors(y, k)?;
            let mut block = Vec::with_capacity(factor * factor);
            block.push(y);
            for _ in 1..factor * factor {
                let pick = ((rng.uniform() * k as f64) as usize).min(k - 1);
                block.push(near[pick]);
            }
            templates.push(block);
        }
        Self::from_parts(codebook, factor, seed, templates)
    }

    pub fn from_parts(
        codebook: Codebook,
        factor: usize,
        seed: u64,
        templates: Vec<Vec<VocabId>>,
    ) -> Result<Self> {
        let v = codebook.vocab_size();
        if templates.len() != v {
            return Err(Error::Parameter(format!(
                "{} templates for a vocabulary of {v}",
                templates.len()
            )));
        }
        for (id, t) in templates.iter().enumerate() {
            if t.len() != factor * factor || t.iter().any(|c| c.0 >= v) {
                return Err(Error::Parameter(format!("template {id} is malformed")));
            }
        }
        Ok(Self {
            factor,
            seed,
            codebook,
            templates,
        })
    }

    pub fn template(&self, id: VocabId) -> &[VocabId] {
        &self.templates[id.0]
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn vocab_size(&self) -> usize {
        self.templates.len()
    }

    /// Closest template to a block given in row-major `r x r` order.
    pub fn nearest_template(&self, block: &[VocabId]) -> Result<VocabId> {
        let mut best = (f64::INFINITY, VocabId(0));
        for (id, template) in self.templates.iter().enumerate() {
            let mut d = 0.0;
            for (a, b) in block.iter().zip(template) {
                d += self.codebook.sq_distance(*a, *b)?;
            }
            if d < best.0 {
                best = (d, VocabId(id));
            }
        }
        Ok(best.1)
    }

    /// `block-templates V=<v> r=<r> seed=<s>` followed by `id:t00,t01,...`.
    pub fn templates_to_text(&self) -> String {
        let mut s = format!(
            "block-templates V={} r={} seed={}\n",
            self.vocab_size(),
            self.factor,
            self.seed
        );
        for (id, t) in self.templates.iter().enumerate() {
            let cells: Vec<String> = t.iter().map(|c| c.0.to_string()).collect();
            writeln!(s, "{id}:{}", cells.join(",")).unwrap();
        }
        s
    }

    /// Parses every template section in `text` and attaches `codebook`.
    pub fn all_from_text(text: &str, codebook: &Codebook, origin: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        let mut current: Option<(usize, u64, Vec<Vec<VocabId>>)> = None;
        let finish = |cur: Option<(usize, u64, Vec<Vec<VocabId>>)>, out: &mut Vec<Self>| -> Result<()> {
            if let Some((r, seed, templates)) = cur {
                out.push(
                    Self::from_parts(codebook.clone(), r, seed, templates)
                        .map_err(|e| Error::parse(origin, e.to_string()))?,
                );
            }
            Ok(())
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("block-templates") {
                finish(current.take(), &mut out)?;
                let mut r = None;
                let mut seed = None;
                for field in rest.split_whitespace() {
                    match field.split_once('=') {
                        Some(("r", v)) => r = v.parse().ok(),
                        Some(("seed", v)) => seed = v.parse().ok(),
                        Some(("V", _)) => {}
                        _ => return Err(Error::parse(origin, format!("bad header field {field:?}"))),
                    }
                }
                let (Some(r), Some(seed)) = (r, seed) else {
                    return Err(Error::parse(origin, "template header needs r and seed"));
                };
                current = Some((r, seed, Vec::new()));
                continue;
            }
            let Some((_, _, templates)) = current.as_mut() else {
                return Err(Error::parse(origin, "template row before header"));
            };
            let (id, cells) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, format!("bad template row {line:?}")))?;
            if id.parse::<usize>().ok() != Some(templates.len()) {
                return Err(Error::parse(origin, format!("unexpected template id {id:?}")));
            }
            let cells = cells
                .split(',')
                .map(|c| c.trim().parse::<usize>().map(VocabId))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(origin, format!("bad template cells in {line:?}")))?;
            templates.push(cells);
        }
        finish(current, &mut out)?;
        Ok(out)
    }

    fn check_tokens(&self, tokens: &[VocabId]) -> Result<()> {
        if let Some(t) = tokens.iter().find(|t| t.0 >= self.vocab_size()) {
            return Err(Error::Contract(format!("token {t} outside vocabulary")));
        }
        Ok(())
    }
}

impl Upsampler for ToyBlockSampler {
    fn factor(&self) -> usize {
        self.factor
    }

    fn up_sample(
        &self,
        low_rows: &[VocabId],
        low_width: usize,
        _high_context: &[VocabId],
    ) -> Result<Vec<VocabId>> {
        if low_rows.is_empty() || low_width == 0 {
            return Err(Error::Contract("up-sampling needs at least one low-res row".into()));
        }
        if !low_rows.len().is_multiple_of(low_width) {
            return Err(Error::Contract(format!(
                "{} low-res tokens do not form complete rows of width {low_width}",
                low_rows.len()
            )));
        }
        self.check_tokens(low_rows)?;
        let r = self.factor;
        let high_width = low_width * r;
        let mut out = Vec::with_capacity(low_rows.len() * r * r);
        for row in low_rows.chunks(low_width) {
            for di in 0..r {
                for j in 0..high_width {
                    let (c, dj) = (j / r, j % r);
                    out.push(self.templates[row[c].0][di * r + dj]);
                }
            }
        }
        Ok(out)
    }
}

impl Downsampler for ToyBlockSampler {
    fn factor(&self) -> usize {
        self.factor
    }

    fn down_sample(&self, high_rows: &[VocabId], high_width: usize) -> Result<Vec<VocabId>> {
        let r = self.factor;
        if high_width == 0 || !high_width.is_multiple_of(r) {
            return Err(Error::Contract(format!("width {high_width} not divisible by {r}")));
        }
        if !high_rows.len().is_multiple_of(high_width * r) {
            return Err(Error::Contract(format!(
                "{} high-res tokens are not a whole number of {r}-row groups of width {high_width}",
                high_rows.len()
            )));
        }
        self.check_tokens(high_rows)?;
        let low_width = high_width / r;
        let mut out = Vec::with_capacity(high_rows.len() / (r * r));
        let mut block = Vec::with_capacity(r * r);
        for group in high_rows.chunks(high_width * r) {
            for c in 0..low_width {
                block.clear();
                for di in 0..r {
                    let start = di * high_width + c * r;
                    block.extend_from_slice(&group[start..start + r]);
                }
                out.push(self.nearest_template(&block)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampler(v: usize, r: usize) -> ToyBlockSampler {
        ToyBlockSampler::build(Codebook::random(21, v, 3).unwrap(), r, 5).unwrap()
    }

    #[test]
    fn up_sample_counts_and_layout() {
        let s = sampler(6, 2);
        let low = [VocabId(1), VocabId(4)];
        let high = s.up_sample(&low, 2, &[]).unwrap();
        assert_eq!(high.len(), 8);
        let (a, b) = (s.template(VocabId(1)), s.template(VocabId(4)));
        assert_eq!(high, vec![a[0], a[1], b[0], b[1], a[2], a[3], b[2], b[3]]);
    }

    #[test]
    fn up_sample_rejects_bad_input() {
        let s = sampler(6, 2);
        assert!(matches!(s.up_sample(&[], 2, &[]), Err(Error::Contract(_))));
        assert!(matches!(s.up_sample(&[VocabId(0); 3], 2, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn down_sample_counts() {
        let s = sampler(6, 2);
        assert_eq!(s.down_sample(&[VocabId(0); 8], 4).unwrap().len(), 2);
        assert!(matches!(s.down_sample(&[VocabId(0); 6], 4), Err(Error::Contract(_))));
        assert!(s.down_sample(&[VocabId(0); 6], 3).is_err());
    }

    #[test]
    fn round_trip_is_identity_exhaustive() {
        for (v, r) in [(2, 2), (5, 2), (8, 4), (16, 4), (16, 2), (7, 3)] {
            let s = sampler(v, r);
            let all: Vec<VocabId> = (0..v).map(VocabId).collect();
            let high = s.up_sample(&all, v, &[]).unwrap();
            assert_eq!(s.down_sample(&high, v * r).unwrap(), all, "V={v} r={r}");
        }
    }

    #[test]
    fn perturbed_block_maps_to_brute_force_nearest() {
        let s = sampler(6, 2);
        let cb = s.codebook().clone();
        for y in 0..6 {
            for cell in 0..4 {
                for replacement in 0..6 {
                    let mut block = s.template(VocabId(y)).to_vec();
                    block[cell] = VocabId(replacement);
                    // Independent scan over all templates.
                    let mut best = (f64::INFINITY, 0);
                    for id in 0..6 {
                        let d: f64 = block
                            .iter()
                            .zip(s.template(VocabId(id)))
                            .map(|(a, b)| cb.sq_distance(*a, *b).unwrap())
                            .sum();
                        if d < best.0 {
                            best = (d, id);
                        }
                    }
                    let high = [block[0], block[1], block[2], block[3]];
                    assert_eq!(s.down_sample(&high, 2).unwrap(), vec![VocabId(best.1)]);
                }
            }
        }
    }

    #[test]
    fn up_sample_is_row_causal() {
        let s = sampler(5, 2);
        let mut rng = RandomSource::new(17);
        for _ in 0..50 {
            let low: Vec<VocabId> = (0..9).map(|_| VocabId((rng.uniform() * 5.0) as usize)).collect();
            let base = s.up_sample(&low, 3, &[]).unwrap();
            for b in 0..2 {
                let mut changed = low.clone();
                for t in changed.iter_mut().skip((b + 1) * 3) {
                    *t = VocabId((t.0 + 1) % 5);
                }
                let other = s.up_sample(&changed, 3, &[]).unwrap();
                let keep = (b + 1) * 2 * 6;
                assert_eq!(base[..keep], other[..keep]);
            }
        }
    }

    #[test]
    fn templates_text_round_trip() {
        let cb = Codebook::random(2, 5, 2).unwrap();
        let a = ToyBlockSampler::build(cb.clone(), 2, 3).unwrap();
        let b = ToyBlockSampler::build(cb.clone(), 4, 3).unwrap();
        let text = format!("{}{}", a.templates_to_text(), b.templates_to_text());
        let parsed = ToyBlockSampler::all_from_text(&text, &cb, "mem").unwrap();
        assert_eq!(parsed, vec![a, b]);
    }
}
