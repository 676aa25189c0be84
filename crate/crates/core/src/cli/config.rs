use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DecodeConfig, DecoderKind, ResidualKind};
use crate::grid::{GridShape, VocabId};
use crate::locality::RejectionMode;
use crate::metrics::CostModel;
use crate::models::Conditioning;

use super::CliError;

/// Full run configuration. Every section and key has a default, so an empty
/// file is a valid config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub assets: AssetsSection,
    pub model: ModelSection,
    pub drafter: DrafterSection,
    pub codebook: CodebookSection,
    pub sampler: SamplerSection,
    pub decode: DecodeSection,
    pub cost: CostModel,
    pub bench: BenchSection,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetsSection {
    /// Relative paths resolve against the config file's directory.
    pub dir: PathBuf,
}

impl Default for AssetsSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("assets") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub seed: u64,
    pub vocab_size: usize,
    pub height: usize,
    pub width: usize,
    pub temperature: f64,
    /// Conditioning token id.
    pub conditioning: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            seed: 0,
            vocab_size: 16,
            height: 16,
            width: 16,
            temperature: 1.0,
            conditioning: 0,
        }
    }
}

impl ModelSection {
    pub fn shape(&self) -> Result<GridShape, CliError> {
        Ok(GridShape::new(self.height, self.width)?)
    }

    pub fn conditioning(&self) -> Conditioning {
        Conditioning::new(VocabId(self.conditioning))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrafterSection {
    pub noise: f64,
    pub seed: u64,
    /// Resolution ratios for which `gen-models` writes a drafter.
    pub ratios: Vec<usize>,
}

impl Default for DrafterSection {
    fn default() -> Self {
        Self {
            noise: 0.3,
            seed: 1,
            ratios: vec![2, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookSection {
    pub seed: u64,
    pub dim: usize,
}

impl Default for CodebookSection {
    fn default() -> Self {
        Self { seed: 2, dim: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub seed: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { seed: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub decoder: DecoderKind,
    pub ratio: usize,
    pub draft_window_rows: usize,
    /// Draft length of the token-level decoders.
    pub draft_len: usize,
    /// Pooling neighborhood size, clamped to the vocabulary size.
    pub k: usize,
    pub delta: f64,
    pub tau: f64,
    #[serde(with = "display_fromstr")]
    pub mode: RejectionMode,
    pub seed: u64,
    pub residual: ResidualKind,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            decoder: DecoderKind::MuLoSd,
            ratio: 4,
            draft_window_rows: 1,
            draft_len: 4,
            k: 1000,
            delta: 0.1,
            tau: 1e-4,
            mode: RejectionMode::LocalExpand { radius: 3 },
            seed: 0,
            residual: ResidualKind::Adjusted,
        }
    }
}

impl DecodeSection {
    /// Engine config for this section. Token-level decoders always run at ratio 1.
    pub fn to_decode_config(&self, vocab_size: usize, cond: Conditioning) -> DecodeConfig {
        let k = self.k.min(vocab_size);
        let mut cfg = match self.decoder {
            DecoderKind::Baseline => DecodeConfig::baseline(self.seed, cond),
            DecoderKind::SpecDec => DecodeConfig::specdec(self.draft_len, self.seed, cond),
            DecoderKind::Lantern => DecodeConfig::lantern(k, self.delta, self.draft_len, self.seed, cond),
            DecoderKind::MuLoSd => DecodeConfig::mulosd(
                self.ratio,
                k,
                self.delta,
                self.tau,
                self.mode,
                self.draft_window_rows,
                self.seed,
                cond,
            ),
        };
        cfg.residual = self.residual;
        cfg
    }

    /// Drafter resolution ratio implied by the decoder.
    pub fn drafter_ratio(&self) -> usize {
        match self.decoder {
            DecoderKind::MuLoSd => self.ratio,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// One of `tau`, `noise`, `radius`, `mode`, `pooling_k`.
    pub axis: String,
    /// Operating points; empty selects the axis default grid.
    pub values: Vec<String>,
    pub seeds: u64,
    pub first_seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            axis: "tau".into(),
            values: Vec::new(),
            seeds: 200,
            first_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Exactness instances: vocabulary, grid and number of model seeds.
    pub vocab_size: usize,
    pub height: usize,
    pub width: usize,
    pub model_seeds: u64,
    /// Largest speculative window checked.
    pub max_window: usize,
    pub temperature: f64,
    pub noise: f64,
    pub residual: ResidualKind,
    /// Random relaxation tuples for the TVD bound.
    pub tvd_tuples: u64,
    /// Instance for the per-step pooled-acceptance law.
    pub lantern_vocab_size: usize,
    pub lantern_delta: f64,
    /// Largest grid side for the geometry brute force.
    pub geometry_max_side: usize,
    /// Seeds for the decode-level equivalences.
    pub decode_seeds: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            vocab_size: 3,
            height: 2,
            width: 2,
            model_seeds: 20,
            max_window: 2,
            temperature: 1.0,
            noise: 0.3,
            residual: ResidualKind::Adjusted,
            tvd_tuples: 1000,
            lantern_vocab_size: 4,
            lantern_delta: 0.2,
            geometry_max_side: 4,
            decode_seeds: 20,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn from_table(table: toml::Table) -> Result<Self, CliError> {
        Config::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path`, applies `key=value` overrides and resolves relative asset paths.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let mut config = Self::from_table(table)?;
        if config.assets.dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.assets.dir = base.join(&config.assets.dir);
        }
        Ok(config)
    }
}

/// Sets a dotted `section.key=value`. The value is read as a TOML literal,
/// falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let (last, sections) = parts.split_last().expect("non-empty");
    let mut node = table;
    for s in sections {
        let entry = node
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {s} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

mod display_fromstr {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
