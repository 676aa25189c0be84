use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::codebook::Codebook;
use crate::engine::DecodeModels;
use crate::models::{derive_drafter, ArModel, ToyBlockSampler, ToyMarkovModel};

use super::config::Config;
use super::CliError;

pub const TARGET_FILE: &str = "target.model";
pub const CODEBOOK_FILE: &str = "codebook.csv";
pub const TEMPLATES_FILE: &str = "templates.txt";

pub fn drafter_file(r: usize) -> String {
    format!("drafter_r{r}.model")
}

/// Toy models, codebook and block samplers for one configuration.
pub struct Assets {
    pub target: ToyMarkovModel,
    /// Keyed by resolution ratio.
    pub drafters: BTreeMap<usize, ToyMarkovModel>,
    pub codebook: Codebook,
    pub samplers: BTreeMap<usize, ToyBlockSampler>,
}

impl Assets {
    pub fn generate(config: &Config) -> Result<Self, CliError> {
        let m = &config.model;
        let target = ToyMarkovModel::build(m.seed, m.vocab_size, m.shape()?, m.temperature)?;
        let codebook = Codebook::random(config.codebook.seed, m.vocab_size, config.codebook.dim)?;
        let mut drafters = BTreeMap::new();
        let mut samplers = BTreeMap::new();
        for &r in &config.drafter.ratios {
            if r < 2 {
                return Err(CliError::Config(format!("drafter ratio {r} must be >= 2")));
            }
            let drafter = derive_drafter(&target, r, config.drafter.noise, config.drafter.seed)
                .map_err(|e| CliError::Config(format!("drafter ratio {r}: {e}")))?;
            drafters.insert(r, drafter);
            samplers.insert(r, ToyBlockSampler::build(codebook.clone(), r, config.sampler.seed)?);
        }
        Ok(Self {
            target,
            drafters,
            codebook,
            samplers,
        })
    }

    /// Writes every asset into `dir`, returning the written paths.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        let path = dir.join(TARGET_FILE);
        self.target.save(&path)?;
        written.push(path);
        for (r, d) in &self.drafters {
            let path = dir.join(drafter_file(*r));
            d.save(&path)?;
            written.push(path);
        }
        let path = dir.join(CODEBOOK_FILE);
        self.codebook.save(&path)?;
        written.push(path);
        let path = dir.join(TEMPLATES_FILE);
        let text: String = self.samplers.values().map(|s| s.templates_to_text()).collect();
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
        Ok(written)
    }

    /// Loads the target, codebook, templates and whichever drafters exist.
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let target = ToyMarkovModel::load(&dir.join(TARGET_FILE))?;
        let codebook = Codebook::load(&dir.join(CODEBOOK_FILE))?;
        let path = dir.join(TEMPLATES_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let samplers = ToyBlockSampler::all_from_text(&text, &codebook, &path.display().to_string())?
            .into_iter()
            .map(|s| (crate::models::Upsampler::factor(&s), s))
            .collect();
        let mut drafters = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let ratio = name
                .strip_prefix("drafter_r")
                .and_then(|s| s.strip_suffix(".model"))
                .and_then(|s| s.parse::<usize>().ok());
            if let Some(r) = ratio {
                drafters.insert(r, ToyMarkovModel::load(&entry.path())?);
            }
        }
        if codebook.vocab_size() != target.vocab_size() {
            return Err(CliError::Config("codebook vocabulary differs from the target".into()));
        }
        Ok(Self {
            target,
            drafters,
            codebook,
            samplers,
        })
    }

    /// Drafter for `ratio`; ratio 1 is derived in memory from the target.
    pub fn drafter(&self, ratio: usize, config: &Config) -> Result<ToyMarkovModel, CliError> {
        if ratio == 1 {
            return Ok(derive_drafter(&self.target, 1, config.drafter.noise, config.drafter.seed)?);
        }
        self.drafters
            .get(&ratio)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("no drafter for ratio {ratio} in the assets")))
    }

    pub fn models<'a>(&'a self, drafter: &'a ToyMarkovModel, ratio: usize) -> DecodeModels<'a> {
        let m = DecodeModels::target_only(&self.target)
            .with_drafter(drafter)
            .with_codebook(&self.codebook);
        match self.samplers.get(&ratio) {
            Some(s) => m.with_samplers(s, s),
            None => m,
        }
    }
}
