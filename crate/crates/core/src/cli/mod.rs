//! Command-line front end: asset generation, single decodes, parameter
//! sweeps and the oracle verification suites.

pub mod assets;
mod bench;
pub mod config;
mod verify;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use assets::Assets;
pub use bench::{run_bench, BenchPoint};
pub use config::Config;
pub use verify::{run_verify, CheckResult, CheckStatus, VerifyReport};

use crate::engine::{decode, DecodeTrace};
use crate::metrics::{consistency_check_effective, summarize, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Lib(#[from] crate::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for I/O and unreadable files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Lib(crate::Error::Io { .. } | crate::Error::Parse { .. }) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenModels,
    Decode,
    Bench,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::GenModels => "gen-models",
            Command::Decode => "decode",
            Command::Bench => "bench",
            Command::Verify => "verify",
        })
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "gen-models" => Ok(Command::GenModels),
            "decode" => Ok(Command::Decode),
            "bench" => Ok(Command::Bench),
            "verify" => Ok(Command::Verify),
            other => Err(CliError::Config(format!("unknown command {other:?}"))),
        }
    }
}

/// One CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: Command,
    pub config: PathBuf,
    /// Output directory. Defaults to the assets directory for `gen-models`
    /// and to the working directory otherwise.
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// False when `verify` found a failing check.
    pub passed: bool,
    pub message: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// A report body together with the effective configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub config: Config,
    #[serde(flatten)]
    pub body: T,
}

/// Decode summary plus the expansion-aware consistency measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeSummary {
    #[serde(flatten)]
    pub summary: RunSummary,
    pub deviation_effective: f64,
    pub resampled_total: usize,
}

pub fn run(spec: &RunSpec) -> Result<Outcome, CliError> {
    let config = Config::load(&spec.config, &spec.overrides)?;
    let out = |default: &Path| spec.out.clone().unwrap_or_else(|| default.to_path_buf());
    match spec.command {
        Command::GenModels => gen_models(&config, &out(&config.assets.dir)),
        Command::Decode => cmd_decode(&config, &out(Path::new("."))),
        Command::Bench => cmd_bench(&config, &out(Path::new("."))),
        Command::Verify => cmd_verify(&config, &out(Path::new("."))),
    }
}

pub fn gen_models(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let written = Assets::generate(config)?.save(out)?;
    Ok(Outcome {
        message: format!("wrote {} asset files to {}", written.len(), out.display()),
        written,
        passed: true,
    })
}

pub fn decode_once(config: &Config, assets: &Assets) -> Result<(DecodeTrace, DecodeSummary), CliError> {
    let ratio = config.decode.drafter_ratio();
    let drafter = assets.drafter(ratio, config)?;
    let models = assets.models(&drafter, ratio);
    let cfg = config
        .decode
        .to_decode_config(config.model.vocab_size, config.model.conditioning());
    let (_, trace) = decode(&models, &cfg)?;
    let summary = summarize(&trace, &config.cost)?;
    let body = DecodeSummary {
        deviation_effective: consistency_check_effective(&summary)?,
        resampled_total: trace.expanded_total(),
        summary,
    };
    Ok((trace, body))
}

fn cmd_decode(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let assets = Assets::load(&config.assets.dir)?;
    check_assets_match(config, &assets)?;
    let (trace, body) = decode_once(config, &assets)?;
    let message = format!(
        "{}: acceptance {:.4}, measured speedup {:.4}, theoretical {:.4}",
        body.summary.decoder, body.summary.acceptance_rate, body.summary.measured_speedup, body.summary.theoretical_speedup
    );
    let trace_path = out.join("trace.json");
    let summary_path = out.join("summary.json");
    write_json(
        &trace_path,
        &Report {
            config: config.clone(),
            body: TraceBody { trace },
        },
    )?;
    write_json(
        &summary_path,
        &Report {
            config: config.clone(),
            body,
        },
    )?;
    Ok(Outcome {
        written: vec![trace_path, summary_path],
        passed: true,
        message,
    })
}

#[derive(Serialize)]
struct TraceBody {
    trace: DecodeTrace,
}

fn cmd_bench(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let assets = Assets::load(&config.assets.dir)?;
    check_assets_match(config, &assets)?;
    let points = run_bench(config, &assets)?;
    let rows: Vec<_> = points.iter().map(|p| p.row.clone()).collect();
    let csv_path = out.join("bench.csv");
    ensure_dir(out)?;
    std::fs::write(&csv_path, crate::metrics::sweep_csv(&rows)).map_err(|e| CliError::io(&csv_path, e))?;
    let json_path = out.join("bench.json");
    write_json(
        &json_path,
        &Report {
            config: config.clone(),
            body: BenchBody { points },
        },
    )?;
    Ok(Outcome {
        message: format!("{} operating points on axis {}", rows.len(), config.bench.axis),
        written: vec![csv_path, json_path],
        passed: true,
    })
}

#[derive(Serialize)]
struct BenchBody {
    points: Vec<BenchPoint>,
}

fn cmd_verify(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let report = run_verify(config)?;
    let passed = report.passed();
    let message = report
        .checks
        .iter()
        .map(|c| format!("{:<28} {:?}", c.name, c.status))
        .collect::<Vec<_>>()
        .join("\n");
    let path = out.join("verify.json");
    write_json(
        &path,
        &Report {
            config: config.clone(),
            body: report,
        },
    )?;
    Ok(Outcome {
        written: vec![path],
        passed,
        message,
    })
}

fn check_assets_match(config: &Config, assets: &Assets) -> Result<(), CliError> {
    use crate::models::ArModel;
    let m = &config.model;
    let shape = assets.target.grid_shape();
    if assets.target.vocab_size() != m.vocab_size || shape.height != m.height || shape.width != m.width {
        return Err(CliError::Config(format!(
            "assets hold a V={} {shape} target but the config asks for V={} {}x{}",
            assets.target.vocab_size(),
            m.vocab_size,
            m.height,
            m.width
        )));
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::io("/nowhere", io).exit_code(), 3);
        assert_eq!(CliError::Lib(crate::Error::Parameter("k".into())).exit_code(), 2);
        assert_eq!(CliError::Lib(crate::Error::parse("f", "m")).exit_code(), 3);
    }

    #[test]
    fn command_names_round_trip() {
        for c in [Command::GenModels, Command::Decode, Command::Bench, Command::Verify] {
            assert_eq!(c.to_string().parse::<Command>().unwrap(), c);
        }
        assert!("train".parse::<Command>().is_err());
    }

    #[test]
    fn run_spec_round_trips() {
        let spec = RunSpec {
            command: Command::Bench,
            config: PathBuf::from("cfg.toml"),
            out: Some(PathBuf::from("out")),
            overrides: vec!["bench.axis=mode".into()],
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<RunSpec>(&json).unwrap(), spec);
    }
}
