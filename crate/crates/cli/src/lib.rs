//! Experiment runner behind the `selfnorm` binary.
//!
//! A run reads a TOML [`ExperimentConfig`], applies command-line overrides,
//! resolves defaults, validates every field, computes, and only then writes
//! CSV tables plus a `summary.json` into the output directory. The summary
//! carries the resolved config, the seed and a timestamp; the tables carry
//! no run-specific metadata, so identical configs give identical CSV bytes.

pub mod config;
pub mod execute;
pub mod plan;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use thiserror::Error;

pub use config::{ExperimentConfig, Overrides, Subcommand};
pub use plan::FieldError;

/// Default output directory when neither the flags nor the config set one.
pub const OUTPUT_DIR_ENV: &str = "SELFNORM_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "selfnorm-out";
pub const SUMMARY_FILE: &str = "summary.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("invalid configuration ({} problem(s))", .0.len())]
    Validation(Vec<FieldError>),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl RunError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        RunError::Validation(vec![FieldError::new(field, message)])
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => EXIT_VALIDATION,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn report(&self) -> Value {
        match self {
            RunError::Validation(errors) => json!({ "status": "validation_error", "errors": errors }),
            RunError::Runtime(message) => json!({ "status": "runtime_error", "message": message }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::field("config", format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| RunError::field("config", e.to_string()))
}

/// Reads `config_path`, checks it targets `subcommand` (when given), applies
/// `overrides` and runs it.
pub fn run_file(
    subcommand: Option<Subcommand>,
    config_path: &Path,
    overrides: &Overrides,
    env_output_dir: Option<PathBuf>,
) -> Result<RunOutcome, RunError> {
    let mut cfg = load_config(config_path)?;
    if let Some(s) = subcommand {
        if s != cfg.subcommand {
            return Err(RunError::field(
                "subcommand",
                format!("config is for `{}` but `{}` was invoked", cfg.subcommand.as_str(), s.as_str()),
            ));
        }
    }
    overrides.apply(&mut cfg);
    run_config(cfg, env_output_dir)
}

/// Validates, computes, then writes artifacts; nothing is left behind on failure.
pub fn run_config(mut cfg: ExperimentConfig, env_output_dir: Option<PathBuf>) -> Result<RunOutcome, RunError> {
    cfg.resolve_defaults();
    let dir = cfg
        .output_dir
        .clone()
        .or(env_output_dir)
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR));
    cfg.output_dir = Some(dir.clone());
    let plan = plan::validate(&cfg).map_err(RunError::Validation)?;
    let out = OutputDir::prepare(&dir)?;

    let artifacts = match execute::execute(&plan) {
        Ok(a) => a,
        Err(e) => {
            out.discard(&[]);
            return Err(RunError::Runtime(e));
        }
    };

    let mut written = Vec::new();
    let result = (|| -> Result<Value, String> {
        for t in &artifacts.tables {
            let path = dir.join(&t.file_name);
            let bytes = t.to_csv().map_err(|e| e.to_string())?;
            fs::write(&path, bytes).map_err(|e| format!("writing {}: {e}", path.display()))?;
            written.push(path);
        }
        let summary = json!({
            "tool": "selfnorm",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": cfg.subcommand.as_str(),
            "seed": cfg.seed,
            "generated_at_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            "config": cfg,
            "outputs": artifacts.tables.iter().map(|t| t.file_name.as_str()).collect::<Vec<_>>(),
            "results": artifacts.results,
        });
        let path = dir.join(SUMMARY_FILE);
        let text = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
        fs::write(&path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))?;
        written.push(path);
        Ok(summary)
    })();
    match result {
        Ok(summary) => Ok(RunOutcome {
            output_dir: dir,
            files: written,
            summary,
        }),
        Err(e) => {
            out.discard(&written);
            Err(RunError::Runtime(e))
        }
    }
}

struct OutputDir {
    path: PathBuf,
    created: bool,
}

impl OutputDir {
    fn prepare(path: &Path) -> Result<Self, RunError> {
        if path.exists() && !path.is_dir() {
            return Err(RunError::field(
                "output_dir",
                format!("{} exists and is not a directory", path.display()),
            ));
        }
        let created = !path.exists();
        fs::create_dir_all(path)
            .map_err(|e| RunError::field("output_dir", format!("cannot create {}: {e}", path.display())))?;
        let dir = Self {
            path: path.to_path_buf(),
            created,
        };
        let probe = path.join(".selfnorm-write-probe");
        if let Err(e) = fs::write(&probe, b"") {
            dir.discard(&[]);
            return Err(RunError::field(
                "output_dir",
                format!("{} is not writable: {e}", path.display()),
            ));
        }
        let _ = fs::remove_file(probe);
        Ok(dir)
    }

    fn discard(&self, written: &[PathBuf]) {
        for f in written {
            let _ = fs::remove_file(f);
        }
        if self.created {
            let _ = fs::remove_dir(&self.path);
        }
    }
}
