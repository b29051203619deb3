//! The run configuration: a JSON file, overridden field by field by command-line flags.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use designcoder::codegen::StyleMode;

use crate::failure::{ExitClass, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StyleModeArg {
    Deterministic,
    Llm,
}

impl From<StyleModeArg> for StyleMode {
    fn from(m: StyleModeArg) -> Self {
        match m {
            StyleModeArg::Deterministic => StyleMode::Metadata,
            StyleModeArg::Llm => StyleMode::Llm,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendFile {
    pub mode: Option<BackendMode>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub transcript_path: Option<PathBuf>,
}

/// The config file as written; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub backend: BackendFile,
    pub max_concurrency: Option<usize>,
    pub refine_rounds: Option<usize>,
    pub style_mode: Option<StyleModeArg>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    /// Read `path`; relative paths inside are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let bad = |m: String| Failure::new(ExitClass::Parse, "config", m);
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.backend.transcript_path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.output_dir.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }
}

/// Flag values; `None` leaves the config file's value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendMode>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub transcript: Option<PathBuf>,
    pub max_concurrency: Option<usize>,
    pub refine_rounds: Option<usize>,
    pub style_mode: Option<StyleModeArg>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub transcript_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub max_concurrency: usize,
    pub refine_rounds: usize,
    pub style_mode: StyleModeArg,
    pub output_dir: PathBuf,
}

pub const DEFAULT_CONCURRENCY: usize = 4;
pub const DEFAULT_REFINE_ROUNDS: usize = 2;

impl RunConfig {
    pub fn resolve(file: ConfigFile, flags: Overrides) -> Result<Self, Failure> {
        let bad = |m: &str| Failure::new(ExitClass::Parse, "config", m);
        let cfg = RunConfig {
            backend: BackendConfig {
                mode: flags.backend.or(file.backend.mode).unwrap_or(BackendMode::Replay),
                base_url: flags.base_url.or(file.backend.base_url),
                model: flags.model.or(file.backend.model),
                transcript_path: flags.transcript.or(file.backend.transcript_path),
            },
            max_concurrency: flags.max_concurrency.or(file.max_concurrency).unwrap_or(DEFAULT_CONCURRENCY),
            refine_rounds: flags.refine_rounds.or(file.refine_rounds).unwrap_or(DEFAULT_REFINE_ROUNDS),
            style_mode: flags.style_mode.or(file.style_mode).unwrap_or(StyleModeArg::Deterministic),
            output_dir: flags.out.or(file.output_dir).unwrap_or_else(|| PathBuf::from("out")),
        };
        if cfg.max_concurrency == 0 {
            return Err(bad("max_concurrency must be at least 1"));
        }
        if cfg.refine_rounds == 0 {
            return Err(bad("refine_rounds must be at least 1"));
        }
        Ok(cfg)
    }

    /// Check the backend fields the selected mode needs.
    pub fn check_backend(&self) -> Result<(), Failure> {
        let bad = |m: &str| Failure::new(ExitClass::Parse, "config", m);
        let b = &self.backend;
        match b.mode {
            BackendMode::Replay if b.transcript_path.is_none() => Err(bad("replay mode requires a transcript path")),
            BackendMode::Live if b.base_url.is_none() || b.model.is_none() => {
                Err(bad("live mode requires base_url and model"))
            }
            _ => Ok(()),
        }
    }
}
