//! The resolved configuration written next to every run's outputs.
//!
//! The manifest is itself a valid config file: header facts are `#` comments,
//! so `--config <out>/manifest.cfg` reruns the job.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adagan::config::RunConfig;

use crate::error::{CliError, CliResult};
use crate::fsutil::{read_text, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.cfg";
pub const TOOL_VERSION: &str = concat!("adagan ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: &'static str,
    pub out_dir: PathBuf,
    pub config: RunConfig,
    /// Extra `key: value` facts (files written, resume origin, ...).
    pub notes: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &'static str, out_dir: &Path, config: RunConfig) -> Self {
        Self {
            command,
            out_dir: out_dir.to_path_buf(),
            config,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {TOOL_VERSION}");
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# out: {}", self.out_dir.display());
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.config.to_text());
        out
    }

    pub fn write(&self) -> CliResult<()> {
        write_atomic(&self.out_dir.join(MANIFEST_FILE), &self.to_text())
    }
}

/// Reads and resolves a config file; `None` means all defaults.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = read_text(path)?;
    RunConfig::parse(&text).map_err(|e| match e {
        adagan::Error::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => CliError::reading(path, other),
    })
}
