//! Run reports and fingerprint-named output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

/// One built-in check of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    pub fn skipped(name: &str, reason: String) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped,
            detail: reason,
        }
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    NumericalFailure,
    CheckFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ConfigError => 2,
            RunStatus::NumericalFailure | RunStatus::CheckFailure => 3,
        }
    }
}

/// Summary of one invocation. Wall-clock timings live in a sibling
/// `.timings.json` file so this report is byte-identical across reruns.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub fingerprint: String,
    pub status: RunStatus,
    /// Name of the failing check or phase, when `status` is not `ok`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub config: Option<RunConfig>,
    pub checks: Vec<CheckResult>,
    pub files: Vec<PathBuf>,
}

/// Version string including the source revision when it was known at build time.
pub fn version() -> String {
    match option_env!("PIEZOLAB_GIT_DESCRIBE") {
        Some(rev) if !rev.is_empty() => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub fingerprint: String,
    /// `(phase, seconds)` in execution order.
    pub phases: Vec<(String, f64)>,
}

/// Writes files named `<command>_<fingerprint>.<suffix>` into one directory.
pub struct OutputDir {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(dir: &Path, command: &str, fingerprint: &str) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: format!("{command}_{fingerprint}"),
            written: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.stem))
    }

    /// Writes `contents` and records the path for the report.
    pub fn write(&mut self, suffix: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
        let p = self.path(suffix);
        fs::write(&p, contents)?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}
