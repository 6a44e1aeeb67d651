//! Reports and atomic artifact writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "hessian-lab";

/// The only non-deterministic part of a report.
#[derive(Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Header {
    pub fn now() -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { tool: TOOL, version: env!("CARGO_PKG_VERSION"), timestamp }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub header: Header,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn report_json<T: Serialize>(config: &RunConfig, result: T) -> Result<Vec<u8>, CliError> {
    let report = Report { header: Header::now(), config, result };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Config(format!("serialize report: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Files to write, relative to one output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Moves every file of `other` under `prefix`.
    pub fn nest(&mut self, prefix: &Path, other: Artifacts) {
        for (name, bytes) in other.files {
            self.files.push((prefix.join(name), bytes));
        }
    }

    /// Writes every file under a temporary name first and renames them all
    /// only once every write succeeded.
    pub fn commit(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path, e: std::io::Error| CliError::Io { path: path.to_path_buf(), source: e };
        let mut staged = Vec::with_capacity(self.files.len());
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let parent = target.parent().unwrap_or(dir);
            if let Err(e) = fs::create_dir_all(parent) {
                cleanup(&staged);
                return Err(io(parent, e));
            }
            let file_name = target.file_name().and_then(|f| f.to_str()).unwrap_or("out");
            let tmp = parent.join(format!(".{file_name}.tmp-{}", std::process::id()));
            if let Err(e) = fs::write(&tmp, bytes) {
                cleanup(&staged);
                return Err(io(&tmp, e));
            }
            staged.push((tmp, target));
        }
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                cleanup(&staged[i..]);
                return Err(io(target, e));
            }
        }
        Ok(())
    }
}
