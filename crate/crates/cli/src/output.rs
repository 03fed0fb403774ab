//! Report writing shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shapcal_core::report::SCHEMA_VERSION;

use crate::CliError;

/// Envelope for every JSON report: schema version, originating command, the
/// fully resolved configuration, and the command-specific payload. The
/// configuration never contains output paths, so a replayed run produces a
/// byte-identical report.
#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, P: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: C,
    #[serde(flatten)]
    pub payload: P,
}

impl<C: Serialize, P: Serialize> Report<C, P> {
    pub fn new(command: &'static str, config: C, payload: P) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            payload,
        }
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| CliError::data(format!("cannot serialize report: {e}")))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
