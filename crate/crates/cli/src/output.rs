//! File emission with the provenance header.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cascade_core::io::{Provenance, Table};
use serde::Serialize;
use serde_json::json;

use crate::CliError;

pub struct Output {
    pub dir: PathBuf,
    pub provenance: Provenance,
    pub csv: bool,
    pub json: bool,
}

impl Output {
    pub fn new(dir: &Path, config_hash: String, csv: bool, json: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let provenance = Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
        };
        Ok(Self { dir: dir.to_path_buf(), provenance, csv, json })
    }

    pub fn table(&self, name: &str, table: &Table) -> Result<Option<PathBuf>, CliError> {
        if !self.csv {
            return Ok(None);
        }
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        table.write(BufWriter::new(file), &self.provenance)?;
        Ok(Some(path))
    }

    /// Writes `{tool, version, config_hash, result}`.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<Option<PathBuf>, CliError> {
        if !self.json {
            return Ok(None);
        }
        let path = self.dir.join(name);
        let doc = json!({
            "tool": self.provenance.tool,
            "version": self.provenance.version,
            "config_hash": self.provenance.config_hash,
            "result": value,
        });
        let text = serde_json::to_string_pretty(&doc).expect("results serialize to JSON");
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(Some(path))
    }
}
