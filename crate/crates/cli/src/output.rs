//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Collects the files a command writes so the manifest can list them.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file written by someone else (e.g. the parameter store).
    pub fn record(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn text(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let file = fs::File::create(self.path(name))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush()?;
        self.record(name);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.text(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Everything needed to reproduce a run. Only `wall_time_s` differs
/// between a run and its replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Subcommand words, e.g. `["rom", "train"]`.
    pub command: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}
