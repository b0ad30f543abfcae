//! Run records and the output directory they describe.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub environment: Environment,
    /// The configuration as run, so the record can be replayed.
    pub config: ExperimentConfig,
    /// Experiment-specific results.
    pub results: serde_json::Value,
    /// Files written next to the record, relative to the output directory.
    pub files: Vec<String>,
}

impl RunRecord {
    /// Results as indented JSON.
    pub fn summary(&self) -> String {
        serde_json::to_string_pretty(&self.results).unwrap_or_else(|_| self.results.to_string())
    }
}

/// Writer for one run's output directory. Without a path nothing touches
/// the file system and the manifest stays empty.
#[derive(Debug)]
pub struct OutputDir {
    root: Option<PathBuf>,
    files: Vec<String>,
}

impl OutputDir {
    pub fn new(root: Option<&Path>) -> Result<Self> {
        if let Some(dir) = root {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self { root: root.map(Path::to_path_buf), files: Vec::new() })
    }

    pub fn discard() -> Self {
        Self { root: None, files: Vec::new() }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Creates `name` and hands a buffered writer to `write`.
    pub fn write<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(BufWriter<File>) -> Result<()>,
    {
        let Some(root) = &self.root else { return Ok(()) };
        let file = File::create(root.join(name))?;
        write(BufWriter::new(file))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `record.json`, listing itself and every earlier file.
    pub fn finish(mut self, mut record: RunRecord) -> Result<RunRecord> {
        if self.root.is_some() {
            self.files.push("record.json".into());
        }
        record.files = self.files.clone();
        if let Some(root) = &self.root {
            let file = BufWriter::new(File::create(root.join("record.json"))?);
            serde_json::to_writer_pretty(file, &record)?;
        }
        Ok(record)
    }
}
