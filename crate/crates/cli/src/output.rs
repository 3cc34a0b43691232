//! Run outputs: atomic file writes, CSV tables and the run manifest.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ornn_core::readout::ConfusionMatrix;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    {
        let mut f = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("output path has a file name").to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// A CSV table held in memory until written.
#[derive(Debug)]
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))
    }

    pub fn write(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.into_bytes()?)
    }
}

pub fn confusion_table(m: &ConfusionMatrix) -> Result<Table> {
    let c = m.classes();
    let mut header = vec!["true_class".to_string(), "support".to_string()];
    header.extend((0..c).map(|k| format!("pred_{k}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs)?;
    for r in 0..c {
        let mut fields = vec![r.to_string(), m.support()[r].to_string()];
        fields.extend(m.row(r).iter().map(|v| v.to_string()));
        t.row(fields)?;
    }
    Ok(t)
}

/// Appends CSV rows to `<name>.partial` as they arrive and renames to `<name>` when closed.
///
/// Closing after a failure still renames, so a partial log is never lost.
pub struct ProgressiveCsv {
    path: PathBuf,
    partial: PathBuf,
    writer: csv::Writer<File>,
}

impl ProgressiveCsv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut name = path.file_name().expect("log path has a file name").to_os_string();
        name.push(".partial");
        let partial = path.with_file_name(name);
        let file = File::create(&partial).with_context(|| format!("creating {}", partial.display()))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        writer.flush()?;
        Ok(Self { path: path.to_path_buf(), partial, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn close(self) -> Result<()> {
        let file = self.writer.into_inner().map_err(|e| anyhow::anyhow!("flushing log: {e}"))?;
        file.sync_all()?;
        fs::rename(&self.partial, &self.path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub started: String,
    pub finished: String,
    pub config: ExperimentConfig,
    /// Exposure gain used by every capture of the run, when optics were involved.
    pub gain: Option<f64>,
    pub outputs: Vec<OutputFile>,
    pub metrics: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Best step recorded by a GA run, if any.
    pub fn best_step(&self) -> Option<u32> {
        self.metrics.get("best_step")?.as_u64().map(|v| v as u32)
    }
}

/// Collects the files written by a command and finally the manifest itself.
pub struct RunRecorder {
    dir: PathBuf,
    command: String,
    started: String,
    outputs: Vec<String>,
}

impl RunRecorder {
    pub fn start(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), command: command.into(), started: now(), outputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file already written into the run directory.
    pub fn record(&mut self, name: &str) {
        if !self.outputs.iter().any(|n| n == name) {
            self.outputs.push(name.into());
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)?;
        self.record(name);
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<()> {
        self.write(name, &table.into_bytes()?)
    }

    pub fn finish(self, config: &ExperimentConfig, gain: Option<f64>, metrics: serde_json::Value) -> Result<RunManifest> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for name in &self.outputs {
            let bytes = fs::metadata(self.dir.join(name))?.len();
            outputs.push(OutputFile { name: name.clone(), bytes });
        }
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            started: self.started,
            finished: now(),
            config: config.clone(),
            gain,
            outputs,
            metrics,
        };
        write_atomic(&self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(manifest)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
