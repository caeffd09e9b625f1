//! Append-only CSV loss logs. Float fields use Rust's shortest-round-trip
//! formatting, so a fixed seed reproduces the log byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{PipelineError, Result};

pub struct CsvLog {
    path: PathBuf,
    file: std::fs::File,
}

impl CsvLog {
    /// Creates (or truncates) the log and writes the header row.
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        let mut file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
        writeln!(file, "{}", columns.join(",")).map_err(|e| PipelineError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Reopens an existing log for appending (resume path).
    pub fn append(path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| PipelineError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn row(&mut self, step: u64, epoch: usize, values: &[f64]) -> Result<()> {
        let mut line = format!("{step},{epoch}");
        for v in values {
            line.push(',');
            line.push_str(&format_float(*v));
        }
        writeln!(self.file, "{line}").map_err(|e| PipelineError::io(&self.path, e))
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}
