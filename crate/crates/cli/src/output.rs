//! Deterministic CSV and JSON writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Shortest decimal string that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Collects the files of one run in a directory.
pub struct OutputDir {
    root: PathBuf,
    csv: bool,
    json: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, csv: bool, json: bool) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            csv,
            json,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        if !self.csv {
            return Ok(());
        }
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        if !self.json {
            return Ok(());
        }
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    /// Writes a file regardless of the configured formats (explicit dumps).
    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(2.0), "2");
    }
}
