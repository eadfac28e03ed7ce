//! Output files: CSV with a `#`-prefixed run header, and pretty JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use leapfrog::observables::format_float;

use crate::error::CliError;

/// Package version and, when built from a git checkout, the commit.
pub const VERSION: &str = env!("LEAPFROG_VERSION");

/// Key/value lines written ahead of every CSV table. Nothing here depends on
/// the wall clock or the host, so identical runs give identical bytes.
#[derive(Debug, Clone, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        let mut m = Metadata::default();
        m.push("leapfrog", VERSION);
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_json<T: Serialize>(&mut self, key: &str, value: &T) -> &mut Self {
        let text = serde_json::to_string(value).expect("metadata values serialize");
        self.push(key, text)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(self.entries.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect())
    }
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    /// Opens `name` for writing with the metadata header already in place.
    pub fn csv(&mut self, name: &str, meta: &Metadata) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        meta.write(&mut w)?;
        self.written.push(path);
        Ok(w)
    }

    /// Writes `rows` under a comma-separated `header`.
    pub fn table(&mut self, name: &str, meta: &Metadata, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = self.csv(name, meta)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value).map_err(leapfrog::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lines() {
        let mut m = Metadata::new("evolve");
        m.push("basis", 13).push_json("plan", &[0.5, 1.0]);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("# leapfrog: {VERSION}\n# command: evolve\n# basis: 13\n# plan: [0.5,1.0]\n"));
        assert_eq!(m.to_json()["basis"], "13");
    }
}
