//! Writing experiment outputs. Every file records the config hash and the
//! seed list: CSV files in a leading `#` comment line, JSON files as fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;

/// Provenance stamped into every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self { config_hash: cfg.hash(), seeds: cfg.seeds.clone() }
    }

    pub fn comment(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!("# config_sha256={} seeds={}", self.config_hash, seeds.join(";"))
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seeds: &'a [u64],
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutDir {
    dir: PathBuf,
    prov: Provenance,
}

impl OutDir {
    pub fn create(cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&cfg.out)?;
        Ok(Self { dir: cfg.out.clone(), prov: Provenance::of(cfg) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    /// Writes a CSV file: provenance comment, header, then `rows`.
    pub fn csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", self.prov.comment())?;
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Opens a CSV file and writes the provenance comment; the caller
    /// writes header and rows.
    pub fn csv_writer(&self, name: &str) -> Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", self.prov.comment())?;
        Ok(w)
    }

    /// Writes `body` as pretty JSON with `config_hash` and `seeds` added.
    /// `body` must serialize to a JSON object.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let stamped = Stamped { config_hash: &self.prov.config_hash, seeds: &self.prov.seeds, body };
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &stamped)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, body)?;
        Ok(path)
    }
}

/// Shortest round-tripping decimal form of `x`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
