//! Experiment configuration: a JSON file whose every field can be
//! overridden by a command-line flag of the same name.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graphmetrics::ObservationMode;
use crate::pointproc::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Table1,
    FitSweep,
    BoundSearch,
    CouplingVerify,
    KcProbe,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Table1 => "table1",
            Experiment::FitSweep => "fit-sweep",
            Experiment::BoundSearch => "bound-search",
            Experiment::CouplingVerify => "coupling-verify",
            Experiment::KcProbe => "kc-probe",
        };
        f.write_str(s)
    }
}

/// One `(n, k)` cell of the distortion table, written `n:k` on the command
/// line. Config files accept either `"n:k"` or `{"n": .., "k": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub k: u32,
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Pair {
            n: usize,
            k: u32,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Pair(Pair),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Pair(Pair { n, k }) => Ok(Cell { n, k }),
        }
    }
}

impl FromStr for Cell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (n, k) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("cell {s:?} must look like n:k")))?;
        let n = n.trim().parse().map_err(|_| Error::Config(format!("bad n in cell {s:?}")))?;
        let k = k.trim().parse().map_err(|_| Error::Config(format!("bad k in cell {s:?}")))?;
        Ok(Cell { n, k })
    }
}

/// Cells of the distortion table reproduced by default.
pub const TABLE1_CELLS: [Cell; 8] = [
    Cell { n: 500, k: 3 },
    Cell { n: 500, k: 4 },
    Cell { n: 500, k: 5 },
    Cell { n: 1000, k: 3 },
    Cell { n: 1000, k: 4 },
    Cell { n: 1000, k: 5 },
    Cell { n: 1500, k: 4 },
    Cell { n: 2000, k: 4 },
];

/// Settings as they appear in a config file or on the command line; every
/// field is optional and unset fields fall back to per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Experiment the file is meant for; must match the subcommand if set.
    #[arg(long, global = true)]
    pub experiment: Option<Experiment>,
    /// Base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Explicit seed list (overrides seed / num-seeds).
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Number of consecutive seeds starting at the base seed.
    #[arg(long, global = true)]
    pub num_seeds: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Point counts.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Neighbour counts.
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<u32>>,
    /// Distortion table cells as n:k pairs.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cells: Option<Vec<Cell>>,
    /// Poisson intensity.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Sampling window as xmin,ymin,xmax,ymax.
    #[arg(long, global = true)]
    pub window: Option<Window>,
    /// Side of the centred inner window as a fraction of the outer side.
    #[arg(long, global = true)]
    pub inner_fraction: Option<f64>,
    /// Which component is measured: induced or full.
    #[arg(long, global = true)]
    pub observation: Option<ObservationMode>,
    /// Sample this many vertex pairs instead of all pairs.
    #[arg(long, global = true)]
    pub sample_pairs: Option<usize>,
    /// Disc radius of the tile construction.
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Tile columns for coupling verification.
    #[arg(long, global = true)]
    pub tiles_x: Option<usize>,
    /// Tile rows for coupling verification.
    #[arg(long, global = true)]
    pub tiles_y: Option<usize>,
    /// Pair budget for coupling verification.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Site-percolation threshold for the bound search.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Smallest k tried by the bound search.
    #[arg(long, global = true)]
    pub k_min: Option<u32>,
    /// Largest k tried by the bound search.
    #[arg(long, global = true)]
    pub k_max: Option<u32>,
    /// Lower end of the scan over a.
    #[arg(long, global = true)]
    pub a_min: Option<f64>,
    /// Upper end of the scan over a.
    #[arg(long, global = true)]
    pub a_max: Option<f64>,
    /// Coarse step of the scan over a (refined twice by 10x).
    #[arg(long, global = true)]
    pub a_step: Option<f64>,
    /// Monte Carlo trials for cross-checking the bound (0 = skip).
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Settings {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: Settings) -> Self {
        overlay!(self, other; experiment, seed, seeds, num_seeds, out, threads, n, k, cells, lambda,
            window, inner_fraction, observation, sample_pairs, a, tiles_x, tiles_y, budget, threshold,
            k_min, k_max, a_min, a_max, a_step, trials);
        self
    }

    /// Applies the defaults of `experiment` and validates the result.
    pub fn resolve(self, experiment: Experiment) -> Result<ExperimentConfig> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(Error::Config(format!("config is for {e} but {experiment} was requested")));
            }
        }
        let seed = self.seed.unwrap_or(1);
        let seeds = match self.seeds {
            Some(s) => s,
            None => {
                let m = self.num_seeds.unwrap_or(10) as u64;
                (0..m).map(|i| seed + i).collect()
            }
        };
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let (default_n, default_k): (Vec<usize>, Vec<u32>) = match experiment {
            Experiment::Table1 => (vec![], vec![]),
            Experiment::FitSweep => (vec![1000], (3..=13).collect()),
            Experiment::BoundSearch => (vec![], vec![]),
            Experiment::CouplingVerify => (vec![], vec![188]),
            Experiment::KcProbe => (vec![1000], (1..=8).collect()),
        };
        let cfg = ExperimentConfig {
            experiment,
            seeds,
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: self.threads.unwrap_or(0),
            n: self.n.unwrap_or(default_n),
            k: self.k.unwrap_or(default_k),
            cells: self.cells.unwrap_or_else(|| {
                if experiment == Experiment::Table1 {
                    TABLE1_CELLS.to_vec()
                } else {
                    Vec::new()
                }
            }),
            lambda: self.lambda.unwrap_or(1.0),
            window: self.window,
            inner_fraction: self.inner_fraction.unwrap_or(0.5),
            observation: self.observation.unwrap_or_default(),
            sample_pairs: self.sample_pairs,
            a: self.a.unwrap_or(0.893),
            tiles_x: self.tiles_x.unwrap_or(20),
            tiles_y: self.tiles_y.unwrap_or(20),
            budget: self.budget.unwrap_or(400),
            threshold: self.threshold.unwrap_or(crate::criticalbound::SITE_THRESHOLD),
            k_min: self.k_min.unwrap_or(1),
            k_max: self.k_max.unwrap_or(400),
            a_min: self.a_min.unwrap_or(0.5),
            a_max: self.a_max.unwrap_or(1.5),
            a_step: self.a_step.unwrap_or(0.005),
            trials: self.trials.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved settings of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub threads: usize,
    pub n: Vec<usize>,
    pub k: Vec<u32>,
    pub cells: Vec<Cell>,
    pub lambda: f64,
    pub window: Option<Window>,
    pub inner_fraction: f64,
    pub observation: ObservationMode,
    pub sample_pairs: Option<usize>,
    pub a: f64,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub budget: usize,
    pub threshold: f64,
    pub k_min: u32,
    pub k_max: u32,
    pub a_min: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub trials: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_fraction > 0.0 && self.inner_fraction <= 1.0) {
            return Err(bad(format!("inner_fraction must lie in (0, 1], got {}", self.inner_fraction)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(bad(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some(w) = &self.window {
            w.validate().map_err(|e| bad(e.to_string()))?;
        }
        match self.experiment {
            Experiment::Table1 => {
                if self.cells.is_empty() {
                    return Err(bad("table1 needs at least one n:k cell"));
                }
                if let Some(c) = self.cells.iter().find(|c| c.k == 0 || c.n < 2 || c.k as usize >= c.n) {
                    return Err(bad(format!("invalid cell {}:{}", c.n, c.k)));
                }
            }
            Experiment::FitSweep => {
                if self.n.len() != 1 {
                    return Err(bad("fit-sweep takes exactly one n"));
                }
                if self.k.is_empty() || self.k.iter().any(|&k| !(3..=13).contains(&k)) {
                    return Err(bad("fit-sweep k values must be a nonempty subset of 3..=13"));
                }
            }
            Experiment::BoundSearch => {
                if !(self.threshold > 0.0 && self.threshold < 1.0) {
                    return Err(bad(format!("threshold must lie in (0, 1), got {}", self.threshold)));
                }
                if self.k_min > self.k_max {
                    return Err(bad("k_min exceeds k_max"));
                }
                if !(self.a_min > 0.0 && self.a_max >= self.a_min && self.a_step > 0.0) {
                    return Err(bad("a range must be positive and nonempty with a positive step"));
                }
                if self.trials != 0 && self.trials < 1000 {
                    return Err(bad("trials must be 0 or at least 1000"));
                }
            }
            Experiment::CouplingVerify => {
                if self.k.len() != 1 {
                    return Err(bad("coupling-verify takes exactly one k"));
                }
                if !(self.a > 0.0) || self.tiles_x == 0 || self.tiles_y == 0 {
                    return Err(bad("coupling-verify needs a > 0 and a nonempty tile grid"));
                }
            }
            Experiment::KcProbe => {
                if self.n.len() != 1 || self.k.is_empty() {
                    return Err(bad("kc-probe takes exactly one n and a nonempty k list"));
                }
                if self.k.iter().any(|&k| k == 0 || k as usize >= self.n[0]) {
                    return Err(bad("kc-probe k values must lie in 1..n"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved settings, excluding where and how the run
    /// executes (`out`, `threads`), which do not affect results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            m.remove("out");
            m.remove("threads");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_parse_from_text_or_object() {
        let s = Settings::from_json_str(r#"{"cells": ["1000:4", {"n": 500, "k": 3}]}"#).unwrap();
        assert_eq!(s.cells.unwrap(), vec![Cell { n: 1000, k: 4 }, Cell { n: 500, k: 3 }]);
        assert!(Settings::from_json_str(r#"{"cells": ["1000-4"]}"#).is_err());
        assert!(Settings::from_json_str(r#"{"cells": [{"n": 1, "k": 2, "x": 0}]}"#).is_err());
    }

    #[test]
    fn defaults_per_experiment() {
        let c = Settings::default().resolve(Experiment::Table1).unwrap();
        assert_eq!(c.seeds, (1..=10).collect::<Vec<_>>());
        assert_eq!(c.cells, TABLE1_CELLS.to_vec());
        assert_eq!(c.inner_fraction, 0.5);
        let f = Settings { seed: Some(101), ..Default::default() }.resolve(Experiment::FitSweep).unwrap();
        assert_eq!(f.seeds[0], 101);
        assert_eq!(f.k, (3..=13).collect::<Vec<_>>());
        let b = Settings::default().resolve(Experiment::BoundSearch).unwrap();
        assert_eq!((b.threshold, b.lambda, b.k_max), (0.59, 1.0, 400));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Settings::from_json_str(r#"{"sed": 3}"#), Err(Error::Config(_))));
        let s = Settings::from_json_str(r#"{"seed": 3, "cells": [{"n": 50, "k": 3}], "window": {"xmin":0,"ymin":0,"xmax":1,"ymax":1}}"#).unwrap();
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.window.unwrap().xmax, 1.0);
    }

    #[test]
    fn overlay_prefers_later() {
        let file = Settings { seed: Some(5), lambda: Some(2.0), ..Default::default() };
        let cli = Settings { seed: Some(9), ..Default::default() };
        let m = file.overlay(cli);
        assert_eq!((m.seed, m.lambda), (Some(9), Some(2.0)));
    }

    #[test]
    fn mismatched_experiment_and_bad_values() {
        let s = Settings { experiment: Some(Experiment::KcProbe), ..Default::default() };
        assert!(s.resolve(Experiment::Table1).is_err());
        assert!(Settings { seeds: Some(vec![]), ..Default::default() }.resolve(Experiment::Table1).is_err());
        assert!(Settings { k: Some(vec![2, 3]), ..Default::default() }.resolve(Experiment::FitSweep).is_err());
        assert!(Settings { threshold: Some(1.0), ..Default::default() }.resolve(Experiment::BoundSearch).is_err());
        assert!(Settings { inner_fraction: Some(0.0), ..Default::default() }.resolve(Experiment::Table1).is_err());
    }

    #[test]
    fn hash_ignores_out_and_threads() {
        let a = Settings::default().resolve(Experiment::Table1).unwrap();
        let b = Settings { out: Some("elsewhere".into()), threads: Some(3), ..Default::default() }
            .resolve(Experiment::Table1)
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = Settings { seed: Some(2), ..Default::default() }.resolve(Experiment::Table1).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn cell_parsing() {
        assert_eq!("500:3".parse::<Cell>().unwrap(), Cell { n: 500, k: 3 });
        assert!("500".parse::<Cell>().is_err());
    }
}
