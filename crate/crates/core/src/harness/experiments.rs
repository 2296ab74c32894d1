//! The experiments behind each CLI subcommand. Each `run_*` computes its
//! results and writes them under `cfg.out`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use super::output::{num, OutDir};
use crate::criticalbound::{mc_prob_at, min_k, prob_at, BoundResult, BoundSearch, EventProb};
use crate::error::{Error, Result};
use crate::graphmetrics::{observation_distortion, observe, sweep_k_fit, FitResult};
use crate::nngraph::build_knn_graph;
use crate::pointproc::{sample_binomial, sample_poisson, Window};
use crate::stats::{mean, sd};
use crate::tiles::{evaluate_tiles, verify_coupling, CouplingReport, TileParams};

fn expect(cfg: &ExperimentConfig, e: Experiment) -> Result<()> {
    if cfg.experiment != e {
        return Err(Error::Config(format!("expected a {e} config, got {}", cfg.experiment)));
    }
    cfg.validate()
}

/// Window used for `n` binomial points: the configured one, or a square of
/// side `sqrt(n)` (unit density; distortion is scale free).
fn binomial_window(cfg: &ExperimentConfig, n: usize) -> Result<Window> {
    match cfg.window {
        Some(w) => Ok(w),
        None => Window::square((n as f64).sqrt()),
    }
}

/// One distortion measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub n: usize,
    pub k: u32,
    pub seed: u64,
    pub inner_fraction: f64,
    pub pairs: u64,
    pub avg: f64,
    pub max: f64,
    pub pct_le_2: f64,
    pub pct_le_2x_avg: f64,
    /// Inner-window points and how many of them were measured.
    pub inside: usize,
    pub observed: usize,
    /// Fewer than two observed vertices; the statistics are NaN.
    pub degenerate: bool,
}

pub const DISTORTION_HEADER: &str = "n,k,seed,inner_fraction,pairs,avg,max,pct_le_2,pct_le_2x_avg,inside,observed,status";

impl DistortionRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.seed,
            num(self.inner_fraction),
            self.pairs,
            num(self.avg),
            num(self.max),
            num(self.pct_le_2),
            num(self.pct_le_2x_avg),
            self.inside,
            self.observed,
            if self.degenerate { "degenerate" } else { "ok" }
        )
    }
}

/// Samples `n` uniform points, builds the k-NN graph and measures the
/// distortion of the observed component inside the centred inner window.
pub fn distortion_sample(cfg: &ExperimentConfig, n: usize, k: u32, seed: u64) -> Result<DistortionRow> {
    let window = binomial_window(cfg, n)?;
    let ps = sample_binomial(window, n, seed)?;
    let g = build_knn_graph(&ps, k as usize)?;
    let inner = window.centered_fraction(cfg.inner_fraction)?;
    let obs = observe(&g, &ps, &inner, cfg.observation);
    let mut row = DistortionRow {
        n,
        k,
        seed,
        inner_fraction: cfg.inner_fraction,
        pairs: 0,
        avg: f64::NAN,
        max: f64::NAN,
        pct_le_2: f64::NAN,
        pct_le_2x_avg: f64::NAN,
        inside: obs.inside,
        observed: obs.vertices.len(),
        degenerate: obs.vertices.len() < 2,
    };
    if !row.degenerate {
        let s = observation_distortion(&g, &ps, &obs, cfg.sample_pairs.map(|m| (m, seed)))?;
        row.pairs = s.pairs;
        row.avg = s.avg;
        row.max = s.max;
        row.pct_le_2 = s.pct_le_2;
        row.pct_le_2x_avg = s.pct_le_2x_avg;
    }
    Ok(row)
}

fn distortion_rows(cfg: &ExperimentConfig, cells: &[(usize, u32)]) -> Result<Vec<DistortionRow>> {
    let jobs: Vec<(usize, u32, u64)> = cells
        .iter()
        .flat_map(|&(n, k)| cfg.seeds.iter().map(move |&s| (n, k, s)))
        .collect();
    jobs.par_iter().map(|&(n, k, s)| distortion_sample(cfg, n, k, s)).collect()
}

/// Mean and spread over seeds for one `(n, k)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSummary {
    pub n: usize,
    pub k: u32,
    /// Non-degenerate seeds contributing.
    pub seeds: usize,
    pub mean_avg: f64,
    pub sd_avg: f64,
    pub mean_max: f64,
    pub mean_pct_le_2: f64,
    pub mean_pct_le_2x_avg: f64,
}

fn summarize(n: usize, k: u32, rows: &[DistortionRow]) -> DistortionSummary {
    let ok: Vec<&DistortionRow> = rows.iter().filter(|r| r.n == n && r.k == k && !r.degenerate).collect();
    let col = |f: fn(&DistortionRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let avgs = col(|r| r.avg);
    DistortionSummary {
        n,
        k,
        seeds: ok.len(),
        mean_avg: mean(&avgs),
        sd_avg: sd(&avgs),
        mean_max: mean(&col(|r| r.max)),
        mean_pct_le_2: mean(&col(|r| r.pct_le_2)),
        mean_pct_le_2x_avg: mean(&col(|r| r.pct_le_2x_avg)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub rows: Vec<DistortionRow>,
    pub summary: Vec<DistortionSummary>,
}

impl Table1Report {
    pub fn cell(&self, n: usize, k: u32) -> Option<&DistortionSummary> {
        self.summary.iter().find(|s| s.n == n && s.k == k)
    }
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<Table1Report> {
    expect(cfg, Experiment::Table1)?;
    let cells: Vec<(usize, u32)> = cfg.cells.iter().map(|c| (c.n, c.k)).collect();
    let rows = distortion_rows(cfg, &cells)?;
    for r in rows.iter().filter(|r| r.degenerate) {
        log::warn!("degenerate observation for n={} k={} seed={}", r.n, r.k, r.seed);
    }
    let summary: Vec<DistortionSummary> = cells.iter().map(|&(n, k)| summarize(n, k, &rows)).collect();

    let out = OutDir::create(cfg)?;
    out.csv("table1.csv", DISTORTION_HEADER, &rows.iter().map(DistortionRow::csv).collect::<Vec<_>>())?;
    let srows: Vec<String> = summary
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{},{},{}",
                s.n,
                s.k,
                s.seeds,
                num(s.mean_avg),
                num(s.sd_avg),
                num(s.mean_max),
                num(s.mean_pct_le_2),
                num(s.mean_pct_le_2x_avg)
            )
        })
        .collect();
    out.csv("table1_summary.csv", "n,k,seeds,mean_avg,sd_avg,mean_max,mean_pct_le_2,mean_pct_le_2x_avg", &srows)?;
    Ok(Table1Report { rows, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub k: u32,
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSweepReport {
    pub a_fit: f64,
    pub rss: f64,
    pub points: Vec<FitPoint>,
    /// k values dropped because every seed was degenerate.
    pub excluded: Vec<u32>,
    #[serde(skip)]
    pub rows: Vec<DistortionRow>,
}

impl FitSweepReport {
    pub fn fit(&self) -> FitResult {
        FitResult { a_fit: self.a_fit, rss: self.rss, points_used: self.points.len() }
    }
}

pub fn run_fit_sweep(cfg: &ExperimentConfig) -> Result<FitSweepReport> {
    expect(cfg, Experiment::FitSweep)?;
    let n = cfg.n[0];
    let cells: Vec<(usize, u32)> = cfg.k.iter().map(|&k| (n, k)).collect();
    let rows = distortion_rows(cfg, &cells)?;
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &k in &cfg.k {
        let s = summarize(n, k, &rows);
        if s.seeds == 0 {
            log::warn!("k={k}: every observation degenerate, excluded from the fit");
            excluded.push(k);
        } else {
            points.push(FitPoint { k, avg: s.mean_avg });
        }
    }
    let samples: Vec<(u32, f64)> = points.iter().map(|p| (p.k, p.avg)).collect();
    let fit = sweep_k_fit(&samples)?;
    let report = FitSweepReport { a_fit: fit.a_fit, rss: fit.rss, points, excluded, rows };

    let out = OutDir::create(cfg)?;
    out.csv("fit_sweep_runs.csv", DISTORTION_HEADER, &report.rows.iter().map(DistortionRow::csv).collect::<Vec<_>>())?;
    let prows: Vec<String> = report
        .points
        .iter()
        .map(|p| {
            let k = f64::from(p.k);
            format!("{},{},{},{}", p.k, p.k * p.k, num(p.avg), num(fit.curve(k)))
        })
        .collect();
    out.csv("fit_sweep.csv", "k,k2,avg,fitted", &prows)?;
    out.json("fit.json", &report)?;
    out.text("fit.gnuplot", &gnuplot_script(fit.a_fit))?;
    Ok(report)
}

fn gnuplot_script(a_fit: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'k^2'\n\
         set ylabel 'average distortion'\n\
         a = {a_fit:?}\n\
         f(x) = 1 + a / x\n\
         plot 'fit_sweep.csv' using 2:3 with points pt 7 title 'mean over seeds', \\\n     \
         f(x) with lines title sprintf('1 + %.2f/k^2', a)\n"
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(flatten)]
    pub result: BoundResult,
    /// Optional Monte Carlo check at `(a_star, k_star)`.
    pub mc_check: Option<EventProb>,
}

pub fn run_bound_search(cfg: &ExperimentConfig) -> Result<BoundReport> {
    expect(cfg, Experiment::BoundSearch)?;
    let search = BoundSearch {
        threshold: cfg.threshold,
        lambda: cfg.lambda,
        k_range: (cfg.k_min, cfg.k_max),
        a_range: (cfg.a_min, cfg.a_max),
        coarse_step: cfg.a_step,
    };
    let result = min_k(&search)?;
    let mc_check = if cfg.trials > 0 {
        Some(mc_prob_at(result.a_star, result.k_star, cfg.lambda, cfg.trials, cfg.seeds[0])?)
    } else {
        None
    };
    let report = BoundReport { result, mc_check };
    OutDir::create(cfg)?.json("bound.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub seed: u64,
    /// Exact tile-event probability at the run's parameters.
    pub analytic_p: f64,
    /// Binomial standard deviation of the open fraction under independence.
    pub sigma: f64,
    #[serde(flatten)]
    pub report: CouplingReport,
}

impl CouplingRun {
    /// Open fraction minus its expectation, in standard deviations.
    pub fn z(&self) -> f64 {
        (self.report.open_fraction - self.analytic_p) / self.sigma
    }
}

pub fn coupling_run(cfg: &ExperimentConfig, seed: u64) -> Result<(CouplingRun, crate::tiles::TileLattice)> {
    let params = TileParams::new(cfg.a, cfg.k[0], cfg.lambda)?;
    let side = params.side();
    let window = Window::new(0.0, 0.0, cfg.tiles_x as f64 * side, cfg.tiles_y as f64 * side)?;
    let ps = sample_poisson(window, cfg.lambda, seed)?;
    let g = build_knn_graph(&ps, cfg.k[0] as usize)?;
    let lat = evaluate_tiles(&ps, params)?;
    let report = verify_coupling(&g, &ps, &lat, cfg.budget, seed)?;
    let p = prob_at(cfg.a, cfg.k[0], cfg.lambda)?.value;
    let tiles = (lat.nx * lat.ny) as f64;
    let sigma = (p * (1.0 - p) / tiles).sqrt();
    Ok((CouplingRun { seed, analytic_p: p, sigma, report }, lat))
}

pub fn run_coupling_verify(cfg: &ExperimentConfig) -> Result<Vec<CouplingRun>> {
    expect(cfg, Experiment::CouplingVerify)?;
    let out = OutDir::create(cfg)?;
    let mut runs = Vec::new();
    // Seeds run one after another: each run already saturates the cores.
    for &seed in &cfg.seeds {
        let (run, lat) = coupling_run(cfg, seed)?;
        let mut w = out.csv_writer(&format!("lattice_seed{seed}.csv"))?;
        lat.write_csv(&mut w)?;
        w.flush()?;
        out.json(&format!("coupling_seed{seed}.json"), &run)?;
        runs.push(run);
    }
    let rows: Vec<String> = runs
        .iter()
        .map(|r| {
            let c = &r.report;
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                num(c.open_fraction),
                num(r.analytic_p),
                num(r.sigma),
                c.adjacent_pairs_checked,
                c.valid_paths,
                num(c.max_hop_ratio),
                num(c.c_tiles_estimate),
                num(c.alpha_hat),
                num(c.rho_hat),
                num(c.trend_p_value),
                c.witnesses.len()
            )
        })
        .collect();
    out.csv(
        "coupling_summary.csv",
        "seed,open_fraction,analytic_p,sigma,adjacent_checked,valid,max_hop_ratio,c_tiles,alpha_hat,rho_hat,trend_p,witnesses",
        &rows,
    )?;
    Ok(runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KcRow {
    pub k: u32,
    pub seeds: usize,
    pub mean_fraction: f64,
    pub sd_fraction: f64,
}

/// Share of inner-window points in the observed component, per `k`.
pub fn run_kc_probe(cfg: &ExperimentConfig) -> Result<Vec<KcRow>> {
    expect(cfg, Experiment::KcProbe)?;
    let n = cfg.n[0];
    let window = binomial_window(cfg, n)?;
    let inner = window.centered_fraction(cfg.inner_fraction)?;
    let jobs: Vec<(u32, u64)> = cfg.k.iter().flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s))).collect();
    let fractions: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, s)| {
            let ps = sample_binomial(window, n, s)?;
            let g = build_knn_graph(&ps, k as usize)?;
            Ok(observe(&g, &ps, &inner, cfg.observation).fraction())
        })
        .collect::<Result<_>>()?;
    let m = cfg.seeds.len();
    let rows: Vec<KcRow> = cfg
        .k
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let f = &fractions[i * m..(i + 1) * m];
            KcRow { k, seeds: m, mean_fraction: mean(f), sd_fraction: sd(f) }
        })
        .collect();
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{}", r.k, r.seeds, num(r.mean_fraction), num(r.sd_fraction)))
        .collect();
    OutDir::create(cfg)?.csv("kc_probe.csv", "k,seeds,fraction,sd", &lines)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Cell, Settings};

    fn cfg(e: Experiment, s: Settings, dir: &tempfile::TempDir) -> ExperimentConfig {
        Settings { out: Some(dir.path().to_path_buf()), ..Default::default() }.overlay(s).resolve(e).unwrap()
    }

    #[test]
    fn complete_graph_has_unit_distortion() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            Experiment::Table1,
            Settings { cells: Some(vec![Cell { n: 30, k: 29 }]), num_seeds: Some(2), inner_fraction: Some(1.0), ..Default::default() },
            &dir,
        );
        let r = run_table1(&c).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert!((row.avg - 1.0).abs() < 1e-12);
            assert_eq!(row.pct_le_2, 100.0);
        }
        let text = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
        assert!(text.starts_with(&format!("# config_sha256={} seeds=1;2\n{DISTORTION_HEADER}\n", c.hash())));
    }

    #[test]
    fn kc_probe_saturates() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            Experiment::KcProbe,
            Settings { n: Some(vec![40]), k: Some(vec![1, 39]), num_seeds: Some(3), ..Default::default() },
            &dir,
        );
        let r = run_kc_probe(&c).unwrap();
        assert_eq!(r[1].mean_fraction, 1.0);
        assert!(r[0].mean_fraction <= 1.0);
    }

    #[test]
    fn outputs_are_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let s = Settings { cells: Some(vec![Cell { n: 200, k: 4 }]), num_seeds: Some(3), ..Default::default() };
        run_table1(&cfg(Experiment::Table1, s.clone(), &d1)).unwrap();
        run_table1(&cfg(Experiment::Table1, s, &d2)).unwrap();
        for f in ["table1.csv", "table1_summary.csv"] {
            assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap());
        }
    }

    #[test]
    fn bound_not_found_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Experiment::BoundSearch, Settings { threshold: Some(0.99), ..Default::default() }, &dir);
        assert!(matches!(run_bound_search(&c), Err(Error::NotFound { .. })));
    }

    #[test]
    fn wrong_experiment_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Experiment::KcProbe, Settings::default(), &dir);
        assert!(matches!(run_table1(&c), Err(Error::Config(_))));
    }
}
