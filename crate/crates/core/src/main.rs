use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nnperc::harness::{self, Experiment, Settings};
use nnperc::nngraph::build_knn_graph;
use nnperc::pointproc::{sample_binomial, sample_poisson, Window};
use nnperc::Error;

/// Simulation and numerics for k-nearest-neighbour graphs on planar point processes.
#[derive(Debug, Parser)]
#[command(name = "nnperc", version)]
struct Cli {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a point set (Poisson, or binomial when --n is given) and optionally its k-NN graph.
    Sample,
    /// Distortion of the observed component for a set of (n, k) cells.
    Table1,
    /// Average distortion over a range of k and the fit of 1 + a/k^2.
    FitSweep,
    /// Smallest k whose optimized tile probability exceeds the threshold.
    BoundSearch,
    /// Tile coupling checks on a simulated instance.
    CouplingVerify,
    /// Share of inner-window points in the observed component, per k.
    KcProbe,
}

fn run_sample(s: Settings) -> nnperc::Result<()> {
    let seed = s.seed.unwrap_or(1);
    let out = s.out.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let window = match s.window {
        Some(w) => w,
        None => Window::square(100.0)?,
    };
    let ps = match s.n.as_deref() {
        Some([n]) => sample_binomial(window, *n, seed)?,
        Some(_) => return Err(Error::Config("sample takes a single n".into())),
        None => sample_poisson(window, s.lambda.unwrap_or(1.0), seed)?,
    };
    ps.write_csv(BufWriter::new(File::create(out.join("points.csv"))?))?;
    ps.write_meta_json(BufWriter::new(File::create(out.join("points.meta.json"))?))?;
    match s.k.as_deref() {
        None => {}
        Some([k]) => {
            let g = build_knn_graph(&ps, *k as usize)?;
            g.write_edges_csv(BufWriter::new(File::create(out.join("edges.csv"))?))?;
            serde_json::to_writer_pretty(File::create(out.join("graph.meta.json"))?, &g.meta(seed))?;
        }
        Some(_) => return Err(Error::Config("sample takes a single k".into())),
    }
    println!("{} points written to {}", ps.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> nnperc::Result<()> {
    let file = match &cli.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let settings = file.overlay(cli.settings);
    if let Some(t) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let experiment = match cli.command {
        Command::Sample => return run_sample(settings),
        Command::Table1 => Experiment::Table1,
        Command::FitSweep => Experiment::FitSweep,
        Command::BoundSearch => Experiment::BoundSearch,
        Command::CouplingVerify => Experiment::CouplingVerify,
        Command::KcProbe => Experiment::KcProbe,
    };
    let cfg = settings.resolve(experiment)?;
    match experiment {
        Experiment::Table1 => {
            let r = harness::run_table1(&cfg)?;
            println!("n,k,seeds,mean_avg,sd_avg,mean_pct_le_2x_avg");
            for s in &r.summary {
                println!("{},{},{},{:.4},{:.4},{:.2}", s.n, s.k, s.seeds, s.mean_avg, s.sd_avg, s.mean_pct_le_2x_avg);
            }
        }
        Experiment::FitSweep => {
            let r = harness::run_fit_sweep(&cfg)?;
            println!("a_fit = {:.4} (rss {:.3e}, {} k values)", r.a_fit, r.rss, r.points.len());
        }
        Experiment::BoundSearch => {
            let r = harness::run_bound_search(&cfg)?;
            let b = &r.result;
            println!("k_star = {}, a_star = {:.4}, p_star = {:.6} (threshold {})", b.k_star, b.a_star, b.p_star, b.threshold);
            if let Some(mc) = r.mc_check {
                println!("monte carlo at optimum: {:.5} +/- {:.5}", mc.value, mc.ci_halfwidth);
            }
        }
        Experiment::CouplingVerify => {
            for r in harness::run_coupling_verify(&cfg)? {
                let c = &r.report;
                println!(
                    "seed {}: open {:.4} (analytic {:.4}, z {:+.2}), valid {}/{}, alpha_hat {:.3}, witnesses {}",
                    r.seed,
                    c.open_fraction,
                    r.analytic_p,
                    r.z(),
                    c.valid_paths,
                    c.adjacent_pairs_checked,
                    c.alpha_hat,
                    c.witnesses.len()
                );
            }
        }
        Experiment::KcProbe => {
            for r in harness::run_kc_probe(&cfg)? {
                println!("k={} fraction={:.4} sd={:.4}", r.k, r.mean_fraction, r.sd_fraction);
            }
        }
    }
    println!("outputs in {}", cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter(_) => 2,
                Error::NotFound { .. } => 3,
                _ => 1,
            })
        }
    }
}
