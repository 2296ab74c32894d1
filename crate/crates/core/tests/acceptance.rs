//! Acceptance suite: one line per criterion, then a non-zero exit status if
//! any criterion fails. Tolerances and seeds are fixed up front.

mod common;

use std::time::Instant;

use nnperc::criticalbound::{mc_prob_at, min_k, prob_at, BoundSearch};
use nnperc::graphmetrics::{sssp, sweep_k_fit};
use nnperc::harness::{self, experiments::coupling_run, Experiment, Settings};
use nnperc::nngraph::build_knn_graph;
use nnperc::pointproc::{sample_binomial, Point, Window};
use nnperc::stats::mean;
use nnperc::tiles::geometry::{lens_geometry, scan_geometry, RegionId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn out_dir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn bound_reproduction() -> Outcome {
    let t = Instant::now();
    match min_k(&BoundSearch::default()) {
        Ok(r) => {
            let secs = t.elapsed().as_secs_f64();
            let pass = (186..=190).contains(&r.k_star) && (0.88..=0.91).contains(&r.a_star) && secs < 300.0;
            Outcome {
                pass,
                detail: format!("k*={} a*={:.4} p*={:.6} threshold={} ({secs:.1} s)", r.k_star, r.a_star, r.p_star, r.threshold),
            }
        }
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn analytic_vs_monte_carlo() -> Outcome {
    let settings = [(0.893, 188), (0.7, 150), (0.7, 220), (1.1, 150), (1.1, 220)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &(a, k)) in settings.iter().enumerate() {
        let exact = prob_at(a, k, 1.0).unwrap().value;
        let mc = mc_prob_at(a, k, 1.0, 100_000, 1000 + i as u64).unwrap();
        // Sigma of the estimator at the analytic value: the plug-in estimate
        // collapses to zero when a rare event gets no hits.
        let three_sigma = 3.0 * (exact * (1.0 - exact) / 100_000.0).sqrt();
        let ok = (exact - mc.value).abs() <= three_sigma;
        pass &= ok;
        parts.push(format!("({a},{k}) exact={exact:.3e} mc={:.3e} |diff|={:.1e} 3sigma={three_sigma:.1e}", mc.value, (exact - mc.value).abs()));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut knn_bad = 0;
    for inst in 0..50 {
        let n = rng.random_range(11..=500);
        let k = [1, 3, 5, 10][inst % 4];
        let ps = sample_binomial(Window::square(10.0).unwrap(), n, 5000 + inst as u64).unwrap();
        let g = build_knn_graph(&ps, k).unwrap();
        if common::graph_edges(&g) != common::knn_edges(&common::coords(&ps), k) {
            knn_bad += 1;
        }
    }
    let mut sp_bad = 0;
    for inst in 0..20 {
        let n = rng.random_range(10..=200);
        let k = rng.random_range(1..=5);
        let ps = sample_binomial(Window::square(10.0).unwrap(), n, 6000 + inst as u64).unwrap();
        let g = build_knn_graph(&ps, k).unwrap();
        let edges: Vec<_> = g.edges().collect();
        for src in 0..n {
            let got = sssp(&g, src);
            let want = common::bellman_ford(n, &edges, src);
            if (0..n).any(|v| !common::rel_close(got[v], want[v], 1e-9)) {
                sp_bad += 1;
                break;
            }
        }
    }
    Outcome {
        pass: knn_bad == 0 && sp_bad == 0,
        detail: format!("kNN mismatches {knn_bad}/50, shortest-path mismatches {sp_bad}/20"),
    }
}

fn table1_reproduction() -> Outcome {
    let t = Instant::now();
    let dir = out_dir();
    let cfg = Settings { seed: Some(1), out: Some(dir.path().into()), ..Default::default() }
        .resolve(Experiment::Table1)
        .unwrap();
    let r = harness::run_table1(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, k, want) in common::TABLE1_REFERENCE {
        let got = r.cell(n, k).unwrap().mean_avg;
        let ok = (got / want - 1.0).abs() <= 0.15;
        pass &= ok;
        parts.push(format!("{n}/{k}: {got:.3} vs {want} ({:+.1}%)", 100.0 * (got / want - 1.0)));
    }
    for n in [500, 1000] {
        let m: Vec<f64> = (3..=5).map(|k| r.cell(n, k).unwrap().mean_avg).collect();
        if !(m[0] > m[1] && m[1] > m[2]) {
            pass = false;
            parts.push(format!("n={n} not decreasing in k"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    Outcome { pass, detail: format!("{} ({secs:.1} s)", parts.join("; ")) }
}

fn fit_reproduction() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for base in [1u64, 101] {
        let dir = out_dir();
        let cfg = Settings { seed: Some(base), out: Some(dir.path().into()), ..Default::default() }
            .resolve(Experiment::FitSweep)
            .unwrap();
        let r = harness::run_fit_sweep(&cfg).unwrap();
        let ok = (4.0..=6.0).contains(&r.a_fit);
        pass &= ok;
        parts.push(format!("base seed {base}: a_fit={:.3}", r.a_fit));
    }
    let synthetic: Vec<(u32, f64)> = (3..=13).map(|k| (k, 1.0 + 5.0 / f64::from(k * k))).collect();
    let s = sweep_k_fit(&synthetic).unwrap().a_fit;
    pass &= (s - 5.0).abs() < 1e-9;
    parts.push(format!("synthetic a_fit={s}"));
    Outcome { pass, detail: parts.join("; ") }
}

fn coupling_cfg(tiles: usize, seeds: Vec<u64>, dir: &tempfile::TempDir) -> harness::ExperimentConfig {
    Settings {
        seeds: Some(seeds),
        tiles_x: Some(tiles),
        tiles_y: Some(tiles),
        out: Some(dir.path().into()),
        ..Default::default()
    }
    .resolve(Experiment::CouplingVerify)
    .unwrap()
}

fn coupling_verification() -> Outcome {
    let t = Instant::now();
    let dir = out_dir();
    let cfg = coupling_cfg(20, vec![1], &dir);
    let (run, _) = coupling_run(&cfg, 1).unwrap();
    let c = &run.report;
    let within = (c.open_fraction - run.analytic_p).abs() <= 3.0 * run.sigma;
    let above = run.analytic_p > 0.59 && c.open_fraction > 0.59 - 3.0 * run.sigma;
    let valid = c.adjacent_pairs_checked >= 50 && c.valid_paths == c.adjacent_pairs_checked;
    let ratio = c.max_hop_ratio <= c.c_tiles_estimate;
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: within && above && valid && ratio && secs < 900.0,
        detail: format!(
            "{} points, open={:.4} analytic={:.4} sigma={:.4}; valid {}/{}; max hop ratio {:.3} <= c_tiles {:.3} ({secs:.1} s)",
            c.points,
            c.open_fraction,
            run.analytic_p,
            run.sigma,
            c.valid_paths,
            c.adjacent_pairs_checked,
            c.max_hop_ratio,
            c.c_tiles_estimate
        ),
    }
}

fn geometry_properties() -> Outcome {
    let g = lens_geometry();
    let s400 = scan_geometry(g, 400);
    let s800 = scan_geometry(g, 800);
    let scans = s400.passed() && s800.passed();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let disc_err = 2.0 * std::f64::consts::PI / g.angles() as f64;
    let mut violations = 0;
    for _ in 0..100_000 {
        let q = (rng.random_range(-1.0..6.0), rng.random_range(-4.0..4.0));
        let cx = if rng.random_bool(0.5) { 0.0 } else { 4.0 };
        let r = rng.random::<f64>().sqrt();
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let p = (cx + r * th.cos(), r * th.sin());
        if common::margin(q, p) < g.min_margin(Point::new(q.0, q.1)) - disc_err {
            violations += 1;
        }
    }
    let fine = g.lens_stats(2000).unwrap().area;
    let coarse = g.lens_stats(1000).unwrap().area;
    let change = (fine - coarse).abs() / fine;
    // The reference points must keep their regions as well.
    let refs_ok = RegionId::ALL.iter().all(|&r| g.classify(r.reference_center()) == Some(r));
    Outcome {
        pass: scans && violations == 0 && change < 0.005 && refs_ok,
        detail: format!(
            "scan 400: {} overlaps/{} escapes, scan 800: {} overlaps/{} escapes; interior probes below boundary min: {violations}/100000; \
             area {fine:.5} a^2, halving change {:.4}%",
            s400.overlaps,
            s400.escapes,
            s800.overlaps,
            s800.escapes,
            100.0 * change
        ),
    }
}

fn desk_scale_tail() -> Outcome {
    let dir = out_dir();
    let seeds: Vec<u64> = (1..=10).collect();
    let mut alphas = Vec::new();
    let mut trend = Vec::new();
    for tiles in [15, 25] {
        let cfg = coupling_cfg(tiles, seeds.clone(), &dir);
        let runs: Vec<_> = seeds.iter().map(|&s| coupling_run(&cfg, s).unwrap().0).collect();
        alphas.push(mean(&runs.iter().map(|r| r.report.alpha_hat).collect::<Vec<_>>()));
        let first = &runs[0].report;
        trend.push((first.trend_spearman, first.trend_p_value));
    }
    let no_trend = trend.iter().all(|&(_, p)| p >= 0.05);
    let finite = alphas.iter().all(|a| a.is_finite() && *a >= 1.0);
    let stable = (alphas[0] - alphas[1]).abs() <= 0.2 * alphas[1];
    Outcome {
        pass: no_trend && finite && stable,
        detail: format!(
            "decile trend (seed 1): 15x15 rho={:.3} p={:.3}, 25x25 rho={:.3} p={:.3}; mean alpha_hat over seeds 1-10: 15x15 {:.3}, 25x25 {:.3} ({:+.1}%)",
            trend[0].0,
            trend[0].1,
            trend[1].0,
            trend[1].1,
            alphas[0],
            alphas[1],
            100.0 * (alphas[0] / alphas[1] - 1.0)
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("bound reproduction", bound_reproduction),
        ("analytic vs Monte Carlo", analytic_vs_monte_carlo),
        ("oracle equivalence", oracle_equivalence),
        ("distortion table", table1_reproduction),
        ("k-sweep fit", fit_reproduction),
        ("coupling verification", coupling_verification),
        ("tile geometry", geometry_properties),
        ("desk-scale distortion tail", desk_scale_tail),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if o.pass {
            passed += 1;
        }
        println!("criterion {} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
