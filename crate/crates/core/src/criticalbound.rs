//! Probability of the tile event and the search for the smallest `k` whose
//! optimized tile probability beats the site-percolation threshold.
//!
//! With disjoint regions, the Poisson counts in the five discs, the four
//! lenses and the rest of the tile are independent. Inclusion–exclusion over
//! the set of empty regions, grouped by how many discs (`c` for the centre
//! disc, `j` side discs) and lenses (`e`) are empty, gives
//!
//! ```text
//! P = sum_{c,j,e} (-1)^(c+j+e) C(4,j) C(4,e)
//!       * exp(-lambda((c+j)A_C + e A_E))
//!       * F_K(lambda(100a^2 - (c+j)A_C - e A_E))
//! ```
//!
//! where `F_K` is the Poisson CDF at `K = floor(k/2)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pointproc::{poisson_count, Point};
use crate::rng::{stream_rng, streams};
use crate::tiles::geometry::{lens_geometry, lens_stats, scan_geometry, DEFAULT_AREA_RESOLUTION};

/// Threshold used for the headline bound.
pub const SITE_THRESHOLD: f64 = 0.59;
/// More precise site-percolation threshold on the square lattice.
pub const SITE_THRESHOLD_PRECISE: f64 = 0.592746;

const REGIONS: u32 = 9;
const MC_CHUNK: usize = 4096;

/// Running sum with Neumaier compensation.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `P(N <= k)` for `N ~ Poisson(mu)`.
///
/// Terms are accumulated in the log domain relative to the largest term, so
/// neither `exp(-mu)` nor `mu^j / j!` can under- or overflow.
pub fn poisson_cdf(k: u64, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(invalid(format!("Poisson mean must be finite and >= 0, got {mu}")));
    }
    if mu == 0.0 {
        return Ok(1.0);
    }
    let ln_mu = mu.ln();
    // Terms increase up to j = floor(mu), so the maximum over 0..=k is at min(k, floor(mu)).
    let mode = (mu.floor() as u64).min(k);
    let log_term = |j: u64| -mu + j as f64 * ln_mu - ln_factorial(j);
    let peak = log_term(mode);
    let mut acc = Neumaier::default();
    let mut lt = -mu;
    for j in 0..=k {
        if j > 0 {
            lt += ln_mu - (j as f64).ln();
        }
        // Re-anchor periodically so the running log does not drift.
        if j % 64 == 0 {
            lt = log_term(j);
        }
        let rel = lt - peak;
        acc.add(rel.exp());
        if j > mode && rel < -745.0 {
            break;
        }
    }
    Ok((peak.exp() * acc.value()).min(1.0))
}

fn ln_factorial(j: u64) -> f64 {
    statrs::function::gamma::ln_gamma(j as f64 + 1.0)
}

/// Region areas entering the event probability, for one tile size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionAreas {
    pub a: f64,
    /// Area of each disc.
    pub disc: f64,
    /// Area of each lens.
    pub lens: f64,
}

impl RegionAreas {
    /// Checks the areas are consistent with nine disjoint regions inside a
    /// `10a x 10a` tile.
    pub fn new(a: f64, disc: f64, lens: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid(format!("a must be positive, got {a}")));
        }
        if !(disc > 0.0) || !(lens > 0.0) {
            return Err(invalid("region areas must be positive"));
        }
        let tile = 100.0 * a * a;
        if 5.0 * disc + 4.0 * lens > tile * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "regions cover {} but the tile has area {tile}; they cannot be disjoint",
                5.0 * disc + 4.0 * lens
            )));
        }
        Ok(Self { a, disc, lens })
    }

    /// Areas from the tile geometry. Fails if a grid scan of the geometry
    /// finds overlapping regions or a lens leaving its tile.
    pub fn from_geometry(a: f64) -> Result<Self> {
        static SCAN_OK: OnceLock<std::result::Result<(), String>> = OnceLock::new();
        SCAN_OK
            .get_or_init(|| {
                let scan = scan_geometry(lens_geometry(), 400);
                if scan.passed() {
                    Ok(())
                } else {
                    Err(format!("{} overlapping and {} escaping samples", scan.overlaps, scan.escapes))
                }
            })
            .clone()
            .map_err(Error::Geometry)?;
        Self::new(a, PI * a * a, lens_stats().area * a * a)
    }

    pub fn tile(&self) -> f64 {
        100.0 * self.a * self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProb {
    pub value: f64,
    pub method: ProbMethod,
    /// Three standard errors for Monte Carlo, 0 for the analytic value.
    pub ci_halfwidth: f64,
    pub a: f64,
    pub k: u32,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn binom4(i: u32) -> f64 {
    [1.0, 4.0, 6.0, 4.0, 1.0][i as usize]
}

/// Inclusion–exclusion partial sums by number of regions forced empty:
/// entry `m` holds the sum over all subsets of size `<= m`. The last entry
/// is the probability itself.
pub fn inclusion_exclusion_partial_sums(k: u32, lambda: f64, areas: &RegionAreas) -> Result<[f64; 10]> {
    check_lambda(lambda)?;
    let cap = u64::from(k / 2);
    let mut by_size = [Neumaier::default(); 10];
    for c in 0..=1u32 {
        for j in 0..=4u32 {
            for e in 0..=4u32 {
                let nd = f64::from(c + j);
                let empty = nd * areas.disc + f64::from(e) * areas.lens;
                let rest = (areas.tile() - empty).max(0.0);
                let sign = if (c + j + e) % 2 == 0 { 1.0 } else { -1.0 };
                let term = sign * binom4(j) * binom4(e) * (-lambda * empty).exp() * poisson_cdf(cap, lambda * rest)?;
                by_size[(c + j + e) as usize].add(term);
            }
        }
    }
    let mut out = [0.0; 10];
    let mut acc = Neumaier::default();
    for (m, s) in by_size.iter().enumerate() {
        acc.add(s.value());
        out[m] = acc.value();
    }
    Ok(out)
}

/// Exact probability of the tile event for the given region areas.
pub fn prob_at_with(k: u32, lambda: f64, areas: &RegionAreas) -> Result<EventProb> {
    check_lambda(lambda)?;
    // Nine occupied regions need at least nine points.
    let value = if k / 2 < REGIONS {
        0.0
    } else {
        inclusion_exclusion_partial_sums(k, lambda, areas)?[9].clamp(0.0, 1.0)
    };
    Ok(EventProb { value, method: ProbMethod::Analytic, ci_halfwidth: 0.0, a: areas.a, k, lambda })
}

/// Exact probability of the tile event using the built-in tile geometry.
pub fn prob_at(a: f64, k: u32, lambda: f64) -> Result<EventProb> {
    prob_at_with(k, lambda, &RegionAreas::from_geometry(a)?)
}

/// Monte Carlo estimate of the tile event probability from `trials`
/// independent single tiles. Trials are split into fixed chunks, each with
/// its own random stream, so the estimate does not depend on thread count.
pub fn mc_prob_at(a: f64, k: u32, lambda: f64, trials: usize, seed: u64) -> Result<EventProb> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if trials < 1000 {
        return Err(invalid(format!("at least 1000 trials required, got {trials}")));
    }
    let geom = lens_geometry();
    let cap = u64::from(k / 2);
    let mu = lambda * 100.0 * a * a;
    let chunks = trials.div_ceil(MC_CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, streams::MC_TILES + c as u64);
            let n_trials = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut hits = 0;
            for _ in 0..n_trials {
                let n = poisson_count(&mut rng, mu);
                if n > cap || n < u64::from(REGIONS) {
                    continue;
                }
                let mut seen = 0u16;
                for _ in 0..n {
                    // Tile-local coordinates in units of a.
                    let q = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                    if let Some(r) = geom.classify(q) {
                        seen |= 1 << r.index();
                    }
                }
                if seen == (1 << REGIONS) - 1 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(EventProb {
        value: p,
        method: ProbMethod::MonteCarlo,
        ci_halfwidth: 3.0 * (p * (1.0 - p) / trials as f64).sqrt(),
        a,
        k,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AOptimum {
    pub a: f64,
    pub p: f64,
}

/// Maximizes the tile probability over `a` in `range` with a coarse grid
/// followed by two refinements at 10x finer steps around the incumbent.
/// No unimodality is assumed inside each grid.
pub fn optimize_a(k: u32, lambda: f64, range: (f64, f64), coarse_step: f64) -> Result<AOptimum> {
    check_lambda(lambda)?;
    let (lo, hi) = range;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(invalid(format!("a range must be positive and nonempty, got [{lo}, {hi}]")));
    }
    if !(coarse_step > 0.0) {
        return Err(invalid(format!("step must be positive, got {coarse_step}")));
    }
    let unit_lens = lens_stats().area;
    RegionAreas::from_geometry(1.0)?;
    let eval = |a: f64| -> Result<f64> {
        Ok(prob_at_with(k, lambda, &RegionAreas::new(a, PI * a * a, unit_lens * a * a)?)?.value)
    };
    let grid_best = |from: f64, to: f64, step: f64| -> Result<AOptimum> {
        let n = ((to - from) / step + 1e-9).floor() as usize;
        let vals: Vec<Result<AOptimum>> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let a = from + i as f64 * step;
                Ok(AOptimum { a, p: eval(a)? })
            })
            .collect();
        let mut best: Option<AOptimum> = None;
        for v in vals {
            let v = v?;
            if best.is_none_or(|b| v.p > b.p) {
                best = Some(v);
            }
        }
        Ok(best.expect("grid has at least one point"))
    };
    let mut best = grid_best(lo, hi, coarse_step)?;
    let mut step = coarse_step;
    for _ in 0..2 {
        let from = (best.a - step).max(lo);
        let to = (best.a + step).min(hi);
        step /= 10.0;
        let cand = grid_best(from, to, step)?;
        if cand.p > best.p {
            best = cand;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub k: u32,
    pub a_star_k: f64,
    pub p_star_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub k_star: u32,
    pub a_star: f64,
    pub p_star: f64,
    pub threshold: f64,
    pub lambda: f64,
    /// Lens area at `a_star`.
    pub e_area: f64,
    pub e_area_resolution: usize,
    /// Relative change of the lens area when the resolution is halved.
    pub e_area_halving_change: f64,
    /// Every `k` evaluated, in increasing order.
    pub scan: Vec<ScanEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSearch {
    pub threshold: f64,
    pub lambda: f64,
    pub k_range: (u32, u32),
    pub a_range: (f64, f64),
    pub coarse_step: f64,
}

impl Default for BoundSearch {
    fn default() -> Self {
        Self { threshold: SITE_THRESHOLD, lambda: 1.0, k_range: (1, 400), a_range: (0.5, 1.5), coarse_step: 0.005 }
    }
}

/// Smallest `k` in range whose optimized tile probability exceeds the
/// threshold. Uses binary search (the probability is nondecreasing in `k`)
/// followed by a linear confirmation over `k* - 3 ..= k* + 3`.
pub fn min_k(search: &BoundSearch) -> Result<BoundResult> {
    let BoundSearch { threshold, lambda, k_range: (k_lo, k_hi), a_range, coarse_step } = *search;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if k_lo > k_hi {
        return Err(invalid(format!("empty k range [{k_lo}, {k_hi}]")));
    }
    let mut scan: std::collections::BTreeMap<u32, AOptimum> = Default::default();
    let mut eval = |k: u32| -> Result<AOptimum> {
        if let Some(v) = scan.get(&k) {
            return Ok(*v);
        }
        let v = optimize_a(k, lambda, a_range, coarse_step)?;
        scan.insert(k, v);
        Ok(v)
    };

    let top = eval(k_hi)?;
    let found = if top.p > threshold {
        let (mut lo, mut hi) = (k_lo, k_hi);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if eval(mid)?.p > threshold {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let from = lo.saturating_sub(3).max(k_lo);
        let to = lo.saturating_add(3).min(k_hi);
        let mut first = None;
        for k in from..=to {
            if eval(k)?.p > threshold && first.is_none() {
                first = Some(k);
            }
        }
        if first != Some(lo) {
            log::warn!("confirmation scan moved k* from {lo} to {first:?}; probability is not monotone here");
        }
        first
    } else {
        None
    };

    let Some(k_star) = found else {
        let (&best_k, best) = scan
            .iter()
            .max_by(|a, b| a.1.p.total_cmp(&b.1.p))
            .expect("at least one k evaluated");
        return Err(Error::NotFound { threshold, k_min: k_lo, k_max: k_hi, best_k, best_a: best.a, best_p: best.p });
    };
    let opt = scan[&k_star];
    let fine = lens_stats().area;
    let coarse = lens_geometry().lens_stats(DEFAULT_AREA_RESOLUTION / 2)?.area;
    Ok(BoundResult {
        k_star,
        a_star: opt.a,
        p_star: opt.p,
        threshold,
        lambda,
        e_area: fine * opt.a * opt.a,
        e_area_resolution: DEFAULT_AREA_RESOLUTION,
        e_area_halving_change: (fine - coarse).abs() / fine,
        scan: scan.into_iter().map(|(k, v)| ScanEntry { k, a_star_k: v.a, p_star_k: v.p }).collect(),
    })
}
