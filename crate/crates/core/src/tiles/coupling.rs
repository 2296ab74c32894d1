//! Graph paths that mimic open lattice paths, and the empirical checks built
//! on them.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{lens_stats, Direction, RegionId};
use super::lattice::{lattice_clusters, lattice_path, TileCoord, TileLattice, TileParams};
use crate::error::{Error, Result};
use crate::graphmetrics::sssp;
use crate::nngraph::NNGraph;
use crate::pointproc::PointSet;
use crate::rng::{stream_rng, streams};
use crate::stats::{spearman, spearman_p_greater};

/// Maximum number of Dijkstra sources used for rep-pair sampling.
const MAX_SOURCES: usize = 16;
const DECILES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimicPath {
    pub vertices: Vec<usize>,
    /// Sum of the Euclidean lengths of the hops.
    pub length: f64,
}

/// A hop of the construction that is not an edge of the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub t1: TileCoord,
    pub t2: TileCoord,
    pub missing_edge: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MimicOutcome {
    Path(MimicPath),
    Failed(Witness),
}

impl MimicOutcome {
    pub fn path(&self) -> Option<&MimicPath> {
        match self {
            MimicOutcome::Path(p) => Some(p),
            MimicOutcome::Failed(_) => None,
        }
    }
}

fn anchor(lat: &TileLattice, t: TileCoord, r: RegionId) -> Result<usize> {
    lat.tile(t)
        .anchor(r)
        .ok_or_else(|| Error::Precondition(format!("tile ({}, {}) has no point in {}", t.x, t.y, r.name())))
}

/// Follows a sequence of adjacent open tiles through the graph.
pub fn mimic_along(g: &NNGraph, lat: &TileLattice, tiles: &[TileCoord]) -> Result<MimicOutcome> {
    let first = *tiles.first().ok_or_else(|| crate::error::invalid("empty tile path"))?;
    let mut vertices = vec![anchor(lat, first, RegionId::C0)?];
    let mut length = 0.0;
    for w in tiles.windows(2) {
        let (t, u) = (w[0], w[1]);
        let d = t
            .direction_to(u)
            .ok_or_else(|| crate::error::invalid(format!("tiles {t:?} and {u:?} are not adjacent")))?;
        let back = d.opposite();
        let hops = [
            anchor(lat, t, d.lens())?,
            anchor(lat, t, d.disc())?,
            anchor(lat, u, back.disc())?,
            anchor(lat, u, back.lens())?,
            anchor(lat, u, RegionId::C0)?,
        ];
        for v in hops {
            let prev = *vertices.last().unwrap();
            match g.edge_length(prev, v) {
                Some(l) => length += l,
                None => return Ok(MimicOutcome::Failed(Witness { t1: t, t2: u, missing_edge: [prev, v] })),
            }
            vertices.push(v);
        }
    }
    Ok(MimicOutcome::Path(MimicPath { vertices, length }))
}

/// Graph path between the representatives of `t1` and `t2` tracing the
/// shortest open lattice path. Errors if the tiles are not in one open cluster.
pub fn mimic_path(g: &NNGraph, lat: &TileLattice, t1: TileCoord, t2: TileCoord) -> Result<MimicOutcome> {
    let tiles = lattice_path(lat, t1, t2)?
        .ok_or_else(|| Error::Precondition(format!("tiles {t1:?} and {t2:?} are in different open clusters")))?;
    mimic_along(g, lat, &tiles)
}

fn box_gap_max(a: [f64; 4], b: [f64; 4]) -> f64 {
    let dx = (b[2] - a[0]).abs().max((a[2] - b[0]).abs());
    let dy = (b[3] - a[1]).abs().max((a[3] - b[1]).abs());
    dx.hypot(dy)
}

/// Upper bound on (mimic path length) / (rep distance) for adjacent tiles:
/// the longest possible hop between consecutive region bounding boxes,
/// summed over the five hops, over the shortest rep separation `8a`.
/// Scale invariant, so `a` only gets validated.
pub fn estimate_c_tiles(a: f64) -> Result<f64> {
    TileParams::new(a, 0, 1.0)?;
    let e = lens_stats().bbox;
    // All boxes in the frame of the left tile, units of a.
    let c0 = [-1.0, -1.0, 1.0, 1.0];
    let cr = [3.0, -1.0, 5.0, 1.0];
    let cl_next = [5.0, -1.0, 7.0, 1.0];
    let el_next = [10.0 - e[2], e[1], 10.0 - e[0], e[3]];
    let c0_next = [9.0, -1.0, 11.0, 1.0];
    let chain = [c0, e, cr, cl_next, el_next, c0_next];
    let total: f64 = chain.windows(2).map(|w| box_gap_max(w[0], w[1])).sum();
    Ok(total / 8.0)
}

/// Representatives in the largest open cluster per unit area.
pub fn rep_point_density(lat: &TileLattice) -> f64 {
    let area = lat.area();
    if area == 0.0 {
        return 0.0;
    }
    let c = lattice_clusters(lat);
    c.largest().map(|l| c.sizes[l as usize] as f64 / area).unwrap_or(0.0)
}

/// One sampled pair of representatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepPair {
    pub t1: TileCoord,
    pub t2: TileCoord,
    pub euclid: f64,
    pub lattice_l1: usize,
    pub lattice_hops: usize,
    /// Mimic length over Euclidean distance; `None` if the mimic path failed.
    pub mimic_distortion: Option<f64>,
    pub dijkstra_distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub params: TileParams,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub points: usize,
    pub open_tiles: usize,
    pub open_fraction: f64,
    pub largest_cluster_tiles: usize,
    pub adjacent_pairs_checked: usize,
    pub valid_paths: usize,
    /// Largest (mimic length) / (rep distance) over valid adjacent pairs.
    pub max_hop_ratio: f64,
    pub c_tiles_estimate: f64,
    pub rep_pairs_checked: usize,
    pub rep_pair_failures: usize,
    /// Largest mimic distortion over rep pairs.
    pub alpha_hat: f64,
    /// Largest shortest-path distortion over the same pairs.
    pub alpha_hat_dijkstra: f64,
    /// Pairs where the mimic path came out shorter than the shortest path.
    pub mimic_below_dijkstra: usize,
    /// Largest ratio of open-lattice hops to plain lattice distance.
    pub rho_hat: f64,
    /// Pairs violating `L1 <= sqrt(2) * euclid / (10a) + 2`.
    pub l1_bound_violations: usize,
    /// Maximum mimic distortion per Euclidean-distance decile.
    pub decile_maxima: Vec<f64>,
    pub trend_spearman: f64,
    /// One-sided p-value for an upward trend of the decile maxima.
    pub trend_p_value: f64,
    pub rep_point_density: f64,
    pub witnesses: Vec<Witness>,
    pub rep_pairs: Vec<RepPair>,
}

impl CouplingReport {
    pub fn valid_fraction(&self) -> f64 {
        if self.adjacent_pairs_checked == 0 {
            1.0
        } else {
            self.valid_paths as f64 / self.adjacent_pairs_checked as f64
        }
    }
}

/// Checks the coupling on up to `budget` adjacent open pairs (scan order) and
/// up to `budget` rep pairs sampled from the largest open cluster.
pub fn verify_coupling(
    g: &NNGraph,
    ps: &PointSet,
    lat: &TileLattice,
    budget: usize,
    seed: u64,
) -> Result<CouplingReport> {
    if g.n() != ps.len() {
        return Err(Error::Precondition(format!("graph has {} vertices but point set has {}", g.n(), ps.len())));
    }
    let c_tiles = estimate_c_tiles(lat.params.a)?;

    let mut adjacent = Vec::new();
    'scan: for t in lat.coords() {
        if !lat.is_open(t) {
            continue;
        }
        for d in [Direction::Right, Direction::Top] {
            if adjacent.len() >= budget {
                break 'scan;
            }
            if let Some(u) = lat.neighbor(t, d) {
                if lat.is_open(u) {
                    adjacent.push((t, u));
                }
            }
        }
    }
    let mut witnesses = Vec::new();
    let mut valid = 0;
    let mut max_hop_ratio: f64 = 0.0;
    for &(t, u) in &adjacent {
        match mimic_along(g, lat, &[t, u])? {
            MimicOutcome::Path(p) => {
                valid += 1;
                let (r1, r2) = (lat.tile(t).rep().unwrap(), lat.tile(u).rep().unwrap());
                max_hop_ratio = max_hop_ratio.max(p.length / ps.point(r1).dist(ps.point(r2)));
            }
            MimicOutcome::Failed(w) => {
                log::warn!("mimic hop missing between {:?} and {:?}: edge {:?}", w.t1, w.t2, w.missing_edge);
                witnesses.push(w);
            }
        }
    }

    let clusters = lattice_clusters(lat);
    let members = clusters.largest().map(|l| clusters.members(l)).unwrap_or_default();
    let rep_pairs = sample_rep_pairs(g, ps, lat, &members, budget, seed)?;

    let mut alpha_hat: f64 = 0.0;
    let mut alpha_dij: f64 = 0.0;
    let mut rho_hat: f64 = 0.0;
    let mut below = 0;
    let mut l1_bound = 0;
    let mut failures = 0;
    let side = lat.params.side();
    for p in &rep_pairs {
        alpha_dij = alpha_dij.max(p.dijkstra_distortion);
        match p.mimic_distortion {
            Some(m) => {
                alpha_hat = alpha_hat.max(m);
                if m < p.dijkstra_distortion * (1.0 - 1e-12) {
                    below += 1;
                }
            }
            None => failures += 1,
        }
        if p.lattice_l1 > 0 {
            rho_hat = rho_hat.max(p.lattice_hops as f64 / p.lattice_l1 as f64);
        }
        if p.lattice_l1 as f64 > std::f64::consts::SQRT_2 * p.euclid / side + 2.0 {
            l1_bound += 1;
        }
    }
    let decile_maxima = decile_maxima(&rep_pairs);
    let idx: Vec<f64> = (0..decile_maxima.len()).map(|i| i as f64).collect();
    let (trend_spearman, trend_p_value) = if decile_maxima.len() >= 3 {
        let r = spearman(&idx, &decile_maxima);
        (r, spearman_p_greater(r, decile_maxima.len()))
    } else {
        (0.0, 1.0)
    };

    Ok(CouplingReport {
        params: lat.params,
        tiles_x: lat.nx,
        tiles_y: lat.ny,
        points: ps.len(),
        open_tiles: lat.open_count(),
        open_fraction: lat.open_fraction(),
        largest_cluster_tiles: members.len(),
        adjacent_pairs_checked: adjacent.len(),
        valid_paths: valid,
        max_hop_ratio,
        c_tiles_estimate: c_tiles,
        rep_pairs_checked: rep_pairs.len(),
        rep_pair_failures: failures,
        alpha_hat,
        alpha_hat_dijkstra: alpha_dij,
        mimic_below_dijkstra: below,
        rho_hat,
        l1_bound_violations: l1_bound,
        decile_maxima,
        trend_spearman,
        trend_p_value,
        rep_point_density: rep_point_density(lat),
        witnesses,
        rep_pairs,
    })
}

fn sample_rep_pairs(
    g: &NNGraph,
    ps: &PointSet,
    lat: &TileLattice,
    members: &[TileCoord],
    budget: usize,
    seed: u64,
) -> Result<Vec<RepPair>> {
    if members.len() < 2 || budget == 0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(seed, streams::PAIR_SAMPLING);
    let n_src = MAX_SOURCES.min(members.len()).min(budget);
    let per_src = budget.div_ceil(n_src);
    let mut plan = Vec::with_capacity(n_src);
    for s in sample(&mut rng, members.len(), n_src) {
        let src = members[s];
        let targets: Vec<TileCoord> = (0..per_src)
            .map(|_| loop {
                let t = members[rng.random_range(0..members.len())];
                if t != src {
                    break t;
                }
            })
            .collect();
        plan.push((src, targets));
    }
    let per_source: Vec<Result<Vec<RepPair>>> = plan
        .par_iter()
        .map(|(src, targets)| {
            let r1 = lat.tile(*src).rep().unwrap();
            let dist = sssp(g, r1);
            targets
                .iter()
                .map(|&t| {
                    let r2 = lat.tile(t).rep().unwrap();
                    let euclid = ps.point(r1).dist(ps.point(r2));
                    let tiles = lattice_path(lat, *src, t)?.expect("same cluster");
                    let mimic = mimic_along(g, lat, &tiles)?;
                    Ok(RepPair {
                        t1: *src,
                        t2: t,
                        euclid,
                        lattice_l1: src.l1(t),
                        lattice_hops: tiles.len() - 1,
                        mimic_distortion: mimic.path().map(|p| p.length / euclid),
                        dijkstra_distortion: dist[r2] / euclid,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(budget);
    for r in per_source {
        out.extend(r?);
    }
    out.truncate(budget);
    Ok(out)
}

fn decile_maxima(pairs: &[RepPair]) -> Vec<f64> {
    let mut v: Vec<(f64, f64)> = pairs.iter().filter_map(|p| p.mimic_distortion.map(|m| (p.euclid, m))).collect();
    if v.len() < DECILES {
        return Vec::new();
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    (0..DECILES)
        .map(|d| {
            let lo = d * v.len() / DECILES;
            let hi = (d + 1) * v.len() / DECILES;
            v[lo..hi].iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}
