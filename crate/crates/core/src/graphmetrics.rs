//! Components, shortest paths and metric distortion of kNN graphs, plus the
//! `1 + a/k^2` least-squares fit of average distortion against `k`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nngraph::NNGraph;
use crate::pointproc::{Point, PointSet, Window};
use crate::rng::{stream_rng, streams};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    /// Dense labels numbered in order of each component's smallest member.
    pub fn labeling(mut self) -> ComponentLabeling {
        let n = self.parent.len();
        let mut root_label = vec![u32::MAX; n];
        let mut label = Vec::with_capacity(n);
        let mut sizes = Vec::new();
        for v in 0..n {
            let r = self.find(v);
            if root_label[r] == u32::MAX {
                root_label[r] = sizes.len() as u32;
                sizes.push(0);
            }
            let l = root_label[r];
            sizes[l as usize] += 1;
            label.push(l);
        }
        ComponentLabeling { label, sizes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub label: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Label of the largest component; ties go to the lower label.
    pub fn largest(&self) -> Option<u32> {
        self.sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(l, _)| l as u32)
    }

    pub fn members(&self, l: u32) -> Vec<usize> {
        (0..self.label.len()).filter(|&v| self.label[v] == l).collect()
    }
}

pub fn components(g: &NNGraph) -> ComponentLabeling {
    let mut uf = UnionFind::new(g.n());
    for (u, v, _) in g.edges() {
        uf.union(u, v);
    }
    uf.labeling()
}

/// Vertices inside `inner` that belong to the component with the most
/// vertices inside `inner` (graph-wide components).
pub fn observation_set(ps: &PointSet, labeling: &ComponentLabeling, inner: &Window) -> Vec<usize> {
    let inside = inside_vertices(ps, inner);
    let mut counts = vec![0usize; labeling.count()];
    for &v in &inside {
        counts[labeling.label[v] as usize] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l as u32);
    match best {
        Some(l) => inside.into_iter().filter(|&v| labeling.label[v] == l).collect(),
        None => Vec::new(),
    }
}

fn inside_vertices(ps: &PointSet, inner: &Window) -> Vec<usize> {
    ps.points()
        .iter()
        .enumerate()
        .filter(|(_, p)| inner.contains(**p))
        .map(|(i, _)| i)
        .collect()
}

/// How the observed component is formed from the points of the inner window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    /// Largest component of the subgraph induced on the inner-window points;
    /// distances are measured inside that subgraph.
    #[default]
    Induced,
    /// Inner-window members of the full-graph component with most members
    /// inside; distances are measured in the full graph.
    Full,
}

impl std::str::FromStr for ObservationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "induced" => Ok(Self::Induced),
            "full" => Ok(Self::Full),
            _ => Err(invalid(format!("unknown observation mode {s:?}"))),
        }
    }
}

/// Result of applying the inner-window protocol to one sample.
#[derive(Debug, Clone)]
pub struct Observation {
    pub mode: ObservationMode,
    /// Observed vertices (global indices, ascending).
    pub vertices: Vec<usize>,
    /// Number of points inside the inner window.
    pub inside: usize,
}

impl Observation {
    /// Share of inner-window points that made it into the observed component.
    pub fn fraction(&self) -> f64 {
        if self.inside == 0 {
            0.0
        } else {
            self.vertices.len() as f64 / self.inside as f64
        }
    }
}

pub fn observe(g: &NNGraph, ps: &PointSet, inner: &Window, mode: ObservationMode) -> Observation {
    let inside = inside_vertices(ps, inner);
    let vertices = match mode {
        ObservationMode::Full => observation_set(ps, &components(g), inner),
        ObservationMode::Induced => {
            let h = g.induced(&inside);
            let lab = components(&h);
            match lab.largest() {
                Some(l) => lab.members(l).into_iter().map(|i| inside[i]).collect(),
                None => Vec::new(),
            }
        }
    };
    Observation { mode, vertices, inside: inside.len() }
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other.cost.total_cmp(&self.cost).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`; unreachable vertices get `f64::INFINITY`.
pub fn sssp(g: &NNGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(State { cost: 0.0, node: source });
    while let Some(State { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for (next, w) in g.neighbors(node) {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(State { cost: c, node: next });
            }
        }
    }
    dist
}

/// Aggregates of graph-distance / Euclidean-distance over vertex pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionStats {
    pub avg: f64,
    pub max: f64,
    pub pct_le_2: f64,
    pub pct_le_2x_avg: f64,
    pub pairs: u64,
}

impl DistortionStats {
    fn from_ratios(ratios: &[f64]) -> Self {
        let pairs = ratios.len() as u64;
        let avg = ratios.iter().sum::<f64>() / pairs as f64;
        let max = ratios.iter().copied().fold(f64::MIN, f64::max);
        let pct = |t: f64| 100.0 * ratios.iter().filter(|&&r| r <= t).count() as f64 / pairs as f64;
        Self { avg, max, pct_le_2: pct(2.0), pct_le_2x_avg: pct(2.0 * avg), pairs }
    }
}

fn pair_ratio(d: f64, e: f64, u: usize, v: usize) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::Precondition(format!("vertices {u} and {v} are not connected")));
    }
    if e == 0.0 {
        return if d == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Precondition(format!("vertices {u} and {v} coincide but are not adjacent")))
        };
    }
    Ok(d / e)
}

/// Ratios for all pairs of `vertices` on graph `g` whose vertex positions are
/// `pos`. `labels` maps graph vertices to the ids reported in errors.
fn all_pair_ratios(g: &NNGraph, pos: &[Point], vertices: &[usize], labels: &[usize]) -> Result<Vec<f64>> {
    let per_source: Vec<Result<Vec<f64>>> = vertices
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let dist = sssp(g, s);
            vertices[i + 1..]
                .iter()
                .map(|&t| pair_ratio(dist[t], pos[s].dist(pos[t]), labels[s], labels[t]))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(vertices.len() * vertices.len().saturating_sub(1) / 2);
    for r in per_source {
        out.extend(r?);
    }
    Ok(out)
}

/// Exact all-pairs distortion statistics over `vertices`, which must be
/// pairwise connected in `g`.
pub fn distortion_stats(g: &NNGraph, ps: &PointSet, vertices: &[usize]) -> Result<DistortionStats> {
    if vertices.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 vertices, got {}", vertices.len())));
    }
    let ids: Vec<usize> = (0..g.n()).collect();
    let ratios = all_pair_ratios(g, ps.points(), vertices, &ids)?;
    Ok(DistortionStats::from_ratios(&ratios))
}

/// Distortion over `m` uniformly sampled distinct-vertex pairs (with replacement).
pub fn distortion_stats_sampled(
    g: &NNGraph,
    ps: &PointSet,
    vertices: &[usize],
    m: usize,
    seed: u64,
) -> Result<DistortionStats> {
    if vertices.len() < 2 || m == 0 {
        return Err(Error::Precondition("need at least 2 vertices and 1 pair".into()));
    }
    let mut rng = stream_rng(seed, streams::PAIR_SAMPLING);
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .map(|_| {
            let i = rng.random_range(0..vertices.len());
            let mut j = rng.random_range(0..vertices.len() - 1);
            if j >= i {
                j += 1;
            }
            (vertices[i], vertices[j])
        })
        .collect();
    pairs.sort_unstable();
    let groups: Vec<&[(usize, usize)]> = pairs.chunk_by(|a, b| a.0 == b.0).collect();
    let per_source: Vec<Result<Vec<f64>>> = groups
        .par_iter()
        .map(|grp| {
            let dist = sssp(g, grp[0].0);
            grp.iter()
                .map(|&(s, t)| pair_ratio(dist[t], ps.point(s).dist(ps.point(t)), s, t))
                .collect()
        })
        .collect();
    let mut ratios = Vec::with_capacity(m);
    for r in per_source {
        ratios.extend(r?);
    }
    Ok(DistortionStats::from_ratios(&ratios))
}

/// Distortion of an observation, measured on the graph its mode prescribes.
/// `sample_pairs` switches from exact all-pairs to sampled pairs.
pub fn observation_distortion(
    g: &NNGraph,
    ps: &PointSet,
    obs: &Observation,
    sample_pairs: Option<(usize, u64)>,
) -> Result<DistortionStats> {
    match (obs.mode, sample_pairs) {
        (ObservationMode::Full, None) => distortion_stats(g, ps, &obs.vertices),
        (ObservationMode::Full, Some((m, seed))) => distortion_stats_sampled(g, ps, &obs.vertices, m, seed),
        (ObservationMode::Induced, sp) => {
            let h = g.induced(&obs.vertices);
            let pts: Vec<Point> = obs.vertices.iter().map(|&v| ps.point(v)).collect();
            let local = PointSet::from_points(pts, *ps.window(), ps.seed())?;
            let all: Vec<usize> = (0..h.n()).collect();
            match sp {
                None => {
                    if all.len() < 2 {
                        return Err(Error::Precondition(format!("need at least 2 vertices, got {}", all.len())));
                    }
                    let ratios = all_pair_ratios(&h, local.points(), &all, &obs.vertices)?;
                    Ok(DistortionStats::from_ratios(&ratios))
                }
                Some((m, seed)) => distortion_stats_sampled(&h, &local, &all, m, seed),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a_fit: f64,
    pub rss: f64,
    pub points_used: usize,
}

impl FitResult {
    pub fn curve(&self, k: f64) -> f64 {
        1.0 + self.a_fit / (k * k)
    }
}

/// Least-squares `a` in `avg_k ≈ 1 + a / k^2`, in closed form.
pub fn sweep_k_fit(samples: &[(u32, f64)]) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(invalid("no samples to fit"));
    }
    let mut ks: Vec<u32> = samples.iter().map(|s| s.0).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < 2 {
        return Err(invalid("fit needs at least 2 distinct k values"));
    }
    if let Some(s) = samples.iter().find(|s| s.0 == 0 || !(s.1 >= 1.0) || !s.1.is_finite()) {
        return Err(invalid(format!("bad fit sample k={} avg={}", s.0, s.1)));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(k, avg) in samples {
        let x = 1.0 / (k as f64 * k as f64);
        num += (avg - 1.0) * x;
        den += x * x;
    }
    let a_fit = num / den;
    let rss = samples
        .iter()
        .map(|&(k, avg)| {
            let r = avg - 1.0 - a_fit / (k as f64 * k as f64);
            r * r
        })
        .sum();
    Ok(FitResult { a_fit, rss, points_used: samples.len() })
}
