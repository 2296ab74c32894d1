//! Reference implementations used as test oracles. They are deliberately
//! naive and share no code with the library.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nnperc::nngraph::NNGraph;
use nnperc::pointproc::PointSet;

/// Undirected k-NN edge set by exhaustive sorting, ties broken by index.
pub fn knn_edges(xy: &[(f64, f64)], k: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for i in 0..xy.len() {
        let mut others: Vec<(f64, usize)> = (0..xy.len())
            .filter(|&j| j != i)
            .map(|j| ((xy[i].0 - xy[j].0).powi(2) + (xy[i].1 - xy[j].1).powi(2), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    edges
}

pub fn graph_edges(g: &NNGraph) -> BTreeSet<(usize, usize)> {
    g.edges().map(|(u, v, _)| (u, v)).collect()
}

pub fn coords(ps: &PointSet) -> Vec<(f64, f64)> {
    ps.points().iter().map(|p| (p.x, p.y)).collect()
}

/// Single-source distances by Bellman–Ford relaxation over an edge list.
pub fn bellman_ford(n: usize, edges: &[(usize, usize, f64)], src: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; n];
    d[src] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for &(u, v, w) in edges {
            if d[u] + w < d[v] {
                d[v] = d[u] + w;
                changed = true;
            }
            if d[v] + w < d[u] {
                d[u] = d[v] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Clearance of `(px, py)` from the boundary of the two-tile rectangle
/// `[-5, 15] x [-5, 5]` (units of a).
pub fn clearance(px: f64, py: f64) -> f64 {
    [px + 5.0, 15.0 - px, 5.0 - py, 5.0 + py].into_iter().fold(f64::INFINITY, f64::min)
}

/// `r_max(p) - |q - p|`.
pub fn margin(q: (f64, f64), p: (f64, f64)) -> f64 {
    clearance(p.0, p.1) - (q.0 - p.0).hypot(q.1 - p.1)
}

/// Mean average distortion reported for each (n, k) cell.
pub const TABLE1_REFERENCE: [(usize, u32, f64); 8] = [
    (500, 3, 1.727),
    (500, 4, 1.364),
    (500, 5, 1.204),
    (1000, 3, 1.660),
    (1000, 4, 1.333),
    (1000, 5, 1.172),
    (1500, 4, 1.322),
    (2000, 4, 1.285),
];
