//! Undirected k-nearest-neighbour graphs over a uniform grid index.
//!
//! Neighbour order is `(squared distance, index)` ascending everywhere, so the
//! grid search and the exhaustive oracle agree exactly, ties included.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pointproc::{Point, PointSet};

const MAX_CELLS: usize = 1 << 26;

/// Bucket grid over a point set's window. Cell `(cx, cy)` of point `p` is
/// `floor((p - window_min) / cell_size)`, clamped so the closed upper edge
/// falls into the last row/column.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    // CSR buckets: points of cell c are entries[starts[c]..starts[c + 1]].
    starts: Vec<usize>,
    entries: Vec<u32>,
}

impl GridIndex {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = (((p.x - self.x0) / self.cell_size).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((p.y - self.y0) / self.cell_size).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    pub fn bucket(&self, cx: usize, cy: usize) -> &[u32] {
        let c = cy * self.nx + cx;
        &self.entries[self.starts[c]..self.starts[c + 1]]
    }

    /// Non-empty buckets as `((cx, cy), indices)`.
    pub fn buckets(&self) -> impl Iterator<Item = ((usize, usize), &[u32])> + '_ {
        (0..self.ny)
            .flat_map(move |cy| (0..self.nx).map(move |cx| (cx, cy)))
            .map(|(cx, cy)| ((cx, cy), self.bucket(cx, cy)))
            .filter(|(_, b)| !b.is_empty())
    }
}

pub fn build_index(ps: &PointSet, cell_size: f64) -> Result<GridIndex> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(invalid(format!("cell size must be positive, got {cell_size}")));
    }
    let w = ps.window();
    let nx = ((w.width() / cell_size).ceil() as usize).max(1);
    let ny = ((w.height() / cell_size).ceil() as usize).max(1);
    if nx.saturating_mul(ny) > MAX_CELLS {
        return Err(invalid(format!("cell size {cell_size} gives a {nx}x{ny} grid")));
    }
    let mut idx = GridIndex {
        cell_size,
        x0: w.xmin,
        y0: w.ymin,
        nx,
        ny,
        starts: vec![0; nx * ny + 1],
        entries: vec![0; ps.len()],
    };
    let cells: Vec<usize> = ps
        .points()
        .iter()
        .map(|&p| {
            let (cx, cy) = idx.cell_of(p);
            cy * nx + cx
        })
        .collect();
    for &c in &cells {
        idx.starts[c + 1] += 1;
    }
    for c in 0..nx * ny {
        idx.starts[c + 1] += idx.starts[c];
    }
    let mut fill = idx.starts.clone();
    for (i, &c) in cells.iter().enumerate() {
        idx.entries[fill[c]] = i as u32;
        fill[c] += 1;
    }
    Ok(idx)
}

/// Cell size giving about one point per cell.
pub fn default_cell_size(ps: &PointSet) -> f64 {
    (ps.window().area() / ps.len().max(1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug)]
struct Cand {
    d2: f64,
    idx: u32,
}

#[inline]
fn cand_cmp(a: &Cand, b: &Cand) -> Ordering {
    a.d2.total_cmp(&b.d2).then(a.idx.cmp(&b.idx))
}

/// Sorted buffer holding the best `k` candidates seen so far.
struct Best {
    k: usize,
    items: Vec<Cand>,
}

impl Best {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn offer(&mut self, c: Cand) {
        if self.items.len() == self.k {
            if cand_cmp(&c, &self.items[self.k - 1]) != Ordering::Less {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .binary_search_by(|x| cand_cmp(x, &c))
            .unwrap_or_else(|e| e);
        self.items.insert(pos, c);
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_d2(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.d2)
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(invalid(format!("k = {k} must satisfy 1 <= k <= n - 1 with n = {n}")));
    }
    Ok(())
}

/// The `k` nearest points to `i` (excluding `i`), ordered by `(distance, index)`.
pub fn knn_query(index: &GridIndex, ps: &PointSet, i: usize, k: usize) -> Result<Vec<usize>> {
    check_k(ps.len(), k)?;
    if i >= ps.len() {
        return Err(invalid(format!("vertex {i} out of range")));
    }
    Ok(knn_unchecked(index, ps.points(), i, k))
}

fn knn_unchecked(index: &GridIndex, pts: &[Point], i: usize, k: usize) -> Vec<usize> {
    let q = pts[i];
    let (hx, hy) = index.cell_of(q);
    let (hx, hy) = (hx as isize, hy as isize);
    let (nx, ny) = (index.nx as isize, index.ny as isize);
    let cs = index.cell_size;
    let mut best = Best::new(k);
    let max_ring = hx.max(nx - 1 - hx).max(hy).max(ny - 1 - hy);

    let visit = |cx: isize, cy: isize, best: &mut Best| {
        if cx < 0 || cy < 0 || cx >= nx || cy >= ny {
            return;
        }
        for &j in index.bucket(cx as usize, cy as usize) {
            if j as usize != i {
                best.offer(Cand { d2: q.dist2(pts[j as usize]), idx: j });
            }
        }
    };

    for r in 0..=max_ring {
        if r == 0 {
            visit(hx, hy, &mut best);
        } else {
            for cx in hx - r..=hx + r {
                visit(cx, hy - r, &mut best);
                visit(cx, hy + r, &mut best);
            }
            for cy in hy - r + 1..=hy + r - 1 {
                visit(hx - r, cy, &mut best);
                visit(hx + r, cy, &mut best);
            }
        }
        if best.full() {
            // Every unvisited cell lies outside the (2r+1)^2 block around home.
            let left = q.x - (index.x0 + (hx - r) as f64 * cs);
            let right = index.x0 + (hx + r + 1) as f64 * cs - q.x;
            let down = q.y - (index.y0 + (hy - r) as f64 * cs);
            let up = index.y0 + (hy + r + 1) as f64 * cs - q.y;
            let gap = left.min(right).min(down).min(up).max(0.0);
            // Strict: an unvisited point at exactly the gap could win the index tie-break.
            if best.worst_d2() < gap * gap {
                break;
            }
        }
    }
    best.items.into_iter().map(|c| c.idx as usize).collect()
}

/// Undirected weighted graph in forward-star layout; each vertex's neighbour
/// list is sorted by neighbour index.
#[derive(Debug, Clone, PartialEq)]
pub struct NNGraph {
    k: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
}

impl NNGraph {
    /// Builds from an undirected edge list; duplicates and orientation are
    /// normalized, self loops rejected.
    pub fn from_edges(n: usize, k: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut und: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len());
        for &(u, v, w) in edges {
            if u == v {
                return Err(invalid(format!("self loop at {u}")));
            }
            if u >= n || v >= n {
                return Err(invalid(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            und.push((a as u32, b as u32, w));
        }
        Ok(Self::from_normalized(n, k, und))
    }

    fn from_normalized(n: usize, k: usize, mut und: Vec<(u32, u32, f64)>) -> Self {
        und.par_sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        und.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let mut deg = vec![0usize; n + 1];
        for &(a, b, _) in &und {
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
        for v in 0..n {
            deg[v + 1] += deg[v];
        }
        let offsets = deg;
        let m2 = offsets[n];
        let mut targets = vec![0u32; m2];
        let mut lengths = vec![0f64; m2];
        let mut fill = offsets.clone();
        // Edges are sorted by (a, b): pushing b into a's list in this order and
        // a into b's list keeps both lists sorted by neighbour index.
        for &(a, b, w) in &und {
            let (a, b) = (a as usize, b as usize);
            targets[fill[b]] = a as u32;
            lengths[fill[b]] = w;
            fill[b] += 1;
        }
        for &(a, b, w) in &und {
            let (a, b) = (a as usize, b as usize);
            targets[fill[a]] = b as u32;
            lengths[fill[a]] = w;
            fill[a] += 1;
        }
        // Lists of b got the smaller-index neighbours first, then the larger
        // ones; list of a likewise. Both passes are index ordered, so each list
        // is sorted once both are done.
        debug_assert!((0..n).all(|v| targets[offsets[v]..offsets[v + 1]].windows(2).all(|w| w[0] < w[1])));
        Self { k, offsets, targets, lengths }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.lengths[r])
            .map(|(&t, &w)| (t as usize, w))
    }

    pub fn neighbor_indices(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn edge_length(&self, u: usize, v: usize) -> Option<f64> {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()]
            .binary_search(&(v as u32))
            .ok()
            .map(|i| self.lengths[r.start + i])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_length(u, v).is_some()
    }

    /// Edges as `(u, v, length)` with `u < v`, in `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// Subgraph induced on `vertices`; vertex `i` of the result is `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> NNGraph {
        let mut local = vec![u32::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i as u32;
        }
        let mut und = Vec::new();
        for (i, &v) in vertices.iter().enumerate() {
            for (u, w) in self.neighbors(v) {
                let j = local[u];
                if j != u32::MAX && (i as u32) < j {
                    und.push((i as u32, j, w));
                }
            }
        }
        Self::from_normalized(vertices.len(), self.k, und)
    }

    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v,length")?;
        for (u, v, len) in self.edges() {
            writeln!(w, "{u},{v},{len:?}")?;
        }
        Ok(())
    }

    pub fn meta(&self, seed: u64) -> GraphMeta {
        GraphMeta { n: self.n(), k: self.k, seed }
    }
}

fn union_graph(ps: &PointSet, k: usize, lists: Vec<Vec<usize>>) -> NNGraph {
    let pts = ps.points();
    let mut und: Vec<(u32, u32, f64)> = Vec::with_capacity(lists.len() * k);
    for (u, list) in lists.into_iter().enumerate() {
        for v in list {
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            und.push((a as u32, b as u32, pts[a].dist(pts[b])));
        }
    }
    NNGraph::from_normalized(ps.len(), k, und)
}

/// Undirected union of every vertex's k nearest neighbours, via the grid index.
pub fn build_knn_graph(ps: &PointSet, k: usize) -> Result<NNGraph> {
    build_knn_graph_with_cell(ps, k, default_cell_size(ps))
}

pub fn build_knn_graph_with_cell(ps: &PointSet, k: usize, cell_size: f64) -> Result<NNGraph> {
    if ps.len() < 2 {
        return Err(invalid(format!("need at least 2 points, got {}", ps.len())));
    }
    check_k(ps.len(), k)?;
    let index = build_index(ps, cell_size)?;
    let pts = ps.points();
    let lists: Vec<Vec<usize>> = (0..ps.len())
        .into_par_iter()
        .map(|i| knn_unchecked(&index, pts, i, k))
        .collect();
    Ok(union_graph(ps, k, lists))
}

/// Exhaustive O(n^2) construction with the same tie rule. Test oracle.
pub fn brute_force_knn_graph(ps: &PointSet, k: usize) -> Result<NNGraph> {
    if ps.len() < 2 {
        return Err(invalid(format!("need at least 2 points, got {}", ps.len())));
    }
    check_k(ps.len(), k)?;
    let pts = ps.points();
    let lists = (0..ps.len())
        .map(|i| brute_force_knn(pts, i, k))
        .collect();
    Ok(union_graph(ps, k, lists))
}

pub(crate) fn brute_force_knn(pts: &[Point], i: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<Cand> = (0..pts.len())
        .filter(|&j| j != i)
        .map(|j| Cand { d2: pts[i].dist2(pts[j]), idx: j as u32 })
        .collect();
    all.sort_by(cand_cmp);
    all.truncate(k);
    all.into_iter().map(|c| c.idx as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointproc::{sample_binomial, sample_poisson, Window};

    fn line3() -> PointSet {
        let w = Window::new(-1.0, -1.0, 4.0, 1.0).unwrap();
        PointSet::from_points(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(3.0, 0.0)],
            w,
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_point_index() {
        let ps = PointSet::from_points(vec![Point::new(0.3, 0.3)], Window::square(1.0).unwrap(), 0).unwrap();
        let idx = build_index(&ps, 0.25).unwrap();
        let b: Vec<_> = idx.buckets().collect();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].1, &[0]);
        assert!(build_index(&ps, 0.0).is_err());
        assert!(build_index(&ps, -1.0).is_err());
    }

    #[test]
    fn buckets_partition_indices() {
        let ps = sample_poisson(Window::square(7.0).unwrap(), 3.0, 4).unwrap();
        for cs in [0.3, 1.0, 2.5, 100.0] {
            let idx = build_index(&ps, cs).unwrap();
            let mut all: Vec<u32> = idx.buckets().flat_map(|(_, b)| b.iter().copied()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..ps.len() as u32).collect::<Vec<_>>());
            for ((cx, cy), b) in idx.buckets() {
                for &i in b {
                    assert_eq!(idx.cell_of(ps.point(i as usize)), (cx, cy));
                }
            }
        }
    }

    #[test]
    fn query_independent_of_cell_size() {
        let ps = sample_binomial(Window::square(10.0).unwrap(), 200, 8).unwrap();
        let a = build_index(&ps, 0.5).unwrap();
        let b = build_index(&ps, 2.0).unwrap();
        for i in 0..ps.len() {
            for k in [1, 4, 17] {
                assert_eq!(knn_query(&a, &ps, i, k).unwrap(), knn_query(&b, &ps, i, k).unwrap());
            }
        }
    }

    #[test]
    fn collinear_query() {
        let ps = line3();
        let idx = build_index(&ps, 1.0).unwrap();
        assert_eq!(knn_query(&idx, &ps, 2, 1).unwrap(), vec![1]);
        assert_eq!(knn_query(&idx, &ps, 0, 2).unwrap(), vec![1, 2]);
        assert!(knn_query(&idx, &ps, 0, 3).is_err());
        assert!(knn_query(&idx, &ps, 0, 0).is_err());
    }

    #[test]
    fn query_matches_exhaustive_scan() {
        let ps = sample_binomial(Window::square(22.0).unwrap(), 500, 21).unwrap();
        let idx = build_index(&ps, default_cell_size(&ps)).unwrap();
        for i in 0..ps.len() {
            assert_eq!(knn_query(&idx, &ps, i, 6).unwrap(), brute_force_knn(ps.points(), i, 6));
        }
        assert_eq!(knn_query(&idx, &ps, 3, 499).unwrap().len(), 499);
    }

    #[test]
    fn collinear_graph() {
        let g = build_knn_graph(&line3(), 1).unwrap();
        let e: Vec<_> = g.edges().map(|(u, v, _)| (u, v)).collect();
        assert_eq!(e, vec![(0, 1), (1, 2)]);
        assert_eq!((g.degree(0), g.degree(1), g.degree(2)), (1, 2, 1));
        assert_eq!(g.edge_length(2, 1), Some(2.0));
    }

    #[test]
    fn complete_when_k_is_n_minus_1() {
        let ps = sample_binomial(Window::square(1.0).unwrap(), 9, 2).unwrap();
        let g = build_knn_graph(&ps, 8).unwrap();
        assert_eq!(g.num_edges(), 36);
    }

    #[test]
    fn range_errors() {
        let ps = line3();
        assert!(build_knn_graph(&ps, 0).is_err());
        assert!(build_knn_graph(&ps, 3).is_err());
        assert!(brute_force_knn_graph(&ps, 3).is_err());
        let one = PointSet::from_points(vec![Point::new(0.0, 0.0)], Window::square(1.0).unwrap(), 0).unwrap();
        assert!(build_knn_graph(&one, 1).is_err());
    }

    #[test]
    fn two_points_single_edge() {
        let ps = PointSet::from_points(
            vec![Point::new(0.1, 0.1), Point::new(0.9, 0.5)],
            Window::square(1.0).unwrap(),
            0,
        )
        .unwrap();
        let g = brute_force_knn_graph(&ps, 1).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g, build_knn_graph(&ps, 1).unwrap());
    }

    #[test]
    fn duplicate_coordinates_tie_by_index() {
        // Points 1 and 2 coincide; point 0 sits at distance 1 from both.
        let ps = PointSet::from_points(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(5.0, 0.0)],
            Window::new(-1.0, -1.0, 6.0, 1.0).unwrap(),
            0,
        )
        .unwrap();
        let idx = build_index(&ps, 0.7).unwrap();
        assert_eq!(knn_query(&idx, &ps, 1, 1).unwrap(), vec![2]);
        assert_eq!(knn_query(&idx, &ps, 2, 1).unwrap(), vec![1]);
        // 0 sees 1 and 2 at the same distance; the smaller index wins.
        assert_eq!(knn_query(&idx, &ps, 0, 1).unwrap(), vec![1]);
        let g = build_knn_graph(&ps, 1).unwrap();
        assert_eq!(g.edge_length(1, 2), Some(0.0));
        assert!(g.has_edge(0, 1) && !g.has_edge(0, 2));
        assert_eq!(g, brute_force_knn_graph(&ps, 1).unwrap());
    }

    #[test]
    fn induced_subgraph_keeps_inner_edges() {
        let g = build_knn_graph(&line3(), 1).unwrap();
        let h = g.induced(&[1, 2]);
        assert_eq!(h.n(), 2);
        assert_eq!(h.edges().collect::<Vec<_>>(), vec![(0, 1, 2.0)]);
        let h = g.induced(&[0, 2]);
        assert_eq!(h.num_edges(), 0);
    }

    #[test]
    fn edge_csv_format() {
        let g = build_knn_graph(&line3(), 1).unwrap();
        let mut out = Vec::new();
        g.write_edges_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "u,v,length\n0,1,1.0\n1,2,2.0\n");
        let meta = serde_json::to_value(g.meta(4)).unwrap();
        assert_eq!(meta, serde_json::json!({"n": 3, "k": 1, "seed": 4}));
    }
}
