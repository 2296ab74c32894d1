//! Tiling of a point set into `10a x 10a` squares and the induced site
//! percolation on `Z^2`.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::geometry::{lens_geometry, Direction, RegionId};
use crate::error::{invalid, Error, Result};
use crate::graphmetrics::UnionFind;
use crate::pointproc::{Point, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileParams {
    /// Disc radius; the tile side is `10a`.
    pub a: f64,
    pub k: u32,
    pub lambda: f64,
}

impl TileParams {
    pub fn new(a: f64, k: u32, lambda: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid(format!("a must be positive, got {a}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { a, k, lambda })
    }

    /// Per-tile point cap `floor(k/2)`.
    pub fn cap(&self) -> u32 {
        self.k / 2
    }

    pub fn side(&self) -> f64 {
        10.0 * self.a
    }
}

/// Integer lattice coordinates of a tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileCoord {
    pub x: usize,
    pub y: usize,
}

impl TileCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn l1(self, o: TileCoord) -> usize {
        self.x.abs_diff(o.x) + self.y.abs_diff(o.y)
    }

    /// Direction of an adjacent tile `o`, if it is adjacent.
    pub fn direction_to(self, o: TileCoord) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| {
            let (dx, dy) = d.offset();
            self.x as isize + dx == o.x as isize && self.y as isize + dy == o.y as isize
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileState {
    pub open: bool,
    pub count: u32,
    /// Points per region, indexed by `RegionId::index()`.
    pub region_counts: [u32; 9],
    /// Per region, the point nearest the region's reference centre.
    pub anchors: [Option<u32>; 9],
}

impl TileState {
    fn empty() -> Self {
        Self { open: false, count: 0, region_counts: [0; 9], anchors: [None; 9] }
    }

    /// Representative point; defined for open tiles only.
    pub fn rep(&self) -> Option<usize> {
        if self.open {
            self.anchor(RegionId::C0)
        } else {
            None
        }
    }

    pub fn anchor(&self, r: RegionId) -> Option<usize> {
        self.anchors[r.index()].map(|v| v as usize)
    }
}

/// Per-tile event outcomes over a `nx x ny` block of tiles whose lower-left
/// corner is `origin`. Tiles are half-open squares.
#[derive(Debug, Clone)]
pub struct TileLattice {
    pub params: TileParams,
    pub origin: Point,
    pub nx: usize,
    pub ny: usize,
    tiles: Vec<TileState>,
}

impl TileLattice {
    pub fn tile(&self, t: TileCoord) -> &TileState {
        &self.tiles[t.y * self.nx + t.x]
    }

    pub fn coords(&self) -> impl Iterator<Item = TileCoord> + '_ {
        (0..self.ny).flat_map(move |y| (0..self.nx).map(move |x| TileCoord::new(x, y)))
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn is_open(&self, t: TileCoord) -> bool {
        self.tile(t).open
    }

    pub fn open_count(&self) -> usize {
        self.tiles.iter().filter(|t| t.open).count()
    }

    pub fn open_fraction(&self) -> f64 {
        if self.tiles.is_empty() {
            0.0
        } else {
            self.open_count() as f64 / self.tiles.len() as f64
        }
    }

    /// Centre of tile `t` in window coordinates.
    pub fn center(&self, t: TileCoord) -> Point {
        let s = self.params.side();
        Point::new(
            self.origin.x + (t.x as f64 + 0.5) * s,
            self.origin.y + (t.y as f64 + 0.5) * s,
        )
    }

    pub fn neighbor(&self, t: TileCoord, d: Direction) -> Option<TileCoord> {
        let (dx, dy) = d.offset();
        let x = t.x as isize + dx;
        let y = t.y as isize + dy;
        (x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny)
            .then(|| TileCoord::new(x as usize, y as usize))
    }

    /// Area covered by the lattice.
    pub fn area(&self) -> f64 {
        let s = self.params.side();
        self.nx as f64 * self.ny as f64 * s * s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tx,ty,open,rep_idx,count")?;
        for t in self.coords() {
            let s = self.tile(t);
            let rep = s.rep().map(|r| r.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", t.x, t.y, s.open as u8, rep, s.count)?;
        }
        Ok(())
    }
}

/// Evaluates the tile event on every whole tile of `ps`'s window; a partial
/// strip at the top or right edge is trimmed.
pub fn evaluate_tiles(ps: &PointSet, params: TileParams) -> Result<TileLattice> {
    let w = ps.window();
    let side = params.side();
    // Tolerate windows built as `n * 10a` in floating point.
    let nx = (w.width() / side + 1e-9).floor() as usize;
    let ny = (w.height() / side + 1e-9).floor() as usize;
    let origin = Point::new(w.xmin, w.ymin);
    let mut tiles = vec![TileState::empty(); nx * ny];
    let geom = lens_geometry();
    let a = params.a;
    let mut best_d2 = vec![[f64::INFINITY; 9]; nx * ny];

    for (i, &p) in ps.points().iter().enumerate() {
        let fx = ((p.x - origin.x) / side).floor();
        let fy = ((p.y - origin.y) / side).floor();
        if fx < 0.0 || fy < 0.0 || fx >= nx as f64 || fy >= ny as f64 {
            continue;
        }
        let (tx, ty) = (fx as usize, fy as usize);
        let ti = ty * nx + tx;
        let c = Point::new(origin.x + (fx + 0.5) * side, origin.y + (fy + 0.5) * side);
        let q = Point::new((p.x - c.x) / a, (p.y - c.y) / a);
        let tile = &mut tiles[ti];
        tile.count += 1;
        if let Some(r) = geom.classify(q) {
            let ri = r.index();
            tile.region_counts[ri] += 1;
            // Points arrive in index order, so strict < keeps the lowest index on ties.
            let d2 = q.dist2(r.reference_center());
            if d2 < best_d2[ti][ri] {
                best_d2[ti][ri] = d2;
                tile.anchors[ri] = Some(i as u32);
            }
        }
    }
    let cap = params.cap();
    for t in &mut tiles {
        t.open = t.count <= cap && t.region_counts.iter().all(|&c| c >= 1);
    }
    Ok(TileLattice { params, origin, nx, ny, tiles })
}

/// Open clusters under 4-neighbour adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeClusters {
    /// Cluster label per tile (row-major); `None` for closed tiles.
    pub label: Vec<Option<u32>>,
    pub sizes: Vec<usize>,
    nx: usize,
}

impl LatticeClusters {
    pub fn label_of(&self, t: TileCoord) -> Option<u32> {
        self.label[t.y * self.nx + t.x]
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Largest cluster; ties go to the lower label.
    pub fn largest(&self) -> Option<u32> {
        self.sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(l, _)| l as u32)
    }

    pub fn members(&self, l: u32) -> Vec<TileCoord> {
        self.label
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == Some(l))
            .map(|(i, _)| TileCoord::new(i % self.nx, i / self.nx))
            .collect()
    }
}

pub fn lattice_clusters(lat: &TileLattice) -> LatticeClusters {
    let mut uf = UnionFind::new(lat.len());
    for t in lat.coords() {
        if !lat.is_open(t) {
            continue;
        }
        for d in [Direction::Right, Direction::Top] {
            if let Some(u) = lat.neighbor(t, d) {
                if lat.is_open(u) {
                    uf.union(t.y * lat.nx + t.x, u.y * lat.nx + u.x);
                }
            }
        }
    }
    let mut root_label = vec![u32::MAX; lat.len()];
    let mut label = vec![None; lat.len()];
    let mut sizes = Vec::new();
    for t in lat.coords() {
        if !lat.is_open(t) {
            continue;
        }
        let i = t.y * lat.nx + t.x;
        let r = uf.find(i);
        if root_label[r] == u32::MAX {
            root_label[r] = sizes.len() as u32;
            sizes.push(0);
        }
        label[i] = Some(root_label[r]);
        sizes[root_label[r] as usize] += 1;
    }
    LatticeClusters { label, sizes, nx: lat.nx }
}

/// Shortest open path from `t1` to `t2` (BFS, neighbours in right, top, left,
/// bottom order). `None` when they lie in different clusters.
pub fn lattice_path(lat: &TileLattice, t1: TileCoord, t2: TileCoord) -> Result<Option<Vec<TileCoord>>> {
    for t in [t1, t2] {
        if t.x >= lat.nx || t.y >= lat.ny {
            return Err(invalid(format!("tile {t:?} outside {}x{} lattice", lat.nx, lat.ny)));
        }
        if !lat.is_open(t) {
            return Err(Error::Precondition(format!("tile ({}, {}) is closed", t.x, t.y)));
        }
    }
    let idx = |t: TileCoord| t.y * lat.nx + t.x;
    let mut prev = vec![usize::MAX; lat.len()];
    prev[idx(t1)] = idx(t1);
    let mut q = VecDeque::from([t1]);
    while let Some(t) = q.pop_front() {
        if t == t2 {
            break;
        }
        for d in Direction::ALL {
            if let Some(u) = lat.neighbor(t, d) {
                if lat.is_open(u) && prev[idx(u)] == usize::MAX {
                    prev[idx(u)] = idx(t);
                    q.push_back(u);
                }
            }
        }
    }
    if prev[idx(t2)] == usize::MAX {
        return Ok(None);
    }
    let mut path = vec![t2];
    let mut cur = idx(t2);
    while cur != idx(t1) {
        cur = prev[cur];
        path.push(TileCoord::new(cur % lat.nx, cur / lat.nx));
    }
    path.reverse();
    Ok(Some(path))
}

#[cfg(test)]
pub(crate) fn lattice_from_pattern(nx: usize, ny: usize, open: impl Fn(usize, usize) -> bool) -> TileLattice {
    let params = TileParams::new(1.0, 188, 1.0).unwrap();
    let mut tiles = vec![TileState::empty(); nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            tiles[y * nx + x].open = open(x, y);
        }
    }
    TileLattice { params, origin: Point::new(0.0, 0.0), nx, ny, tiles }
}
