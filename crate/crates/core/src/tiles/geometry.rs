//! Geometry of a single tile: five discs of radius `a` and four lens
//! regions, in tile-local coordinates (tile centre at the origin, side `10a`).
//!
//! Everything is computed once in units of `a` and rescaled; the construction
//! is scale invariant.
//!
//! The right lens `E_r` is the set of points `q` with
//!
//! * `|q - p| <= r_max(p)` for every `p` on the boundary circles of `C0` and
//!   `C_r`, where `r_max(p)` is the distance from `p` to the boundary of the
//!   `20a x 10a` rectangle formed by the tile and its right neighbour;
//! * `q.x > |q.y|` (its own quarter of the tile);
//! * `q` outside the closed discs `C0` and `C_r`.
//!
//! The disc-family intersection alone reaches into `C0` and into the upper
//! and lower lenses; the last two conditions make the nine regions disjoint.
//! The other lenses are rotations of `E_r` by multiples of 90 degrees.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pointproc::Point;

/// Boundary angles per disc in the default discretization.
pub const DEFAULT_ANGLES: usize = 4096;
/// A point is rejected only if some margin falls below `-MARGIN_TOL` (units of `a`).
pub const MARGIN_TOL: f64 = 1e-12;
/// Resolution used for the cached lens area.
pub const DEFAULT_AREA_RESOLUTION: usize = 2000;

const GRID_CELLS: usize = 64;
// Proven superset of E_r in units of a: x <= 3 from p = (-1, 0), x >= 0 from
// p = (5, 0), |y| <= 3 from p = (0, -1) and (0, 1). All four are sample
// points whenever the angle count is a multiple of 4.
const BOX: [f64; 4] = [-1e-6, -3.0 - 1e-6, 3.0 + 1e-6, 3.0 + 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionId {
    C0,
    Cl,
    Cr,
    Ct,
    Cb,
    El,
    Er,
    Et,
    Eb,
}

impl RegionId {
    pub const ALL: [RegionId; 9] = [
        RegionId::C0,
        RegionId::Cl,
        RegionId::Cr,
        RegionId::Ct,
        RegionId::Cb,
        RegionId::El,
        RegionId::Er,
        RegionId::Et,
        RegionId::Eb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_disc(self) -> bool {
        self.index() < 5
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionId::C0 => "C0",
            RegionId::Cl => "Cl",
            RegionId::Cr => "Cr",
            RegionId::Ct => "Ct",
            RegionId::Cb => "Cb",
            RegionId::El => "El",
            RegionId::Er => "Er",
            RegionId::Et => "Et",
            RegionId::Eb => "Eb",
        }
    }

    /// Disc centre, or the lens area centroid, in units of `a`.
    pub fn reference_center(self) -> Point {
        let e = lens_stats().centroid_x;
        match self {
            RegionId::C0 => Point::new(0.0, 0.0),
            RegionId::Cr => Point::new(4.0, 0.0),
            RegionId::Ct => Point::new(0.0, 4.0),
            RegionId::Cl => Point::new(-4.0, 0.0),
            RegionId::Cb => Point::new(0.0, -4.0),
            RegionId::Er => Point::new(e, 0.0),
            RegionId::Et => Point::new(0.0, e),
            RegionId::El => Point::new(-e, 0.0),
            RegionId::Eb => Point::new(0.0, -e),
        }
    }
}

impl std::str::FromStr for RegionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RegionId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown region {s:?}")))
    }
}

/// Lattice direction from a tile to one of its four neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Right,
    Top,
    Left,
    Bottom,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Top, Direction::Left, Direction::Bottom];

    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::Right => (1, 0),
            Direction::Top => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Bottom => (0, -1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Right => Direction::Left,
            Direction::Top => Direction::Bottom,
            Direction::Left => Direction::Right,
            Direction::Bottom => Direction::Top,
        }
    }

    pub fn disc(self) -> RegionId {
        match self {
            Direction::Right => RegionId::Cr,
            Direction::Top => RegionId::Ct,
            Direction::Left => RegionId::Cl,
            Direction::Bottom => RegionId::Cb,
        }
    }

    pub fn lens(self) -> RegionId {
        match self {
            Direction::Right => RegionId::Er,
            Direction::Top => RegionId::Et,
            Direction::Left => RegionId::El,
            Direction::Bottom => RegionId::Eb,
        }
    }

    /// Maps a point of this direction's lens frame onto the `E_r` frame.
    #[inline]
    fn to_right_frame(self, q: Point) -> Point {
        match self {
            Direction::Right => q,
            Direction::Top => Point::new(q.y, -q.x),
            Direction::Left => Point::new(-q.x, -q.y),
            Direction::Bottom => Point::new(-q.y, q.x),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Constraint {
    px: f64,
    py: f64,
    r: f64,
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    In,
    Out,
    Boundary { start: u32, len: u32 },
}

/// Discretized disc family defining `E_r` (units of `a`), with a cell grid
/// that answers membership exactly as the full constraint scan would.
#[derive(Debug)]
pub struct LensGeometry {
    angles: usize,
    cons: Vec<Constraint>,
    cells: Vec<Cell>,
    active: Vec<u32>,
    cw: f64,
    ch: f64,
}

/// `r_max(p)` in units of `a`: distance from `p` to the boundary of
/// `[-5, 15] x [-5, 5]`.
#[inline]
pub fn rect_clearance(px: f64, py: f64) -> f64 {
    (px + 5.0).min(15.0 - px).min(5.0 - py).min(5.0 + py)
}

impl LensGeometry {
    pub fn new(angles: usize) -> Result<Self> {
        if angles < 8 || angles % 4 != 0 {
            return Err(invalid(format!("angle count {angles} must be a multiple of 4, >= 8")));
        }
        let mut cons = Vec::with_capacity(2 * angles);
        for cx in [0.0, 4.0] {
            for i in 0..angles {
                let th = std::f64::consts::TAU * i as f64 / angles as f64;
                let (s, c) = th.sin_cos();
                let (px, py) = (cx + c, s);
                cons.push(Constraint { px, py, r: rect_clearance(px, py) });
            }
        }
        let cw = (BOX[2] - BOX[0]) / GRID_CELLS as f64;
        let ch = (BOX[3] - BOX[1]) / GRID_CELLS as f64;
        let classified: Vec<(Cell, Vec<u32>)> = (0..GRID_CELLS * GRID_CELLS)
            .into_par_iter()
            .map(|c| {
                let (ix, iy) = (c % GRID_CELLS, c / GRID_CELLS);
                let x0 = BOX[0] + ix as f64 * cw;
                let y0 = BOX[1] + iy as f64 * ch;
                classify_cell(&cons, x0, y0, x0 + cw, y0 + ch)
            })
            .collect();
        let mut cells = Vec::with_capacity(classified.len());
        let mut active = Vec::new();
        for (cell, act) in classified {
            cells.push(match cell {
                Cell::Boundary { .. } => {
                    let start = active.len() as u32;
                    active.extend_from_slice(&act);
                    Cell::Boundary { start, len: act.len() as u32 }
                }
                other => other,
            });
        }
        Ok(Self { angles, cons, cells, active, cw, ch })
    }

    pub fn angles(&self) -> usize {
        self.angles
    }

    /// Smallest `r_max(p) - |q - p|` over the discretized boundary family.
    pub fn min_margin(&self, q: Point) -> f64 {
        self.cons
            .iter()
            .map(|c| c.r - (q.x - c.px).hypot(q.y - c.py))
            .fold(f64::INFINITY, f64::min)
    }

    /// Disc-family condition by full scan.
    pub fn in_family_exact(&self, q: Point) -> bool {
        self.min_margin(q) >= -MARGIN_TOL
    }

    /// Disc-family condition via the cell grid; same verdicts as the full scan.
    #[inline]
    pub fn in_family(&self, q: Point) -> bool {
        if q.x < BOX[0] || q.x > BOX[2] || q.y < BOX[1] || q.y > BOX[3] {
            return false;
        }
        let ix = (((q.x - BOX[0]) / self.cw) as usize).min(GRID_CELLS - 1);
        let iy = (((q.y - BOX[1]) / self.ch) as usize).min(GRID_CELLS - 1);
        match self.cells[iy * GRID_CELLS + ix] {
            Cell::In => true,
            Cell::Out => false,
            Cell::Boundary { start, len } => self.active[start as usize..(start + len) as usize]
                .iter()
                .all(|&i| {
                    let c = self.cons[i as usize];
                    c.r - (q.x - c.px).hypot(q.y - c.py) >= -MARGIN_TOL
                }),
        }
    }

    /// Membership in `E_r` (units of `a`).
    #[inline]
    pub fn in_right_lens(&self, q: Point) -> bool {
        q.x > q.y.abs() && !in_unit_disc(q, 0.0, 0.0) && !in_unit_disc(q, 4.0, 0.0) && self.in_family(q)
    }

    pub fn in_right_lens_exact(&self, q: Point) -> bool {
        q.x > q.y.abs() && !in_unit_disc(q, 0.0, 0.0) && !in_unit_disc(q, 4.0, 0.0) && self.in_family_exact(q)
    }

    /// Membership of a tile-local point (units of `a`) in `region`.
    pub fn contains(&self, q: Point, region: RegionId) -> bool {
        match region {
            RegionId::C0 => in_unit_disc(q, 0.0, 0.0),
            RegionId::Cr => in_unit_disc(q, 4.0, 0.0),
            RegionId::Ct => in_unit_disc(q, 0.0, 4.0),
            RegionId::Cl => in_unit_disc(q, -4.0, 0.0),
            RegionId::Cb => in_unit_disc(q, 0.0, -4.0),
            RegionId::Er => self.in_right_lens(q),
            RegionId::Et => self.in_right_lens(Direction::Top.to_right_frame(q)),
            RegionId::El => self.in_right_lens(Direction::Left.to_right_frame(q)),
            RegionId::Eb => self.in_right_lens(Direction::Bottom.to_right_frame(q)),
        }
    }

    /// The region containing `q` (units of `a`), if any. Regions are disjoint.
    #[inline]
    pub fn classify(&self, q: Point) -> Option<RegionId> {
        for d in Direction::ALL {
            let (ox, oy) = d.offset();
            if in_unit_disc(q, 4.0 * ox as f64, 4.0 * oy as f64) {
                return Some(d.disc());
            }
        }
        if in_unit_disc(q, 0.0, 0.0) {
            return Some(RegionId::C0);
        }
        // Only the lens whose quarter contains q can hold it.
        let d = if q.x > q.y.abs() {
            Direction::Right
        } else if q.y > q.x.abs() {
            Direction::Top
        } else if -q.x > q.y.abs() {
            Direction::Left
        } else if -q.y > q.x.abs() {
            Direction::Bottom
        } else {
            return None;
        };
        self.in_right_lens(d.to_right_frame(q)).then_some(d.lens())
    }

    /// Grid integration of `E_r` over its bounding box at `resolution^2` cells.
    pub fn lens_stats(&self, resolution: usize) -> Result<LensStats> {
        if resolution < 100 {
            return Err(invalid(format!("resolution {resolution} < 100")));
        }
        let (x0, y0, x1, y1) = (0.0, -3.0, 3.0, 3.0);
        let dx = (x1 - x0) / resolution as f64;
        let dy = (y1 - y0) / resolution as f64;
        let rows: Vec<(u64, f64, [f64; 4])> = (0..resolution)
            .into_par_iter()
            .map(|iy| {
                let y = y0 + (iy as f64 + 0.5) * dy;
                let mut count = 0u64;
                let mut sx = 0.0;
                let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
                for ix in 0..resolution {
                    let x = x0 + (ix as f64 + 0.5) * dx;
                    if self.in_right_lens(Point::new(x, y)) {
                        count += 1;
                        sx += x;
                        bb = [bb[0].min(x), bb[1].min(y), bb[2].max(x), bb[3].max(y)];
                    }
                }
                (count, sx, bb)
            })
            .collect();
        let mut count = 0u64;
        let mut sx = 0.0;
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (c, s, b) in rows {
            count += c;
            sx += s;
            bb = [bb[0].min(b[0]), bb[1].min(b[1]), bb[2].max(b[2]), bb[3].max(b[3])];
        }
        if count == 0 {
            return Err(Error::Geometry("lens region is empty".into()));
        }
        Ok(LensStats {
            resolution,
            area: count as f64 * dx * dy,
            centroid_x: sx / count as f64,
            // Cell centres understate the extent by at most one cell.
            bbox: [bb[0] - dx, bb[1] - dy, bb[2] + dx, bb[3] + dy],
        })
    }
}

fn classify_cell(cons: &[Constraint], x0: f64, y0: f64, x1: f64, y1: f64) -> (Cell, Vec<u32>) {
    let mut act = Vec::new();
    for (i, c) in cons.iter().enumerate() {
        let fx = (x0 - c.px).abs().max((x1 - c.px).abs());
        let fy = (y0 - c.py).abs().max((y1 - c.py).abs());
        if fx.hypot(fy) <= c.r + MARGIN_TOL {
            continue;
        }
        let nx = (x0 - c.px).max(c.px - x1).max(0.0);
        let ny = (y0 - c.py).max(c.py - y1).max(0.0);
        if nx.hypot(ny) > c.r + MARGIN_TOL {
            return (Cell::Out, Vec::new());
        }
        act.push(i as u32);
    }
    if act.is_empty() {
        (Cell::In, act)
    } else {
        (Cell::Boundary { start: 0, len: 0 }, act)
    }
}

#[inline]
fn in_unit_disc(q: Point, cx: f64, cy: f64) -> bool {
    let (dx, dy) = (q.x - cx, q.y - cy);
    dx * dx + dy * dy <= 1.0
}

/// Area, centroid and bounding box of `E_r` in units of `a` (`a^2` for area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensStats {
    pub resolution: usize,
    pub area: f64,
    pub centroid_x: f64,
    /// `[xmin, ymin, xmax, ymax]`
    pub bbox: [f64; 4],
}

/// The shared default-resolution lens geometry.
pub fn lens_geometry() -> &'static LensGeometry {
    static GEOM: OnceLock<LensGeometry> = OnceLock::new();
    GEOM.get_or_init(|| LensGeometry::new(DEFAULT_ANGLES).expect("default angle count is valid"))
}

/// Cached lens statistics at [`DEFAULT_AREA_RESOLUTION`].
pub fn lens_stats() -> &'static LensStats {
    static STATS: OnceLock<LensStats> = OnceLock::new();
    STATS.get_or_init(|| {
        lens_geometry()
            .lens_stats(DEFAULT_AREA_RESOLUTION)
            .expect("default lens is non-empty")
    })
}

/// Membership of tile-local point `q` (absolute units) in `region` for disc radius `a`.
pub fn region_membership(q: Point, region: RegionId, a: f64) -> Result<bool> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("disc radius a must be positive, got {a}")));
    }
    Ok(lens_geometry().contains(Point::new(q.x / a, q.y / a), region))
}

/// Area of one lens region for disc radius `a`, by grid integration.
pub fn e_region_area(a: f64, resolution: usize) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("disc radius a must be positive, got {a}")));
    }
    let unit = if resolution == DEFAULT_AREA_RESOLUTION {
        lens_stats().area
    } else {
        lens_geometry().lens_stats(resolution)?.area
    };
    Ok(unit * a * a)
}

/// Outcome of a dense grid scan over one tile checking region disjointness
/// and lens containment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryScan {
    pub resolution: usize,
    pub samples: u64,
    pub lens_samples: u64,
    /// Sample points claimed by two or more regions.
    pub overlaps: u64,
    /// Lens sample points outside the tile.
    pub escapes: u64,
}

impl GeometryScan {
    pub fn passed(&self) -> bool {
        self.overlaps == 0 && self.escapes == 0 && self.lens_samples > 0
    }
}

/// Scans `resolution^2` cell centres of the tile, plus a margin band around
/// it, testing every point against all nine regions.
pub fn scan_geometry(geom: &LensGeometry, resolution: usize) -> GeometryScan {
    // Sample [-6, 6]^2 so a lens poking out of the tile would be caught.
    let (lo, hi) = (-6.0, 6.0);
    let step = (hi - lo) / resolution as f64;
    let rows: Vec<(u64, u64, u64, u64)> = (0..resolution)
        .into_par_iter()
        .map(|iy| {
            let y = lo + (iy as f64 + 0.5) * step;
            let mut acc = (0, 0, 0, 0);
            for ix in 0..resolution {
                let q = Point::new(lo + (ix as f64 + 0.5) * step, y);
                acc.0 += 1;
                let hits: Vec<RegionId> = RegionId::ALL.into_iter().filter(|&r| geom.contains(q, r)).collect();
                let lens = hits.iter().any(|r| !r.is_disc());
                if lens {
                    acc.1 += 1;
                    if q.x.abs() >= 5.0 || q.y.abs() >= 5.0 {
                        acc.3 += 1;
                    }
                }
                if hits.len() > 1 {
                    acc.2 += 1;
                }
            }
            acc
        })
        .collect();
    let mut s = GeometryScan { resolution, samples: 0, lens_samples: 0, overlaps: 0, escapes: 0 };
    for r in rows {
        s.samples += r.0;
        s.lens_samples += r.1;
        s.overlaps += r.2;
        s.escapes += r.3;
    }
    s
}
