//! Planar point processes: homogeneous Poisson and fixed-count binomial
//! samples in axis-aligned rectangular windows.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    #[inline]
    pub fn dist2(self, o: Point) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let w = Self { xmin, ymin, xmax, ymax };
        w.validate()?;
        Ok(w)
    }

    /// Square `[0, side]^2`.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, 0.0, side, side)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || !(self.xmax > self.xmin) || !(self.ymax > self.ymin) {
            return Err(invalid(format!("degenerate window {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    /// Concentric window whose sides are `fraction` of this window's sides.
    pub fn centered_fraction(&self, fraction: f64) -> Result<Window> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(invalid(format!("inner fraction {fraction} not in (0, 1]")));
        }
        let c = self.center();
        let hw = 0.5 * fraction * self.width();
        let hh = 0.5 * fraction * self.height();
        Window::new(c.x - hw, c.y - hh, c.x + hw, c.y + hh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SampleMode {
    Poisson { lambda: f64 },
    Binomial { n: usize },
}

/// Immutable sampled point set. Indices are stable vertex identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
    window: Window,
    seed: u64,
    mode: SampleMode,
}

/// Sidecar metadata record written next to the `idx,x,y` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSetMeta {
    pub seed: u64,
    #[serde(flatten)]
    pub mode: SampleMode,
    pub window: Window,
    pub count: usize,
}

impl PointSet {
    /// Wraps explicit coordinates. Every point must lie in `window`.
    pub fn from_points(points: Vec<Point>, window: Window, seed: u64) -> Result<Self> {
        window.validate()?;
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| !window.contains(**p)) {
            return Err(invalid(format!("point {i} at ({}, {}) lies outside window", p.x, p.y)));
        }
        let n = points.len();
        Ok(Self {
            points,
            window,
            seed,
            mode: SampleMode::Binomial { n },
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn meta(&self) -> PointSetMeta {
        PointSetMeta {
            seed: self.seed,
            mode: self.mode,
            window: self.window,
            count: self.points.len(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "idx,x,y")?;
        for (i, p) in self.points.iter().enumerate() {
            // `{:?}` on f64 prints the shortest representation that round-trips.
            writeln!(w, "{i},{:?},{:?}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn write_meta_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.meta())?;
        Ok(())
    }

    /// Reads back a set written by [`PointSet::write_csv`] and its sidecar.
    pub fn read<R: BufRead>(csv: R, meta: PointSetMeta) -> Result<Self> {
        let mut points = Vec::with_capacity(meta.count);
        for (lineno, line) in csv.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "idx,x,y" {
                    return Err(invalid(format!("unexpected point CSV header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| invalid(format!("bad point CSV line {}: {line:?}", lineno + 1)))
            };
            let idx = parse(it.next())? as usize;
            if idx != points.len() {
                return Err(invalid(format!("point CSV index {idx} out of order")));
            }
            points.push(Point::new(parse(it.next())?, parse(it.next())?));
        }
        if points.len() != meta.count {
            return Err(invalid(format!(
                "point CSV has {} rows, metadata says {}",
                points.len(),
                meta.count
            )));
        }
        let mut ps = PointSet::from_points(points, meta.window, meta.seed)?;
        ps.mode = meta.mode;
        Ok(ps)
    }
}

/// Homogeneous Poisson process of intensity `lambda` in `window`.
pub fn sample_poisson(window: Window, lambda: f64, seed: u64) -> Result<PointSet> {
    window.validate()?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(invalid(format!("intensity must be finite and >= 0, got {lambda}")));
    }
    let mut rng = stream_rng(seed, streams::POINTS);
    let n = poisson_count(&mut rng, lambda * window.area());
    let points = uniform_points(&mut rng, &window, n as usize);
    Ok(PointSet {
        points,
        window,
        seed,
        mode: SampleMode::Poisson { lambda },
    })
}

/// Exactly `n` i.i.d. uniform points in `window`.
pub fn sample_binomial(window: Window, n: usize, seed: u64) -> Result<PointSet> {
    window.validate()?;
    let mut rng = stream_rng(seed, streams::POINTS);
    let points = uniform_points(&mut rng, &window, n);
    Ok(PointSet {
        points,
        window,
        seed,
        mode: SampleMode::Binomial { n },
    })
}

pub(crate) fn uniform_points<R: Rng + ?Sized>(rng: &mut R, window: &Window, n: usize) -> Vec<Point> {
    let (w, h) = (window.width(), window.height());
    (0..n)
        .map(|_| {
            // random::<f64>() is in [0, 1), so points stay inside the closed window.
            let x = window.xmin + w * rng.random::<f64>();
            let y = window.ymin + h * rng.random::<f64>();
            Point::new(x.min(window.xmax), y.min(window.ymax))
        })
        .collect()
}

const INVERSION_MAX_MEAN: f64 = 30.0;

/// Draws a Poisson(`mu`) count: CDF inversion for small means, Hörmann's
/// PTRS transformed rejection above.
pub fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    if mu <= INVERSION_MAX_MEAN {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mu).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mu / k as f64;
            cdf += p;
            // The tail beyond this is below double precision.
            if p < 1e-300 && k as f64 > mu {
                break;
            }
        }
        return k;
    }
    ptrs(rng, mu)
}

fn ptrs<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u64 {
    let slam = mu.sqrt();
    let loglam = mu.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mu + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

impl From<PointSetMeta> for SampleMode {
    fn from(m: PointSetMeta) -> Self {
        m.mode
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    /// Parses `xmin,ymin,xmax,ymax`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| invalid(format!("window {s:?}: {e}")))?;
        match v.as_slice() {
            [a, b, c, d] => Window::new(*a, *b, *c, *d),
            _ => Err(invalid(format!("window {s:?} needs 4 comma-separated numbers"))),
        }
    }
}
