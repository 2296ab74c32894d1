//! C ABI over the `nnperc` core.
//!
//! Every function returns an [`NnpStatus`]; results go through out-pointers.
//! On failure the message is available from [`nnp_last_error`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Panics never cross the boundary; they surface as
//! `NNP_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nnperc::criticalbound::{self, BoundSearch};
use nnperc::graphmetrics::{observation_distortion, observe, ObservationMode};
use nnperc::nngraph::{build_knn_graph, NNGraph};
use nnperc::pointproc::{sample_binomial, sample_poisson, PointSet, Window};
use nnperc::Error;

/// Status code returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnpStatus {
    Ok = 0,
    InvalidParameter = 1,
    Precondition = 2,
    NotFound = 3,
    Geometry = 4,
    NullPointer = 5,
    Internal = 6,
}

/// Opaque point set.
pub struct NnpPointSet {
    inner: PointSet,
}

/// Opaque k-NN graph.
pub struct NnpGraph {
    inner: NNGraph,
}

/// Distortion summary of the observed component.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NnpDistortion {
    pub avg: f64,
    pub max: f64,
    /// Percentage of pairs with ratio <= 2.
    pub pct_le_2: f64,
    /// Percentage of pairs with ratio <= twice the average.
    pub pct_le_2x_avg: f64,
    pub pairs: u64,
    /// Vertices in the observed component.
    pub observed: u64,
    /// Points inside the inner window.
    pub inside: u64,
}

/// Outcome of the bound search. With `NNP_STATUS_NOT_FOUND` the fields hold
/// the best triple seen instead.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NnpBound {
    pub k: u32,
    pub a: f64,
    pub p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NnpStatus {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) => NnpStatus::InvalidParameter,
        Error::Precondition(_) => NnpStatus::Precondition,
        Error::NotFound { .. } => NnpStatus::NotFound,
        Error::Geometry(_) => NnpStatus::Geometry,
        Error::Io(_) | Error::Json(_) => NnpStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), (NnpStatus, String)>>(f: F) -> NnpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NnpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NnpStatus::Internal
        }
    }
}

fn core<T>(r: nnperc::Result<T>) -> Result<T, (NnpStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (NnpStatus, String) {
    (NnpStatus::NullPointer, format!("{name} is null"))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), (NnpStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nnp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Poisson process of intensity `lambda` on `[xmin, xmax] x [ymin, ymax]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nnp_sample_poisson(
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
    lambda: f64,
    seed: u64,
    out: *mut *mut NnpPointSet,
) -> NnpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let w = core(Window::new(xmin, ymin, xmax, ymax))?;
        let ps = core(sample_poisson(w, lambda, seed))?;
        out.write(Box::into_raw(Box::new(NnpPointSet { inner: ps })));
        Ok(())
    })
}

/// `n` independent uniform points on `[xmin, xmax] x [ymin, ymax]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nnp_sample_binomial(
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
    n: usize,
    seed: u64,
    out: *mut *mut NnpPointSet,
) -> NnpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let w = core(Window::new(xmin, ymin, xmax, ymax))?;
        let ps = core(sample_binomial(w, n, seed))?;
        out.write(Box::into_raw(Box::new(NnpPointSet { inner: ps })));
        Ok(())
    })
}

/// Number of points.
///
/// # Safety
/// `ps` must be a handle from a sampling function; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_pointset_len(ps: *const NnpPointSet, out: *mut usize) -> NnpStatus {
    guard(|| {
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        write_out(out, ps.inner.len(), "out")
    })
}

/// Copies the coordinates into `xs` and `ys`, each with room for `cap`
/// values. Fails with `NNP_STATUS_INVALID_PARAMETER` if `cap` is too small.
///
/// # Safety
/// `xs` and `ys` must point to at least `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nnp_pointset_coords(ps: *const NnpPointSet, xs: *mut f64, ys: *mut f64, cap: usize) -> NnpStatus {
    guard(|| {
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        if xs.is_null() || ys.is_null() {
            return Err(null("xs/ys"));
        }
        let pts = ps.inner.points();
        if cap < pts.len() {
            return Err((NnpStatus::InvalidParameter, format!("capacity {cap} < {} points", pts.len())));
        }
        for (i, p) in pts.iter().enumerate() {
            xs.add(i).write(p.x);
            ys.add(i).write(p.y);
        }
        Ok(())
    })
}

/// Releases a point set. Null is ignored.
///
/// # Safety
/// `ps` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nnp_pointset_free(ps: *mut NnpPointSet) {
    if !ps.is_null() {
        drop(Box::from_raw(ps));
    }
}

/// Undirected k-NN graph of a point set.
///
/// # Safety
/// `ps` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_graph_build(ps: *const NnpPointSet, k: usize, out: *mut *mut NnpGraph) -> NnpStatus {
    guard(|| {
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = core(build_knn_graph(&ps.inner, k))?;
        out.write(Box::into_raw(Box::new(NnpGraph { inner: g })));
        Ok(())
    })
}

/// Number of undirected edges.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_graph_num_edges(g: *const NnpGraph, out: *mut usize) -> NnpStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        write_out(out, g.inner.num_edges(), "out")
    })
}

/// Copies edges (u < v, sorted) into `us`, `vs` and `lens`, each with room
/// for `cap` entries.
///
/// # Safety
/// The three buffers must each hold at least `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn nnp_graph_edges(
    g: *const NnpGraph,
    us: *mut u32,
    vs: *mut u32,
    lens: *mut f64,
    cap: usize,
) -> NnpStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        if us.is_null() || vs.is_null() || lens.is_null() {
            return Err(null("us/vs/lens"));
        }
        let m = g.inner.num_edges();
        if cap < m {
            return Err((NnpStatus::InvalidParameter, format!("capacity {cap} < {m} edges")));
        }
        for (i, (u, v, l)) in g.inner.edges().enumerate() {
            us.add(i).write(u as u32);
            vs.add(i).write(v as u32);
            lens.add(i).write(l);
        }
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nnp_graph_free(g: *mut NnpGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Distortion of the observed component in the centred inner window
/// covering `inner_fraction` of each side. `full_mode` selects the
/// full-graph observation instead of the induced one. `sample_pairs == 0`
/// measures all pairs exactly; otherwise that many pairs are drawn with
/// `seed`.
///
/// # Safety
/// `g` must be the graph built from `ps`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_distortion(
    g: *const NnpGraph,
    ps: *const NnpPointSet,
    inner_fraction: f64,
    full_mode: bool,
    sample_pairs: usize,
    seed: u64,
    out: *mut NnpDistortion,
) -> NnpStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        let ps = ps.as_ref().ok_or_else(|| null("ps"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if g.inner.n() != ps.inner.len() {
            return Err((NnpStatus::InvalidParameter, "graph and point set sizes differ".into()));
        }
        let inner = core(ps.inner.window().centered_fraction(inner_fraction))?;
        let mode = if full_mode { ObservationMode::Full } else { ObservationMode::Induced };
        let obs = observe(&g.inner, &ps.inner, &inner, mode);
        let sp = (sample_pairs > 0).then_some((sample_pairs, seed));
        let d = core(observation_distortion(&g.inner, &ps.inner, &obs, sp))?;
        out.write(NnpDistortion {
            avg: d.avg,
            max: d.max,
            pct_le_2: d.pct_le_2,
            pct_le_2x_avg: d.pct_le_2x_avg,
            pairs: d.pairs,
            observed: obs.vertices.len() as u64,
            inside: obs.inside as u64,
        });
        Ok(())
    })
}

/// P(Poisson(mu) <= k).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_poisson_cdf(k: u64, mu: f64, out: *mut f64) -> NnpStatus {
    guard(|| {
        let v = core(criticalbound::poisson_cdf(k, mu))?;
        write_out(out, v, "out")
    })
}

/// Analytic probability that a tile of scale `a` is open for given `k` and
/// intensity `lambda`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_prob_at(a: f64, k: u32, lambda: f64, out: *mut f64) -> NnpStatus {
    guard(|| {
        let v = core(criticalbound::prob_at(a, k, lambda))?.value;
        write_out(out, v, "out")
    })
}

/// Smallest k in `[k_min, k_max]` whose optimised tile probability exceeds
/// `threshold`, with `a` searched over the default range.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnp_min_k(threshold: f64, lambda: f64, k_min: u32, k_max: u32, out: *mut NnpBound) -> NnpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let search = BoundSearch { threshold, lambda, k_range: (k_min, k_max), ..BoundSearch::default() };
        match criticalbound::min_k(&search) {
            Ok(r) => {
                out.write(NnpBound { k: r.k_star, a: r.a_star, p: r.p_star });
                Ok(())
            }
            Err(e) => {
                if let Error::NotFound { best_k, best_a, best_p, .. } = e {
                    out.write(NnpBound { k: best_k, a: best_a, p: best_p });
                }
                Err((status_of(&e), e.to_string()))
            }
        }
    })
}
