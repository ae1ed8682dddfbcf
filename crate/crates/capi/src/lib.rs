//! C interface to the core simulator: opaque handles, integer status codes,
//! and a thread-local error message.
//!
//! Every fallible call returns [`qu_status`]; on anything but `QU_OK` the
//! detail is available from [`qu_last_error`] until the next failing call on
//! the same thread. Panics never cross the boundary; they surface as
//! `QU_ERR_PANIC`. Handles are created and released by this library only
//! (`qu_*_free` on a pointer not obtained here is undefined behavior).

use std::any::Any;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use quorum_core::dynamics::{self, OccupancyState, ProcessParams, TrajectoryRecord};
use quorum_core::gen::{self, GraphConfig};
use quorum_core::graph::RegularGraph;
use quorum_core::isoperimetry;
use quorum_core::{bounds, rng, Error};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum qu_status {
    QU_OK = 0,
    QU_ERR_INVALID_ARGUMENT = 1,
    QU_ERR_SAMPLING_FAILED = 2,
    QU_ERR_BUDGET_EXCEEDED = 3,
    QU_ERR_PARSE = 4,
    QU_ERR_IO = 5,
    QU_ERR_INSUFFICIENT_DATA = 6,
    QU_ERR_PANIC = 7,
    QU_ERR_NULL_POINTER = 8,
    QU_ERR_BAD_UTF8 = 9,
}

/// A simple r-regular graph (opaque).
pub struct QuGraph {
    inner: RegularGraph,
}

/// A recorded trajectory of occupied counts (opaque).
pub struct QuTrajectory {
    inner: TrajectoryRecord,
}

/// Subset statistics in the vertex-count view; see the core crate for the
/// meaning of each field.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, Default)]
pub struct qu_subset_stats {
    pub m: u64,
    pub star1: u64,
    pub star2: u64,
    pub boundary: u64,
    pub cross_edges: u64,
    pub u0: u64,
    pub u1: u64,
    /// Vertices with fewer than two neighbors outside the subset.
    pub blocked: u64,
}

/// Parameters for qu_run.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy)]
pub struct qu_run_params {
    pub p: f64,
    /// Occupation threshold (number of occupied neighbors required).
    pub theta: u32,
    pub seed: u64,
    pub t_max: u64,
    /// Stop once density falls below this value; pass a negative number to
    /// disable early stopping.
    pub stop_below: f64,
    /// Initial occupied density in [0, 1]; pass a negative number to start
    /// from the fully occupied configuration.
    pub init_density: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).unwrap());
}

fn fail(e: &Error) -> qu_status {
    set_error(&e.to_string());
    match e {
        Error::InvalidArgument(_) => qu_status::QU_ERR_INVALID_ARGUMENT,
        Error::SamplingFailed { .. } => qu_status::QU_ERR_SAMPLING_FAILED,
        Error::BudgetExceeded { .. } => qu_status::QU_ERR_BUDGET_EXCEEDED,
        Error::Parse { .. } => qu_status::QU_ERR_PARSE,
        Error::Io { .. } => qu_status::QU_ERR_IO,
        Error::InsufficientData(_) => qu_status::QU_ERR_INSUFFICIENT_DATA,
        Error::ReplicaPanic(_) => qu_status::QU_ERR_PANIC,
    }
}

fn null_arg(what: &str) -> qu_status {
    set_error(&format!("{what} is null"));
    qu_status::QU_ERR_NULL_POINTER
}

fn panic_text(payload: Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_string()
    }
}

fn guarded<F: FnOnce() -> qu_status>(f: F) -> qu_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(payload) => {
            set_error(&panic_text(payload));
            qu_status::QU_ERR_PANIC
        }
    }
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, qu_status> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(&format!("{what} is not valid UTF-8"));
            Err(qu_status::QU_ERR_BAD_UTF8)
        }
    }
}

/// Message for the most recent failure on this thread; empty string if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qu_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Sample a uniform simple r-regular graph.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_generate(
    n: u32,
    r: u32,
    seed: u64,
    max_attempts: u64,
    out: *mut *mut QuGraph,
) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    *out = std::ptr::null_mut();
    guarded(|| {
        let mut cfg = GraphConfig::new(n, r, seed);
        cfg.max_attempts = max_attempts;
        match gen::sample_simple_regular(&cfg) {
            Ok(sampled) => {
                *out = Box::into_raw(Box::new(QuGraph { inner: sampled.graph }));
                qu_status::QU_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Load a graph from the text format written by `qu_graph_write`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_read(path: *const c_char, out: *mut *mut QuGraph) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    *out = std::ptr::null_mut();
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    guarded(|| match RegularGraph::read_path(&path) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(QuGraph { inner: g }));
            qu_status::QU_OK
        }
        Err(e) => fail(&e),
    })
}

/// Write the graph to a file.
///
/// # Safety
/// `g` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_write(g: *const QuGraph, path: *const c_char) -> qu_status {
    let Some(g) = g.as_ref() else {
        return null_arg("graph");
    };
    let path = match path_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    guarded(|| match g.inner.write_path(&path) {
        Ok(()) => qu_status::QU_OK,
        Err(e) => fail(&e),
    })
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_n(g: *const QuGraph) -> u32 {
    g.as_ref().map_or(0, |g| g.inner.n())
}

/// Degree; 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_r(g: *const QuGraph) -> u32 {
    g.as_ref().map_or(0, |g| g.inner.r())
}

/// Seed the graph was sampled with; 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_seed(g: *const QuGraph) -> u64 {
    g.as_ref().map_or(0, |g| g.inner.seed())
}

/// Copy the sorted neighbor list of `v` into `out`.
///
/// # Safety
/// `out` must have room for `qu_graph_r(g)` entries.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_neighbors(
    g: *const QuGraph,
    v: u32,
    out: *mut u32,
) -> qu_status {
    let Some(g) = g.as_ref() else {
        return null_arg("graph");
    };
    if out.is_null() {
        return null_arg("out");
    }
    if v >= g.inner.n() {
        set_error(&format!("vertex {v} out of range for n={}", g.inner.n()));
        return qu_status::QU_ERR_INVALID_ARGUMENT;
    }
    let nb = g.inner.neighbors(v);
    std::ptr::copy_nonoverlapping(nb.as_ptr(), out, nb.len());
    qu_status::QU_OK
}

/// Expansion and blocked-set statistics of a vertex subset.
///
/// # Safety
/// `subset` must point to `len` vertex ids and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_subset_stats(
    g: *const QuGraph,
    subset: *const u32,
    len: usize,
    out: *mut qu_subset_stats,
) -> qu_status {
    let Some(g) = g.as_ref() else {
        return null_arg("graph");
    };
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    if subset.is_null() && len > 0 {
        return null_arg("subset");
    }
    let subset = if len == 0 {
        &[][..]
    } else {
        std::slice::from_raw_parts(subset, len)
    };
    guarded(|| {
        let st = match isoperimetry::subset_stats(&g.inner, subset) {
            Ok(st) => st,
            Err(e) => return fail(&e),
        };
        let vs = match isoperimetry::vacancy_stats(&g.inner, subset) {
            Ok(vs) => vs,
            Err(e) => return fail(&e),
        };
        *out = qu_subset_stats {
            m: st.m,
            star1: st.star1,
            star2: st.star2,
            boundary: st.boundary,
            cross_edges: st.cross_edges,
            u0: st.u0,
            u1: st.u1,
            blocked: vs.blocked,
        };
        qu_status::QU_OK
    })
}

/// Release a graph handle. Null is a no-op.
///
/// # Safety
/// `g` must be null or a handle obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qu_graph_free(g: *mut QuGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Run the process on `g` and return the recorded trajectory.
///
/// # Safety
/// `g` and `params` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qu_run(
    g: *const QuGraph,
    params: *const qu_run_params,
    out: *mut *mut QuTrajectory,
) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    *out = std::ptr::null_mut();
    let Some(g) = g.as_ref() else {
        return null_arg("graph");
    };
    let Some(params) = params.as_ref() else {
        return null_arg("params");
    };
    guarded(|| {
        let init = if params.init_density < 0.0 {
            Ok(OccupancyState::full(g.inner.n()))
        } else {
            let mut init_rng = rng::stream(rng::child_seed(params.seed, &[3]));
            OccupancyState::random_with_density(g.inner.n(), params.init_density, &mut init_rng)
        };
        let init = match init {
            Ok(init) => init,
            Err(e) => return fail(&e),
        };
        let run_params = ProcessParams {
            p: params.p,
            theta: params.theta,
            seed: params.seed,
            t_max: params.t_max,
            stop_below: (params.stop_below >= 0.0).then_some(params.stop_below),
        };
        match dynamics::run(&g.inner, &init, &run_params) {
            Ok(record) => {
                *out = Box::into_raw(Box::new(QuTrajectory { inner: record }));
                qu_status::QU_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of recorded counts (steps taken plus one); 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_len(t: *const QuTrajectory) -> u64 {
    t.as_ref().map_or(0, |t| t.inner.counts.len() as u64)
}

/// Occupied count after step `i`.
///
/// # Safety
/// `t` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_count(
    t: *const QuTrajectory,
    i: u64,
    out: *mut u64,
) -> qu_status {
    let Some(t) = t.as_ref() else {
        return null_arg("trajectory");
    };
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    match t.inner.counts.get(i as usize) {
        Some(&c) => {
            *out = c;
            qu_status::QU_OK
        }
        None => {
            set_error(&format!(
                "index {i} out of range for {} recorded counts",
                t.inner.counts.len()
            ));
            qu_status::QU_ERR_INVALID_ARGUMENT
        }
    }
}

/// Occupied density at the last recorded step; NaN for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_final_density(t: *const QuTrajectory) -> f64 {
    t.as_ref().map_or(f64::NAN, |t| t.inner.final_density())
}

/// Extinction time, written as -1 when the process was still alive at the end.
///
/// # Safety
/// `t` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_extinction_time(
    t: *const QuTrajectory,
    out: *mut i64,
) -> qu_status {
    let Some(t) = t.as_ref() else {
        return null_arg("trajectory");
    };
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    *out = t.inner.extinction_time.map_or(-1, |e| e as i64);
    qu_status::QU_OK
}

/// 1 if the run reached t_max above the stop threshold, 0 if not, -1 on null.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_survived(t: *const QuTrajectory) -> i32 {
    t.as_ref().map_or(-1, |t| i32::from(t.inner.survived))
}

/// Release a trajectory handle. Null is a no-op.
///
/// # Safety
/// `t` must be null or a handle obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qu_trajectory_free(t: *mut QuTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Expansion margin eta for infection probability p.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qu_eta_of_p(p: f64, out: *mut f64) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    guarded(|| match bounds::eta_of_p(p) {
        Ok(v) => {
            *out = v;
            qu_status::QU_OK
        }
        Err(e) => fail(&e),
    })
}

/// Extinction-horizon constant C0 for (p, r).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qu_horizon_c0(p: f64, r: u32, out: *mut f64) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    guarded(|| match bounds::horizon_constants(p, r) {
        Ok(h) => {
            *out = h.c0;
            qu_status::QU_OK
        }
        Err(e) => fail(&e),
    })
}

/// Positive root of exp(-u b) = 1 - (u - eta) b.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qu_beta_root(u: f64, eta: f64, out: *mut f64) -> qu_status {
    let Some(out) = out.as_mut() else {
        return null_arg("out");
    };
    guarded(|| match bounds::beta_root(u, eta) {
        Ok(v) => {
            *out = v;
            qu_status::QU_OK
        }
        Err(e) => fail(&e),
    })
}
