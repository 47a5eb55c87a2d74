//! C ABI over the forelem library.
//!
//! Problems and run results are opaque handles created and freed here;
//! functions return [`FlStatus`] codes and stash a message retrievable with
//! [`fl_last_error`]. All entry points catch panics, so the ABI never
//! unwinds into the caller.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::{c_char, c_double, size_t};

use forelem::apps::{
    run_kmeans_variant, run_pagerank_variant, KMeansProblem, PageRankProblem, RunOptions,
};
use forelem::datagen::{gen_clustered_points, gen_graph, ClusterGenConfig, GraphGenConfig};
use forelem::executor::Termination;
use forelem::transforms::variant_by_name;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    FlOk = 0,
    FlInvalidArgument = -1,
    FlUnknownVariant = -2,
    FlRunFailed = -3,
    FlNoTermination = -4,
    FlBufferTooSmall = -5,
    FlPanic = -6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Message for the most recent error on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn guard<F: FnOnce() -> FlStatus>(f: F) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            FlStatus::FlPanic
        }
    }
}

/// Opaque k-means problem handle.
pub struct FlKMeans {
    problem: KMeansProblem,
}

/// Opaque pagerank problem handle.
pub struct FlPageRank {
    problem: PageRankProblem,
}

/// Opaque run result: per-point assignments or per-vertex ranks plus
/// counters.
pub struct FlRun {
    values: Vec<f64>,
    assignments: Vec<u64>,
    calc_seconds: f64,
    sweeps: u64,
    state_changes: u64,
}

/// Builds a k-means problem from `n * dim` row-major coordinates.
/// Returns null on invalid arguments.
///
/// # Safety
/// `points` must point to `n * dim` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_kmeans_new(
    points: *const c_double,
    n: size_t,
    dim: size_t,
    k: size_t,
    seed: u64,
) -> *mut FlKMeans {
    if points.is_null() || n == 0 || dim == 0 || k == 0 {
        set_error("null or empty input");
        return std::ptr::null_mut();
    }
    let data = std::slice::from_raw_parts(points, n * dim).to_vec();
    match KMeansProblem::new(data, dim, k, seed) {
        Ok(problem) => Box::into_raw(Box::new(FlKMeans { problem })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// A reassignment must improve the distance by more than `delta`.
///
/// # Safety
/// `handle` must be null or a live [`fl_kmeans_new`] handle.
#[no_mangle]
pub unsafe extern "C" fn fl_kmeans_set_delta(handle: *mut FlKMeans, delta: c_double) {
    if let Some(h) = unsafe { handle.as_mut() } {
        h.problem.convergence_delta = delta;
    }
}

/// # Safety
/// `handle` must come from [`fl_kmeans_new`] and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn fl_kmeans_free(handle: *mut FlKMeans) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Builds a pagerank problem from parallel edge arrays. Self-loops are
/// dropped; vertices are `0..n_vertices`.
///
/// # Safety
/// `src` and `dst` must each point to `n_edges` readable u32 values.
#[no_mangle]
pub unsafe extern "C" fn fl_pagerank_new(
    src: *const u32,
    dst: *const u32,
    n_edges: size_t,
    n_vertices: size_t,
) -> *mut FlPageRank {
    if (src.is_null() || dst.is_null()) && n_edges > 0 {
        set_error("null edge arrays");
        return std::ptr::null_mut();
    }
    let edges: Vec<(u32, u32)> = (0..n_edges)
        .map(|i| (*src.add(i), *dst.add(i)))
        .collect();
    match PageRankProblem::new(n_vertices, edges) {
        Ok(problem) => Box::into_raw(Box::new(FlPageRank { problem })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `handle` must be null or a live [`fl_pagerank_new`] handle.
#[no_mangle]
pub unsafe extern "C" fn fl_pagerank_set_epsilon(handle: *mut FlPageRank, epsilon: c_double) {
    if let Some(h) = unsafe { handle.as_mut() } {
        h.problem.epsilon = epsilon;
    }
}

/// # Safety
/// `handle` must be null or a live [`fl_pagerank_new`] handle.
#[no_mangle]
pub unsafe extern "C" fn fl_pagerank_set_damping(handle: *mut FlPageRank, damping: c_double) {
    if let Some(h) = unsafe { handle.as_mut() } {
        h.problem.damping = damping;
    }
}

/// # Safety
/// `handle` must come from [`fl_pagerank_new`] and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn fl_pagerank_free(handle: *mut FlPageRank) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

fn parse_variant(name: *const c_char) -> Result<forelem::transforms::Variant, FlStatus> {
    let name = unsafe {
        if name.is_null() {
            set_error("variant name is null");
            return Err(FlStatus::FlInvalidArgument);
        }
        CStr::from_ptr(name)
    };
    let Ok(name) = name.to_str() else {
        set_error("variant name is not utf-8");
        return Err(FlStatus::FlInvalidArgument);
    };
    variant_by_name(name, &[]).ok_or_else(|| {
        set_error(&format!("unknown variant `{name}`"));
        FlStatus::FlUnknownVariant
    })
}

fn opts(partitions: u32, workers: u32) -> RunOptions {
    RunOptions {
        partitions: partitions.max(1) as usize,
        workers: workers.max(1) as usize,
        ..RunOptions::default()
    }
}

/// Runs a k-means variant to termination; on success `*out` owns the result.
///
/// # Safety
/// `handle` must be a live [`fl_kmeans_new`] handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_kmeans_run(
    handle: *const FlKMeans,
    variant: *const c_char,
    partitions: u32,
    workers: u32,
    out: *mut *mut FlRun,
) -> FlStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            set_error("null handle");
            return FlStatus::FlInvalidArgument;
        };
        if out.is_null() {
            set_error("null out pointer");
            return FlStatus::FlInvalidArgument;
        }
        let variant = match parse_variant(variant) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match run_kmeans_variant(&h.problem, &variant, &opts(partitions, workers), None) {
            Ok(run) => {
                let status = if run.run.termination == Termination::Terminated {
                    FlStatus::FlOk
                } else {
                    set_error("sweep budget exhausted");
                    FlStatus::FlNoTermination
                };
                *out = Box::into_raw(Box::new(FlRun {
                    values: Vec::new(),
                    assignments: run.assignments,
                    calc_seconds: run.run.calc_seconds,
                    sweeps: run.run.stats.sweeps,
                    state_changes: run.run.stats.state_changes,
                }));
                status
            }
            Err(e) => {
                set_error(&e.to_string());
                FlStatus::FlRunFailed
            }
        }
    })
}

/// Runs a pagerank variant to termination; on success `*out` owns the result.
///
/// # Safety
/// `handle` must be a live [`fl_pagerank_new`] handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_pagerank_run(
    handle: *const FlPageRank,
    variant: *const c_char,
    partitions: u32,
    workers: u32,
    out: *mut *mut FlRun,
) -> FlStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            set_error("null handle");
            return FlStatus::FlInvalidArgument;
        };
        if out.is_null() {
            set_error("null out pointer");
            return FlStatus::FlInvalidArgument;
        }
        let variant = match parse_variant(variant) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match run_pagerank_variant(&h.problem, &variant, &opts(partitions, workers), None) {
            Ok(run) => {
                let status = if run.run.termination == Termination::Terminated {
                    FlStatus::FlOk
                } else {
                    set_error("sweep budget exhausted");
                    FlStatus::FlNoTermination
                };
                *out = Box::into_raw(Box::new(FlRun {
                    values: run.ranks,
                    assignments: Vec::new(),
                    calc_seconds: run.run.calc_seconds,
                    sweeps: run.run.stats.sweeps,
                    state_changes: run.run.stats.state_changes,
                }));
                status
            }
            Err(e) => {
                set_error(&e.to_string());
                FlStatus::FlRunFailed
            }
        }
    })
}

/// Number of per-point / per-vertex entries in the result.
///
/// # Safety
/// `run` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn fl_run_len(run: *const FlRun) -> size_t {
    unsafe { run.as_ref() }.map_or(0, |r| r.values.len().max(r.assignments.len()))
}

/// Copies the rank vector into `out` (pagerank results only).
///
/// # Safety
/// `out` must point to at least `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_run_ranks(
    run: *const FlRun,
    out: *mut c_double,
    cap: size_t,
) -> FlStatus {
    let Some(r) = run.as_ref() else {
        set_error("null run");
        return FlStatus::FlInvalidArgument;
    };
    if cap < r.values.len() || out.is_null() {
        set_error("output buffer too small");
        return FlStatus::FlBufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(r.values.as_ptr(), out, r.values.len());
    FlStatus::FlOk
}

/// Copies the cluster assignments into `out` (k-means results only).
///
/// # Safety
/// `out` must point to at least `cap` writable u64 values.
#[no_mangle]
pub unsafe extern "C" fn fl_run_assignments(
    run: *const FlRun,
    out: *mut u64,
    cap: size_t,
) -> FlStatus {
    let Some(r) = run.as_ref() else {
        set_error("null run");
        return FlStatus::FlInvalidArgument;
    };
    if cap < r.assignments.len() || out.is_null() {
        set_error("output buffer too small");
        return FlStatus::FlBufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(r.assignments.as_ptr(), out, r.assignments.len());
    FlStatus::FlOk
}

/// # Safety
/// `run` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn fl_run_calc_seconds(run: *const FlRun) -> c_double {
    unsafe { run.as_ref() }.map_or(0.0, |r| r.calc_seconds)
}

/// # Safety
/// `run` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn fl_run_sweeps(run: *const FlRun) -> u64 {
    unsafe { run.as_ref() }.map_or(0, |r| r.sweeps)
}

/// # Safety
/// `run` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn fl_run_state_changes(run: *const FlRun) -> u64 {
    unsafe { run.as_ref() }.map_or(0, |r| r.state_changes)
}

/// # Safety
/// `run` must come from a `fl_*_run` call and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn fl_run_free(run: *mut FlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Fills `out` with `n * dim` clustered coordinates (deterministic per seed).
///
/// # Safety
/// `out` must point to `n * dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fl_generate_points(
    n: size_t,
    dim: size_t,
    k: size_t,
    seed: u64,
    out: *mut c_double,
) -> FlStatus {
    guard(|| {
        if out.is_null() || n == 0 || dim == 0 || k == 0 || n < k {
            set_error("need out != null and n >= k >= 1, dim >= 1");
            return FlStatus::FlInvalidArgument;
        }
        let (points, _) = gen_clustered_points(&ClusterGenConfig::new(n, dim, k, seed));
        std::ptr::copy_nonoverlapping(points.as_ptr(), out, points.len());
        FlStatus::FlOk
    })
}

/// Generates a scale-free graph. Writes up to `cap` edges into the parallel
/// arrays and stores the true edge count in `*out_len`; call with `cap = 0`
/// to query the size first (the generator is deterministic per seed).
///
/// # Safety
/// `out_src`/`out_dst` must hold `cap` writable u32 values; `out_len` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_generate_graph(
    scale: u32,
    edge_factor: size_t,
    seed: u64,
    out_src: *mut u32,
    out_dst: *mut u32,
    cap: size_t,
    out_len: *mut size_t,
) -> FlStatus {
    guard(|| {
        if out_len.is_null() {
            set_error("out_len is null");
            return FlStatus::FlInvalidArgument;
        }
        let edges = gen_graph(&GraphGenConfig::new(scale, seed).with_edge_factor(edge_factor));
        *out_len = edges.len();
        if cap == 0 {
            return FlStatus::FlOk;
        }
        if cap < edges.len() || out_src.is_null() || out_dst.is_null() {
            set_error("edge buffers too small");
            return FlStatus::FlBufferTooSmall;
        }
        for (i, (u, v)) in edges.iter().enumerate() {
            *out_src.add(i) = *u;
            *out_dst.add(i) = *v;
        }
        FlStatus::FlOk
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    #[test]
    fn pagerank_roundtrip_through_the_abi() {
        let src = [0u32, 1];
        let dst = [1u32, 0];
        let handle = unsafe { fl_pagerank_new(src.as_ptr(), dst.as_ptr(), 2, 2) };
        assert!(!handle.is_null());
        unsafe { fl_pagerank_set_epsilon(handle, 1e-12) };
        let variant = CString::new("PageRank_2").unwrap();
        let mut run: *mut FlRun = std::ptr::null_mut();
        let status = unsafe { fl_pagerank_run(handle, variant.as_ptr(), 2, 1, &mut run) };
        assert_eq!(status, FlStatus::FlOk);
        assert_eq!(unsafe { fl_run_len(run) }, 2);
        let mut ranks = [0.0f64; 2];
        assert_eq!(unsafe { fl_run_ranks(run, ranks.as_mut_ptr(), 2) }, FlStatus::FlOk);
        assert!((ranks[0] - 0.5).abs() < 1e-9);
        unsafe {
            fl_run_free(run);
            fl_pagerank_free(handle);
        }
    }

    #[test]
    fn kmeans_roundtrip_through_the_abi() {
        let mut points = vec![0.0f64; 64 * 2];
        assert_eq!(
            unsafe { fl_generate_points(64, 2, 2, 9, points.as_mut_ptr()) },
            FlStatus::FlOk
        );
        let handle = unsafe { fl_kmeans_new(points.as_ptr(), 64, 2, 2, 3) };
        assert!(!handle.is_null());
        let variant = CString::new("Kmeans_4").unwrap();
        let mut run: *mut FlRun = std::ptr::null_mut();
        let status = unsafe { fl_kmeans_run(handle, variant.as_ptr(), 2, 1, &mut run) };
        assert_eq!(status, FlStatus::FlOk);
        let mut assign = vec![0u64; 64];
        assert_eq!(
            unsafe { fl_run_assignments(run, assign.as_mut_ptr(), 64) },
            FlStatus::FlOk
        );
        assert!(assign.iter().all(|&a| a < 2));
        unsafe {
            fl_run_free(run);
            fl_kmeans_free(handle);
        }
    }

    #[test]
    fn unknown_variant_reports_cleanly() {
        let src = [0u32];
        let dst = [1u32];
        let handle = unsafe { fl_pagerank_new(src.as_ptr(), dst.as_ptr(), 1, 2) };
        let variant = CString::new("Nope").unwrap();
        let mut run: *mut FlRun = std::ptr::null_mut();
        let status = unsafe { fl_pagerank_run(handle, variant.as_ptr(), 1, 1, &mut run) };
        assert_eq!(status, FlStatus::FlUnknownVariant);
        let msg = unsafe { CStr::from_ptr(fl_last_error()) };
        assert!(msg.to_str().unwrap().contains("Nope"));
        unsafe { fl_pagerank_free(handle) };
    }

    #[test]
    fn graph_generation_two_call_pattern() {
        let mut len = 0usize;
        assert_eq!(
            unsafe {
                fl_generate_graph(6, 4, 7, std::ptr::null_mut(), std::ptr::null_mut(), 0, &mut len)
            },
            FlStatus::FlOk
        );
        assert!(len > 0);
        let mut src = vec![0u32; len];
        let mut dst = vec![0u32; len];
        let mut len2 = 0usize;
        assert_eq!(
            unsafe {
                fl_generate_graph(6, 4, 7, src.as_mut_ptr(), dst.as_mut_ptr(), len, &mut len2)
            },
            FlStatus::FlOk
        );
        assert_eq!(len, len2);
        assert!(src.iter().zip(&dst).all(|(u, v)| u != v));
    }
}
