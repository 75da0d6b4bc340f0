//! C ABI over the edgecorr engine.
//!
//! Every call returns an [`EcStatus`]; on failure the message is available
//! from [`ec_last_error`] on the same thread. Handles are opaque and owned by
//! the caller until passed to the matching `_free` (or consuming) function.
//! Strings returned through out-parameters are released with
//! [`ec_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use edgecorr::clusters::ClusterParams;
use edgecorr::correlation::CorrelationMatrix;
use edgecorr::ingest::Pipeline;
use edgecorr::phylo::{distance_from_correlation, neighbor_joining, tree_move_distance, PhyloTree};
use edgecorr::search::{search, SearchParams, DEFAULT_HORIZON};
use edgecorr::store::Store;
use edgecorr::windows::{Routing, WindowConfig};
use edgecorr::{Error, TimedEdge};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    NotFound = 5,
    Internal = 6,
}

/// Window and cluster parameters of a pipeline.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EcParams {
    pub tau: f64,
    pub lambda: f64,
    pub k: usize,
    pub gamma: f64,
    pub alpha: usize,
    pub min_store: usize,
    pub seed: u64,
}

/// Streaming engine: windows, clusters and pairwise correlations.
pub struct EcPipeline {
    inner: Pipeline,
}

/// Read access to a stored cluster history.
pub struct EcStore {
    inner: Store,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) | Error::Source { .. } | Error::CorruptRecord { .. } => EcStatus::Io,
            Error::UnknownLeaf(_) | Error::MissingPair(..) => EcStatus::NotFound,
            _ => EcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: EcStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).expect("NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Runs `f`, records its error (or a caught panic) and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            EcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            EcStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(EcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn text_array<'a>(p: *const *const c_char, count: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(EcStatus::NullPointer, format!("{what} is null")));
    }
    (0..count).map(|i| text(*p.add(i), what)).collect()
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(EcStatus::NullPointer, format!("{what} is null")))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(EcStatus::Internal, "output contains NUL"))
}

fn nj_newick(matrix: &CorrelationMatrix) -> Result<String, Failure> {
    Ok(neighbor_joining(&distance_from_correlation(matrix)?)?.to_newick())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ec_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `τ = 60`, `λ = 30`, `k = 400`, `γ = 0.8`, `α = 10`, stored components of
/// at least 10 nodes, seed 0.
#[no_mangle]
pub extern "C" fn ec_default_params() -> EcParams {
    let (w, c) = (WindowConfig::default(), ClusterParams::default());
    EcParams {
        tau: w.tau,
        lambda: w.lambda,
        k: w.k,
        gamma: c.gamma,
        alpha: c.alpha,
        min_store: c.min_store,
        seed: 0,
    }
}

/// Creates a pipeline over `count` named streams. `data_dir` may be null for
/// an in-memory store.
#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_new(
    names: *const *const c_char,
    count: usize,
    params: *const EcParams,
    data_dir: *const c_char,
    out_pipeline: *mut *mut EcPipeline,
) -> EcStatus {
    guard(|| {
        let slot = out(out_pipeline, "out_pipeline")?;
        *slot = ptr::null_mut();
        let names: Vec<String> = text_array(names, count, "names")?.into_iter().map(str::to_owned).collect();
        let p = *params.as_ref().ok_or_else(|| fail(EcStatus::NullPointer, "params is null"))?;
        let store = if data_dir.is_null() {
            Store::in_memory()
        } else {
            Store::open(text(data_dir, "data_dir")?)?
        };
        let clusters = ClusterParams {
            gamma: p.gamma,
            alpha: p.alpha,
            min_store: p.min_store,
        };
        let windows = WindowConfig::new(p.tau, p.lambda, p.k)?;
        let inner = Pipeline::new(names, windows, clusters, store, p.seed)?;
        *slot = Box::into_raw(Box::new(EcPipeline { inner }));
        Ok(())
    })
}

/// Offers one edge to stream `stream`. `routed` receives the number of
/// windows it entered; 0 means it arrived after all of them had closed.
#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_push(
    pipeline: *mut EcPipeline,
    stream: usize,
    timestamp: f64,
    src: *const c_char,
    dst: *const c_char,
    routed: *mut usize,
) -> EcStatus {
    guard(|| {
        let p = out(pipeline, "pipeline")?;
        if stream >= p.inner.tracker().streams().len() {
            return Err(fail(EcStatus::InvalidArgument, format!("no stream {stream}")));
        }
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(fail(EcStatus::InvalidArgument, format!("bad timestamp {timestamp}")));
        }
        let edge = TimedEdge::new(timestamp, text(src, "src")?, text(dst, "dst")?);
        let n = match p.inner.push(stream, &edge)? {
            Routing::Routed(n) => n,
            Routing::Stale => 0,
        };
        if let Some(r) = routed.as_mut() {
            *r = n;
        }
        Ok(())
    })
}

/// Current correlation of streams `a` and `b` as the exact ratio
/// `numerator / denominator` (0/0 before either holds a cluster).
#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_correlation(
    pipeline: *const EcPipeline,
    a: *const c_char,
    b: *const c_char,
    numerator: *mut u64,
    denominator: *mut u64,
) -> EcStatus {
    guard(|| {
        let p = pipeline.as_ref().ok_or_else(|| fail(EcStatus::NullPointer, "pipeline is null"))?;
        let (a, b) = (text(a, "a")?, text(b, "b")?);
        let state = p
            .inner
            .tracker()
            .state(a, b)
            .ok_or_else(|| fail(EcStatus::NotFound, format!("no stream pair ({a}, {b})")))?;
        let rho = state.rho();
        *out(numerator, "numerator")? = rho.num;
        *out(denominator, "denominator")? = rho.den;
        Ok(())
    })
}

/// Correlation matrix at time `t` as tab-separated text.
#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_matrix(
    pipeline: *const EcPipeline,
    t: f64,
    out_text: *mut *mut c_char,
) -> EcStatus {
    guard(|| {
        let p = pipeline.as_ref().ok_or_else(|| fail(EcStatus::NullPointer, "pipeline is null"))?;
        let slot = out(out_text, "out_text")?;
        *slot = owned_string(p.inner.tracker().matrix(t).to_text())?;
        Ok(())
    })
}

/// Closes the remaining windows and hands over the store. Always consumes
/// `pipeline`, even on failure. `out_summary` may be null.
#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_finish(
    pipeline: *mut EcPipeline,
    out_store: *mut *mut EcStore,
    out_summary: *mut *mut c_char,
) -> EcStatus {
    guard(|| {
        if pipeline.is_null() {
            return Err(fail(EcStatus::NullPointer, "pipeline is null"));
        }
        let p = Box::from_raw(pipeline);
        let slot = out(out_store, "out_store")?;
        *slot = ptr::null_mut();
        let (report, store) = p.inner.finish(&[])?;
        if let Some(s) = out_summary.as_mut() {
            *s = owned_string(report.to_text())?;
        }
        *slot = Box::into_raw(Box::new(EcStore { inner: store }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ec_pipeline_free(pipeline: *mut EcPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Opens (or creates) the store in `data_dir`.
#[no_mangle]
pub unsafe extern "C" fn ec_store_open(data_dir: *const c_char, out_store: *mut *mut EcStore) -> EcStatus {
    guard(|| {
        let slot = out(out_store, "out_store")?;
        *slot = ptr::null_mut();
        let inner = Store::open(text(data_dir, "data_dir")?)?;
        *slot = Box::into_raw(Box::new(EcStore { inner }));
        Ok(())
    })
}

/// Stored correlation matrix at time `t` as tab-separated text.
#[no_mangle]
pub unsafe extern "C" fn ec_store_matrix(store: *const EcStore, t: f64, out_text: *mut *mut c_char) -> EcStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| fail(EcStatus::NullPointer, "store is null"))?;
        let slot = out(out_text, "out_text")?;
        *slot = owned_string(s.inner.correlation_matrix(t).to_text())?;
        Ok(())
    })
}

/// Ranks tags correlated with `tags` at time `t`; the outcome is written as
/// JSON with `status`, `hits` and `unknown` fields.
#[no_mangle]
pub unsafe extern "C" fn ec_store_search(
    store: *const EcStore,
    tags: *const *const c_char,
    count: usize,
    t: f64,
    limit: usize,
    out_json: *mut *mut c_char,
) -> EcStatus {
    guard(|| {
        let s = store.as_ref().ok_or_else(|| fail(EcStatus::NullPointer, "store is null"))?;
        let slot = out(out_json, "out_json")?;
        let tags = text_array(tags, count, "tags")?;
        let matrix = s.inner.correlation_matrix(t);
        let tree = if matrix.is_empty() {
            None
        } else {
            Some(neighbor_joining(&distance_from_correlation(&matrix)?)?)
        };
        let params = SearchParams {
            limit,
            horizon: DEFAULT_HORIZON,
        };
        let outcome = search(&s.inner, tree.as_ref(), &tags, t, &params)?;
        let json = serde_json::to_string(&outcome).map_err(|e| fail(EcStatus::Internal, e.to_string()))?;
        *slot = owned_string(json)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ec_store_free(store: *mut EcStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Neighbor-joining tree, as Newick, of a tab-separated correlation matrix.
#[no_mangle]
pub unsafe extern "C" fn ec_tree_from_matrix(matrix: *const c_char, out_newick: *mut *mut c_char) -> EcStatus {
    guard(|| {
        let slot = out(out_newick, "out_newick")?;
        let m = CorrelationMatrix::parse_text(text(matrix, "matrix")?)?;
        *slot = owned_string(nj_newick(&m)?)?;
        Ok(())
    })
}

/// Estimated move distance between two Newick trees from depth-`k`
/// signatures.
#[no_mangle]
pub unsafe extern "C" fn ec_tree_distance(
    first: *const c_char,
    second: *const c_char,
    k: usize,
    distance: *mut usize,
) -> EcStatus {
    guard(|| {
        let a = PhyloTree::from_newick(text(first, "first")?)?;
        let b = PhyloTree::from_newick(text(second, "second")?)?;
        *out(distance, "distance")? = tree_move_distance(&a, &b, k);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
