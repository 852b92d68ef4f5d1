//! C ABI for loading taxonomies and embeddings and scoring node pairs.
//!
//! Objects are opaque handles created by `*_load`/`*_new` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`TxStatus`]; on failure [`tx_last_error_message`] describes the cause.
//! Handles are immutable after creation and may be shared across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use taxembed::bench::{one_vs_all_dot, one_vs_all_graph};
use taxembed::{EmbeddingMatrix, Error, InformationContentTable, Measure, ScoreMode, SimilaritySpec, TaxonomyGraph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    UnknownNode = 5,
    InvalidGraph = 6,
    Config = 7,
    Validation = 8,
    Numeric = 9,
    BufferSize = 10,
    /// The pair has no similarity (different components).
    NoValue = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxMeasure {
    Shp = 0,
    Lch = 1,
    Wup = 2,
    Jcn = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxScoreMode {
    Dot = 0,
    Cosine = 1,
}

/// Opaque taxonomy handle.
pub struct TxGraph(TaxonomyGraph);

/// Opaque similarity-measure handle, bound to the graph it was built from.
pub struct TxSimilarity(SimilaritySpec);

/// Opaque embedding-matrix handle.
pub struct TxEmbeddings(EmbeddingMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TxStatus {
    match e {
        Error::Io { .. } => TxStatus::Io,
        Error::Parse { .. } => TxStatus::Parse,
        Error::UnknownNode(_) | Error::MissingInformationContent(_) => TxStatus::UnknownNode,
        Error::SelfLoop { .. } | Error::Cycle { .. } => TxStatus::InvalidGraph,
        Error::Config(_) => TxStatus::Config,
        Error::Validation(_) | Error::EmptyDataset => TxStatus::Validation,
        Error::DegenerateRange(_) | Error::NonFiniteLoss { .. } => TxStatus::Numeric,
    }
}

struct Fail(TxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TxStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TxStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(TxStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller guarantees `p` is null or a live handle.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(TxStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn opt_string<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        unsafe { string(p, what) }.map(Some)
    }
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, expected: usize) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null("out"));
    }
    if len != expected {
        return Err(Fail(
            TxStatus::BufferSize,
            format!("output buffer holds {len} values, {expected} required"),
        ));
    }
    // SAFETY: caller guarantees `len` writable elements at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: checked non-null by the callers.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn tx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a `child<TAB>parent` edge list, optionally joining all roots
/// under a new node named `virtual_root`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `virtual_root` null or
/// NUL-terminated, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tx_graph_load(path: *const c_char, virtual_root: *const c_char, out: *mut *mut TxGraph) -> TxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(unsafe { string(path, "path") }?);
        let g = TaxonomyGraph::load_edge_list(&path)?;
        let g = match unsafe { opt_string(virtual_root, "virtual_root") }? {
            Some(name) => g.with_virtual_root(name)?,
            None => g,
        };
        boxed(TxGraph(g), out);
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from [`tx_graph_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tx_graph_free(g: *mut TxGraph) {
    if !g.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(g) });
    }
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn tx_graph_node_count(g: *const TxGraph) -> usize {
    unsafe { g.as_ref() }.map_or(0, |g| g.0.len())
}

/// # Safety
/// `g` must be a live graph handle, `id` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tx_graph_node_index(g: *const TxGraph, id: *const c_char, out: *mut usize) -> TxStatus {
    guard(|| {
        let g = unsafe { deref(g, "graph") }?;
        let id = unsafe { string(id, "id") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ix = g.0.index_of(id)?;
        unsafe { *out = ix };
        Ok(())
    })
}

/// Prepares `measure` on `g`. `counts_path` (raw `node<TAB>count` lines)
/// is required for JCN and ignored otherwise; pass null to omit it.
///
/// # Safety
/// `g` must be a live graph handle, `counts_path` null or NUL-terminated,
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tx_similarity_new(
    g: *const TxGraph,
    measure: TxMeasure,
    counts_path: *const c_char,
    out: *mut *mut TxSimilarity,
) -> TxStatus {
    guard(|| {
        let g = unsafe { deref(g, "graph") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let measure = match measure {
            TxMeasure::Shp => Measure::Shp,
            TxMeasure::Lch => Measure::Lch,
            TxMeasure::Wup => Measure::Wup,
            TxMeasure::Jcn => Measure::Jcn,
        };
        let ic = match unsafe { opt_string(counts_path, "counts_path") }? {
            Some(p) if measure == Measure::Jcn => Some(InformationContentTable::load(p, &g.0)?),
            _ => None,
        };
        boxed(TxSimilarity(SimilaritySpec::new(measure, &g.0, ic)?), out);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a live similarity handle.
#[no_mangle]
pub unsafe extern "C" fn tx_similarity_free(s: *mut TxSimilarity) {
    if !s.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Similarity of nodes `u` and `v`. Returns [`TxStatus::NoValue`] and
/// writes NaN when they are not connected.
///
/// # Safety
/// `g` and `s` must be live handles with `s` built from `g`; `u`, `v`
/// NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tx_similarity(
    g: *const TxGraph,
    s: *const TxSimilarity,
    u: *const c_char,
    v: *const c_char,
    out: *mut f64,
) -> TxStatus {
    guard(|| {
        let (g, s) = (unsafe { deref(g, "graph") }?, unsafe { deref(s, "similarity") }?);
        let (u, v) = (unsafe { string(u, "u") }?, unsafe { string(v, "v") }?);
        if out.is_null() {
            return Err(null("out"));
        }
        let value = s.0.similarity(&g.0, g.0.index_of(u)?, g.0.index_of(v)?)?;
        unsafe { *out = value.unwrap_or(f64::NAN) };
        match value {
            Some(_) => Ok(()),
            None => Err(Fail(TxStatus::NoValue, format!("`{u}` and `{v}` are not connected"))),
        }
    })
}

/// Similarity of `u` to every node, in graph index order; unconnected
/// nodes get 0. `len` must equal the node count.
///
/// # Safety
/// `g` and `s` must be live handles with `s` built from `g`; `u`
/// NUL-terminated; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tx_similarity_one_vs_all(
    g: *const TxGraph,
    s: *const TxSimilarity,
    u: *const c_char,
    out: *mut f64,
    len: usize,
) -> TxStatus {
    guard(|| {
        let (g, s) = (unsafe { deref(g, "graph") }?, unsafe { deref(s, "similarity") }?);
        let u = unsafe { string(u, "u") }?;
        let buf = unsafe { out_slice(out, len, g.0.len()) }?;
        buf.copy_from_slice(&one_vs_all_graph(&g.0, &s.0, g.0.index_of(u)?)?);
        Ok(())
    })
}

/// Loads embeddings in text or binary format.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_load(path: *const c_char, out: *mut *mut TxEmbeddings) -> TxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(unsafe { string(path, "path") }?);
        boxed(TxEmbeddings(EmbeddingMatrix::read(&path)?), out);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_free(m: *mut TxEmbeddings) {
    if !m.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_len(m: *const TxEmbeddings) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.len())
}

/// Dimensionality, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_dim(m: *const TxEmbeddings) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.0.dim())
}

/// Row id at `index`, borrowed from the handle; null when out of range.
///
/// # Safety
/// `m` must be null or a live embeddings handle. The returned pointer is
/// not NUL-terminated; its length is written to `len`.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_id(m: *const TxEmbeddings, index: usize, len: *mut usize) -> *const c_char {
    let Some(m) = (unsafe { m.as_ref() }) else {
        return ptr::null();
    };
    match m.0.ids().get(index) {
        Some(id) => {
            if !len.is_null() {
                unsafe { *len = id.len() };
            }
            id.as_ptr().cast()
        }
        None => ptr::null(),
    }
}

/// Model score of nodes `u` and `v`.
///
/// # Safety
/// `m` must be a live handle, `u`, `v` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_score(
    m: *const TxEmbeddings,
    u: *const c_char,
    v: *const c_char,
    mode: TxScoreMode,
    out: *mut f32,
) -> TxStatus {
    guard(|| {
        let m = unsafe { deref(m, "embeddings") }?;
        let (u, v) = (unsafe { string(u, "u") }?, unsafe { string(v, "v") }?);
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            TxScoreMode::Dot => ScoreMode::Dot,
            TxScoreMode::Cosine => ScoreMode::Cosine,
        };
        let s = taxembed::trainer::score(&m.0, u, v, mode)?;
        unsafe { *out = s };
        Ok(())
    })
}

/// Dot product of row `u` with every row, in row order. `len` must equal
/// the row count.
///
/// # Safety
/// `m` must be a live handle, `u` NUL-terminated, `out` must hold `len`
/// floats.
#[no_mangle]
pub unsafe extern "C" fn tx_embeddings_one_vs_all(
    m: *const TxEmbeddings,
    u: *const c_char,
    out: *mut f32,
    len: usize,
) -> TxStatus {
    guard(|| {
        let m = unsafe { deref(m, "embeddings") }?;
        let u = unsafe { string(u, "u") }?;
        let buf = unsafe { out_slice(out, len, m.0.len()) }?;
        buf.copy_from_slice(&one_vs_all_dot(&m.0, m.0.index_of(u)?));
        Ok(())
    })
}
