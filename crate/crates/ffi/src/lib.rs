//! C ABI for stylerag.
//!
//! Conventions:
//! - Every fallible function returns an [`SrStatus`]; `SR_STATUS_OK` is 0.
//! - On failure, `sr_last_error_message()` describes the most recent error on
//!   the calling thread. The pointer stays valid until the next failing call
//!   on that thread.
//! - Handles (`SrIndex`, `SrRetriever`) are opaque and released with their
//!   `*_free` function. Strings returned through `char **` out-parameters are
//!   released with `sr_string_free`.
//! - Panics never cross the boundary; they surface as `SR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use stylerag::app::serve::{RetrieveBody, ServeState};
use stylerag::app::{load_database, AppConfig, ScriptRegistry};
use stylerag::domain::{compose_style_embedding, inner_product};
use stylerag::index::{ClusterParams, SearchRequest, StyleIndex};
use stylerag::retrieval::{RetrievalConfig, Retriever};
use stylerag::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFiniteInput = 4,
    Io = 5,
    CorruptFile = 6,
    UnsupportedVersion = 7,
    UnknownClipId = 8,
    DuplicateClipId = 9,
    EmptyDatabase = 10,
    EndpointUnavailable = 11,
    BufferTooSmall = 12,
    Panic = 13,
    Other = 14,
}

/// One search result. `row` indexes `sr_index_clip_id`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrHit {
    pub row: u64,
    pub score: f64,
    pub rank: u32,
}

pub struct SrIndex {
    index: StyleIndex,
    c_ids: Vec<CString>,
}

impl SrIndex {
    fn new(index: StyleIndex) -> Box<SrIndex> {
        let c_ids = index
            .clip_ids()
            .iter()
            .map(|id| CString::new(id.replace('\0', "")).unwrap_or_default())
            .collect();
        Box::new(SrIndex { index, c_ids })
    }
}

pub struct SrRetriever {
    state: ServeState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::DimensionMismatch { .. } => SrStatus::DimensionMismatch,
        Error::NonFiniteInput(_) => SrStatus::NonFiniteInput,
        Error::Io { .. } => SrStatus::Io,
        Error::CorruptFile(_) => SrStatus::CorruptFile,
        Error::UnsupportedVersion { .. } => SrStatus::UnsupportedVersion,
        Error::UnknownClipId(_) => SrStatus::UnknownClipId,
        Error::DuplicateClipId(_) => SrStatus::DuplicateClipId,
        Error::EmptyDatabase => SrStatus::EmptyDatabase,
        Error::EndpointUnavailable { .. } => SrStatus::EndpointUnavailable,
        Error::InvalidArgument(_)
        | Error::EmptyInput(_)
        | Error::PositionOutOfRange { .. }
        | Error::TooManyClusters { .. }
        | Error::UnknownScript(_)
        | Error::Json(_) => SrStatus::InvalidArgument,
        _ => SrStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Status(SrStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} is null"));
            SrStatus::NullPointer
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&format!("{}: {e}", e.code()));
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside stylerag");
            SrStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` readable elements.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn str_in<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Status(SrStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees a valid, writable location when non-null.
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last error on this thread; empty if none.
#[no_mangle]
pub extern "C" fn sr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `out[i] = profile[i] + emotion[i] + user[i]`.
///
/// # Safety
/// All four pointers must address `dim` elements.
#[no_mangle]
pub unsafe extern "C" fn sr_compose(
    profile: *const f64,
    emotion: *const f64,
    user: *const f64,
    dim: usize,
    out_values: *mut f64,
) -> SrStatus {
    guard(|| {
        let p = unsafe { slice_in(profile, dim, "profile")? };
        let e = unsafe { slice_in(emotion, dim, "emotion")? };
        let u = unsafe { slice_in(user, dim, "user")? };
        if out_values.is_null() {
            return Err(Failure::Null("out_values"));
        }
        let composed = compose_style_embedding(p, e, u)?;
        // SAFETY: checked non-null; caller guarantees `dim` writable elements.
        unsafe { slice::from_raw_parts_mut(out_values, dim) }.copy_from_slice(composed.values());
        Ok(())
    })
}

/// # Safety
/// `a` and `b` must address `len` elements; `out_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_inner_product(a: *const f64, b: *const f64, len: usize, out_score: *mut f64) -> SrStatus {
    guard(|| {
        let a = unsafe { slice_in(a, len, "a")? };
        let b = unsafe { slice_in(b, len, "b")? };
        let o = unsafe { out(out_score, "out_score")? };
        *o = inner_product(a, b)?;
        Ok(())
    })
}

unsafe fn entries_in(
    clip_ids: *const *const c_char,
    vectors: *const f32,
    n: usize,
    dim: usize,
) -> Result<Vec<(String, Vec<f32>)>, Failure> {
    let ids = unsafe { slice_in(clip_ids, n, "clip_ids")? };
    let flat = unsafe { slice_in(vectors, n * dim, "vectors")? };
    ids.iter()
        .enumerate()
        .map(|(i, &p)| {
            let id = unsafe { str_in(p, "clip id")? };
            Ok((id.to_string(), flat[i * dim..(i + 1) * dim].to_vec()))
        })
        .collect()
}

/// Exact index over `n` row-major vectors of length `dim`.
///
/// # Safety
/// `clip_ids` must hold `n` NUL-terminated strings, `vectors` `n * dim`
/// floats, and `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_index_build_exact(
    clip_ids: *const *const c_char,
    vectors: *const f32,
    n: usize,
    dim: usize,
    out_index: *mut *mut SrIndex,
) -> SrStatus {
    guard(|| {
        let o = unsafe { out(out_index, "out_index")? };
        let entries = unsafe { entries_in(clip_ids, vectors, n, dim)? };
        *o = Box::into_raw(SrIndex::new(StyleIndex::build_exact_from(entries, false)?));
        Ok(())
    })
}

/// Clustered index; see `sr_index_build_exact` for the layout.
///
/// # Safety
/// As for `sr_index_build_exact`.
#[no_mangle]
pub unsafe extern "C" fn sr_index_build_clustered(
    clip_ids: *const *const c_char,
    vectors: *const f32,
    n: usize,
    dim: usize,
    n_clusters: usize,
    seed: u64,
    out_index: *mut *mut SrIndex,
) -> SrStatus {
    guard(|| {
        let o = unsafe { out(out_index, "out_index")? };
        let entries = unsafe { entries_in(clip_ids, vectors, n, dim)? };
        let params = ClusterParams::new(n_clusters, seed);
        *o = Box::into_raw(SrIndex::new(StyleIndex::build_clustered_from(entries, &params, false)?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_index` writable.
#[no_mangle]
pub unsafe extern "C" fn sr_index_load(path: *const c_char, out_index: *mut *mut SrIndex) -> SrStatus {
    guard(|| {
        let path = unsafe { str_in(path, "path")? };
        let o = unsafe { out(out_index, "out_index")? };
        *o = Box::into_raw(SrIndex::new(StyleIndex::load(&PathBuf::from(path))?));
        Ok(())
    })
}

/// # Safety
/// `index` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sr_index_save(index: *const SrIndex, path: *const c_char) -> SrStatus {
    guard(|| {
        // SAFETY: handle produced by this library.
        let idx = unsafe { index.as_ref() }.ok_or(Failure::Null("index"))?;
        let path = unsafe { str_in(path, "path")? };
        idx.index.save(&PathBuf::from(path))?;
        Ok(())
    })
}

/// # Safety
/// `index` must come from this library; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_index_count(index: *const SrIndex, out_count: *mut usize) -> SrStatus {
    guard(|| {
        let idx = unsafe { index.as_ref() }.ok_or(Failure::Null("index"))?;
        *unsafe { out(out_count, "out_count")? } = idx.index.len();
        Ok(())
    })
}

/// # Safety
/// `index` must come from this library; `out_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_index_dim(index: *const SrIndex, out_dim: *mut usize) -> SrStatus {
    guard(|| {
        let idx = unsafe { index.as_ref() }.ok_or(Failure::Null("index"))?;
        *unsafe { out(out_dim, "out_dim")? } = idx.index.dim();
        Ok(())
    })
}

/// Top-`k` search. `probes = 0` uses the default probe count. Writes at most
/// `capacity` hits and the number written to `out_len`.
///
/// # Safety
/// `query` must address `dim` elements, `out_hits` `capacity` slots.
#[no_mangle]
pub unsafe extern "C" fn sr_index_search(
    index: *const SrIndex,
    query: *const f64,
    dim: usize,
    k: usize,
    probes: usize,
    out_hits: *mut SrHit,
    capacity: usize,
    out_len: *mut usize,
) -> SrStatus {
    guard(|| {
        let idx = unsafe { index.as_ref() }.ok_or(Failure::Null("index"))?;
        let q = unsafe { slice_in(query, dim, "query")? };
        let len = unsafe { out(out_len, "out_len")? };
        let mut request = SearchRequest::new(q.to_vec(), k);
        if probes > 0 {
            request = request.with_probes(probes);
        }
        let hits = idx.index.search(&request)?;
        if hits.len() > capacity {
            *len = hits.len();
            return Err(Failure::Status(
                SrStatus::BufferTooSmall,
                format!("{} hits do not fit in {capacity} slots", hits.len()),
            ));
        }
        if !hits.is_empty() && out_hits.is_null() {
            return Err(Failure::Null("out_hits"));
        }
        for (i, h) in hits.iter().enumerate() {
            let row = idx
                .index
                .clip_ids()
                .binary_search(&h.clip_id)
                .map_err(|_| Failure::Status(SrStatus::Other, "hit without row".into()))?;
            // SAFETY: `i < hits.len() <= capacity`.
            unsafe {
                *out_hits.add(i) = SrHit {
                    row: row as u64,
                    score: h.score,
                    rank: h.rank as u32,
                }
            };
        }
        *len = hits.len();
        Ok(())
    })
}

/// Clip id of `row`, owned by the index; NULL when out of range.
///
/// # Safety
/// `index` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn sr_index_clip_id(index: *const SrIndex, row: u64) -> *const c_char {
    // SAFETY: handle produced by this library.
    match unsafe { index.as_ref() }.and_then(|i| i.c_ids.get(row as usize)) {
        Some(c) => c.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `index` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sr_index_free(index: *mut SrIndex) {
    if !index.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(index) });
    }
}

/// Opens an index file (with `records.jsonl` beside it) using the offline
/// reference embedders with `seed`.
///
/// # Safety
/// `index_path` must be NUL-terminated and `out_retriever` writable.
#[no_mangle]
pub unsafe extern "C" fn sr_retriever_open(
    index_path: *const c_char,
    seed: u64,
    out_retriever: *mut *mut SrRetriever,
) -> SrStatus {
    guard(|| {
        let path = PathBuf::from(unsafe { str_in(index_path, "index_path")? });
        let o = unsafe { out(out_retriever, "out_retriever")? };
        let config = AppConfig {
            seed,
            ..AppConfig::default()
        };
        let db = load_database(&path)?;
        let embedders = config.embedder_set(db.index.dim())?;
        let state = ServeState {
            retriever: Retriever::new(db, embedders)?,
            scripts: ScriptRegistry::default(),
            defaults: RetrievalConfig::default(),
            index_path: path,
        };
        *o = Box::into_raw(Box::new(SrRetriever { state }));
        Ok(())
    })
}

/// Runs one retrieval. `request_json` has the same shape as the HTTP
/// `/v1/retrieve` body; the script must be inline on first use of its id.
/// On success `*out_json` receives the bundle JSON.
///
/// # Safety
/// `retriever` must come from this library; `request_json` must be
/// NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_retriever_retrieve_json(
    retriever: *const SrRetriever,
    request_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SrStatus {
    guard(|| {
        // SAFETY: handle produced by this library.
        let r = unsafe { retriever.as_ref() }.ok_or(Failure::Null("retriever"))?;
        let body: RetrieveBody =
            serde_json::from_str(unsafe { str_in(request_json, "request_json")? }).map_err(Error::from)?;
        let o = unsafe { out(out_json, "out_json")? };
        let bundle = r.state.handle(body)?;
        let text = serde_json::to_string(&bundle).map_err(Error::from)?;
        *o = CString::new(text)
            .map_err(|e| Failure::Status(SrStatus::Other, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `retriever` must come from this library; `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn sr_retriever_record_count(retriever: *const SrRetriever, out_count: *mut usize) -> SrStatus {
    guard(|| {
        let r = unsafe { retriever.as_ref() }.ok_or(Failure::Null("retriever"))?;
        *unsafe { out(out_count, "out_count")? } = r.state.retriever.record_count();
        Ok(())
    })
}

/// # Safety
/// `retriever` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sr_retriever_free(retriever: *mut SrRetriever) {
    if !retriever.is_null() {
        // SAFETY: produced by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(retriever) });
    }
}

/// # Safety
/// `s` must be a string returned by this library, or NULL.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}
