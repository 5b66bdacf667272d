//! C ABI over the `nary` library.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `nary_*_new`/`_load`/`_train`/`_build` function and released with the
//! matching `_free`. Fallible functions return a [`NaryStatus`]; on failure
//! [`nary_last_error`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nary::dataset::{apply_preprocess, fit_preprocess, generate_synthetic, load_matrix, save_matrix, MatrixFormat};
use nary::distance::exhaustive_rank;
use nary::eval::{train_model, ExperimentConfig, Method};
use nary::mih::{build_binary_index, build_nary_index};
use nary::{Codes, DataMatrix, Error, Model, MultiIndexHash};

/// Result of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaryStatus {
    Ok = 0,
    /// Bad parameter or null pointer.
    InvalidArgument = 1,
    Io = 2,
    Format = 3,
    DimensionMismatch = 4,
    NonFinite = 5,
    Incompatible = 6,
    Numeric = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Coding method for [`nary_model_train`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaryMethod {
    LsqNary = 0,
    LsqBinary = 1,
    Itq = 2,
    Pq = 3,
    Ckmeans = 4,
    Okmeans = 5,
}

/// Opaque `D x N` real matrix, one point per column.
pub struct NaryMatrix(DataMatrix);

/// Opaque trained coder.
pub struct NaryModel(Model);

/// Opaque set of n-ary or binary codes.
pub struct NaryCodes(Codes);

/// Opaque multi-index hash.
pub struct NaryIndex(MultiIndexHash);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> NaryStatus {
    match e {
        Error::InvalidParameter(_) => NaryStatus::InvalidArgument,
        Error::Io(_) => NaryStatus::Io,
        Error::Format { .. } => NaryStatus::Format,
        Error::DimensionMismatch { .. } => NaryStatus::DimensionMismatch,
        Error::NonFinite(_) => NaryStatus::NonFinite,
        Error::Incompatible(_) => NaryStatus::Incompatible,
        Error::Numeric(_) => NaryStatus::Numeric,
    }
}

enum Fail {
    Lib(Error),
    Arg(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NaryStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NaryStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg.to_string());
            NaryStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".to_string());
            NaryStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Arg(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Arg("null path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Arg("null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nary_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nary_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `dim * count` column-major values into a new matrix.
///
/// # Safety
/// `values` must point to `dim * count` readable doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_new(
    dim: usize,
    count: usize,
    values: *const f64,
    out: *mut *mut NaryMatrix,
) -> NaryStatus {
    guard(|| {
        if values.is_null() {
            return Err(Fail::Arg("null values"));
        }
        let len = dim.checked_mul(count).ok_or(Fail::Arg("shape overflows"))?;
        let slice = std::slice::from_raw_parts(values, len);
        put(out, NaryMatrix(DataMatrix::from_column_slice(dim, count, slice)?))
    })
}

/// Draws a seeded Gaussian mixture.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_generate(
    seed: u64,
    dim: usize,
    count: usize,
    clusters: usize,
    spread: f64,
    out: *mut *mut NaryMatrix,
) -> NaryStatus {
    guard(|| put(out, NaryMatrix(generate_synthetic(seed, dim, count, clusters, spread)?)))
}

/// Loads a raw-f32 (`NARY`) or, for a `.csv` path, CSV matrix.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_load(path: *const c_char, out: *mut *mut NaryMatrix) -> NaryStatus {
    guard(|| {
        let path = path_arg(path)?;
        let m = load_matrix(&path, MatrixFormat::from_path(&path))?;
        put(out, NaryMatrix(m))
    })
}

/// # Safety
/// `m` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_save(m: *const NaryMatrix, path: *const c_char) -> NaryStatus {
    guard(|| {
        let m = deref(m, "null matrix")?;
        let path = path_arg(path)?;
        save_matrix(&m.0, &path, MatrixFormat::from_path(&path))?;
        Ok(())
    })
}

/// Centers `data` with the mean of `fit` and, if `normalize` is nonzero,
/// scales every nonzero column to unit length.
///
/// # Safety
/// Both matrices must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_preprocess(
    fit: *const NaryMatrix,
    data: *const NaryMatrix,
    normalize: i32,
    out: *mut *mut NaryMatrix,
) -> NaryStatus {
    guard(|| {
        let model = fit_preprocess(&deref(fit, "null fit matrix")?.0, normalize != 0);
        put(out, NaryMatrix(apply_preprocess(&model, &deref(data, "null data matrix")?.0)?))
    })
}

/// Dimension `D`, or 0 for a null matrix.
///
/// # Safety
/// `m` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_dim(m: *const NaryMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Point count `N`, or 0 for a null matrix.
///
/// # Safety
/// `m` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_count(m: *const NaryMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.count())
}

/// Copies the column-major values into `out`, which holds `len` doubles.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_copy_values(m: *const NaryMatrix, out: *mut f64, len: usize) -> NaryStatus {
    guard(|| {
        let m = deref(m, "null matrix")?;
        let values = m.0.values().as_slice();
        if out.is_null() || len != values.len() {
            return Err(Fail::Arg("output buffer must hold dim * count doubles"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(values);
        Ok(())
    })
}

/// # Safety
/// `m` must be null or come from this library; it must not be used again.
#[no_mangle]
pub unsafe extern "C" fn nary_matrix_free(m: *mut NaryMatrix) {
    free(m)
}

/// Trains a coder on `train` (already preprocessed). The code uses
/// `floor(bit_budget / bits_per_dim)` dimensions of `bits_per_dim` bits;
/// binary methods store that many bits times `bits_per_dim`.
///
/// # Safety
/// `train` must come from this library and `out` be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nary_model_train(
    train: *const NaryMatrix,
    method: NaryMethod,
    bit_budget: usize,
    bits_per_dim: usize,
    lambda: f64,
    iters: usize,
    seed: u64,
    out: *mut *mut NaryModel,
) -> NaryStatus {
    guard(|| {
        let train = deref(train, "null train matrix")?;
        let method = match method {
            NaryMethod::LsqNary => Method::LsqNary,
            NaryMethod::LsqBinary => Method::LsqBinary,
            NaryMethod::Itq => Method::Itq,
            NaryMethod::Pq => Method::Pq,
            NaryMethod::Ckmeans => Method::Ckmeans,
            NaryMethod::Okmeans => Method::Okmeans,
        };
        let cfg = ExperimentConfig {
            method,
            bit_budget,
            bits_per_dim,
            lambda,
            iters,
            seed,
            ..ExperimentConfig::default()
        };
        cfg.validate()?;
        put(out, NaryModel(train_model(&cfg, &train.0)?))
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nary_model_load(path: *const c_char, out: *mut *mut NaryModel) -> NaryStatus {
    guard(|| put(out, NaryModel(nary::io::load_model(path_arg(path)?)?)))
}

/// # Safety
/// `model` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nary_model_save(model: *const NaryModel, path: *const c_char) -> NaryStatus {
    guard(|| {
        nary::io::save_model(&deref(model, "null model")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Input dimension of the model, or 0 for null.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nary_model_dim(model: *const NaryModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// # Safety
/// Arguments must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nary_model_encode(
    model: *const NaryModel,
    data: *const NaryMatrix,
    out: *mut *mut NaryCodes,
) -> NaryStatus {
    guard(|| {
        let codes = deref(model, "null model")?.0.encode(&deref(data, "null matrix")?.0)?;
        put(out, NaryCodes(codes))
    })
}

/// # Safety
/// Arguments must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nary_model_reconstruct(
    model: *const NaryModel,
    codes: *const NaryCodes,
    out: *mut *mut NaryMatrix,
) -> NaryStatus {
    guard(|| {
        let x = deref(model, "null model")?.0.reconstruct(&deref(codes, "null codes")?.0)?;
        put(out, NaryMatrix(x))
    })
}

/// # Safety
/// `model` must be null or come from this library; it must not be used again.
#[no_mangle]
pub unsafe extern "C" fn nary_model_free(model: *mut NaryModel) {
    free(model)
}

/// Number of codewords, or 0 for null.
///
/// # Safety
/// `codes` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nary_codes_count(codes: *const NaryCodes) -> usize {
    codes.as_ref().map_or(0, |c| c.0.count())
}

/// 1 for packed binary codes, 0 for n-ary codes or null.
///
/// # Safety
/// `codes` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nary_codes_is_binary(codes: *const NaryCodes) -> i32 {
    codes.as_ref().map_or(0, |c| matches!(c.0, Codes::Binary(_)) as i32)
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nary_codes_load(path: *const c_char, out: *mut *mut NaryCodes) -> NaryStatus {
    guard(|| put(out, NaryCodes(nary::io::load_codes(path_arg(path)?)?)))
}

/// # Safety
/// `codes` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nary_codes_save(codes: *const NaryCodes, path: *const c_char) -> NaryStatus {
    guard(|| {
        nary::io::save_codes(&deref(codes, "null codes")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `codes` must be null or come from this library; it must not be used again.
#[no_mangle]
pub unsafe extern "C" fn nary_codes_free(codes: *mut NaryCodes) {
    free(codes)
}

/// Indexes `codes`: one table per dimension for n-ary codes, one table per
/// `chunk_bits` bits for binary codes (`chunk_bits` is ignored for n-ary).
///
/// # Safety
/// `codes` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nary_index_build(
    codes: *const NaryCodes,
    chunk_bits: usize,
    out: *mut *mut NaryIndex,
) -> NaryStatus {
    guard(|| {
        let index = match &deref(codes, "null codes")?.0 {
            Codes::Nary(c) => build_nary_index(c)?,
            Codes::Binary(c) => build_binary_index(c, chunk_bits)?,
        };
        put(out, NaryIndex(index))
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nary_index_load(path: *const c_char, out: *mut *mut NaryIndex) -> NaryStatus {
    guard(|| put(out, NaryIndex(nary::io::load_index(path_arg(path)?)?)))
}

/// # Safety
/// `index` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nary_index_save(index: *const NaryIndex, path: *const c_char) -> NaryStatus {
    guard(|| {
        nary::io::save_index(&deref(index, "null index")?.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `index` must be null or come from this library; it must not be used again.
#[no_mangle]
pub unsafe extern "C" fn nary_index_free(index: *mut NaryIndex) {
    free(index)
}

enum Search<'a> {
    Index(&'a MultiIndexHash),
    Scan(&'a Codes),
}

unsafe fn search(
    target: Search<'_>,
    model: *const NaryModel,
    queries: *const NaryMatrix,
    k: usize,
    out_ids: *mut usize,
    out_lens: *mut usize,
) -> NaryStatus {
    guard(|| {
        let model = &deref(model, "null model")?.0;
        let queries = &deref(queries, "null queries")?.0;
        if out_ids.is_null() || out_lens.is_null() || k == 0 {
            return Err(Fail::Arg("null output buffers or k = 0"));
        }
        let nq = queries.count();
        let total = nq.checked_mul(k).ok_or(Fail::Arg("count * k overflows"))?;
        let ids = std::slice::from_raw_parts_mut(out_ids, total);
        let lens = std::slice::from_raw_parts_mut(out_lens, nq);
        let codes = model.encode(queries)?;
        let ctx = model.metric_context();
        for q in 0..nq {
            let list = match target {
                Search::Index(index) => {
                    let point = queries.column(q).into_owned();
                    let costs = model.probe_costs(&point, index)?;
                    index.query(codes.code(q), k, costs.as_ref(), ctx.metric())?.list
                }
                Search::Scan(base) => {
                    exhaustive_rank(codes.code(q), base.as_set(), ctx.metric(), k.min(base.count()))?
                }
            };
            lens[q] = list.len();
            ids[q * k..q * k + list.len()].copy_from_slice(&list.ids);
        }
        Ok(())
    })
}

/// Encodes every query column with `model` and retrieves up to `k` ids
/// from `index`. Row `q` of `out_ids` (`count * k` entries) receives the
/// ids of query `q`, best first; `out_lens[q]` their number.
///
/// # Safety
/// Handles must come from this library; `out_ids` must hold `count * k`
/// and `out_lens` `count` writable entries, `count` being the query count.
#[no_mangle]
pub unsafe extern "C" fn nary_index_query(
    index: *const NaryIndex,
    model: *const NaryModel,
    queries: *const NaryMatrix,
    k: usize,
    out_ids: *mut usize,
    out_lens: *mut usize,
) -> NaryStatus {
    match index.as_ref() {
        Some(index) => search(Search::Index(&index.0), model, queries, k, out_ids, out_lens),
        None => guard(|| Err(Fail::Arg("null index"))),
    }
}

/// Like [`nary_index_query`] but scans all of `base` with the model's code
/// distance.
///
/// # Safety
/// As for [`nary_index_query`].
#[no_mangle]
pub unsafe extern "C" fn nary_exhaustive_query(
    base: *const NaryCodes,
    model: *const NaryModel,
    queries: *const NaryMatrix,
    k: usize,
    out_ids: *mut usize,
    out_lens: *mut usize,
) -> NaryStatus {
    match base.as_ref() {
        Some(base) => search(Search::Scan(&base.0), model, queries, k, out_ids, out_lens),
        None => guard(|| Err(Fail::Arg("null base codes"))),
    }
}
