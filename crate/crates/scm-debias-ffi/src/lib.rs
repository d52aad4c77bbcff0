//! C ABI for the scm-debias library.
//!
//! Handles are opaque pointers created and destroyed by this crate; every
//! fallible call returns an `ScmStatus` and leaves a human-readable message
//! retrievable with `scm_last_error` on the calling thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use scm_debias::debias::{ConcatMode, DebiasSpec, Operator, Smoothing};
use scm_debias::embedding::{cosine, load_embeddings, EmbeddingFormat, EmbeddingTable};
use scm_debias::eval::spearman;
use scm_debias::subspace::{build_subspace, load_word_pairs, Axis, BiasSubspace};
use scm_debias::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Format = 5,
    Argument = 6,
    Numeric = 7,
    Fit = 8,
    Degenerate = 9,
    Config = 10,
    MissingToken = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// On-disk embedding layouts accepted by `scm_table_load`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmFormat {
    GloveText = 0,
    Word2VecText = 1,
}

/// Mitigation operators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmOperator {
    Subtraction = 0,
    LinearProjection = 1,
    PartialProjection = 2,
}

/// Smoothing families for Partial Projection. `sigma` is only read for
/// `Gaussian`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmSmoothing {
    ConstantOne = 0,
    InverseOnePlus = 1,
    Gaussian = 2,
}

/// How operators treat vectors twice the subspace dimension.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmConcatMode {
    Blockwise = 0,
    Replicated = 1,
}

/// Subspace axes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmAxis {
    Warmth = 0,
    Competence = 1,
}

/// Opaque handle to a loaded embedding table.
pub struct ScmTable(EmbeddingTable);

/// Opaque handle to a fitted bias subspace.
pub struct ScmSubspace(BiasSubspace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: ScmStatus, msg: &str) -> ScmStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> ScmStatus {
    match err {
        Error::Io { .. } => ScmStatus::Io,
        Error::Parse { .. } => ScmStatus::Parse,
        Error::Format(_) => ScmStatus::Format,
        Error::Argument(_) => ScmStatus::Argument,
        Error::Numeric(_) => ScmStatus::Numeric,
        Error::Fit(_) => ScmStatus::Fit,
        Error::Degenerate(_) => ScmStatus::Degenerate,
        Error::Config(_) => ScmStatus::Config,
    }
}

fn from_error(err: Error) -> ScmStatus {
    fail(status_of(&err), &err.to_string())
}

fn guard(f: impl FnOnce() -> ScmStatus) -> ScmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(ScmStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, ScmStatus> {
    if ptr.is_null() {
        return Err(fail(ScmStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(ScmStatus::InvalidUtf8, &format!("{what} is not valid UTF-8")))
}

fn smoothing_of(kind: ScmSmoothing, sigma: f64) -> Smoothing {
    match kind {
        ScmSmoothing::ConstantOne => Smoothing::ConstantOne,
        ScmSmoothing::InverseOnePlus => Smoothing::InverseOnePlus,
        ScmSmoothing::Gaussian => Smoothing::Gaussian { sigma },
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn scm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Load an embedding table from `path`. On success `*out` owns the handle;
/// release it with `scm_table_free`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scm_table_load(
    path: *const c_char,
    format: ScmFormat,
    out: *mut *mut ScmTable,
) -> ScmStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScmStatus::NullPointer, "out is null");
        }
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let fmt = match format {
            ScmFormat::GloveText => EmbeddingFormat::GloveText,
            ScmFormat::Word2VecText => EmbeddingFormat::Word2VecText,
        };
        match load_embeddings(path, fmt) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(ScmTable(table)));
                ScmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a table handle. Accepts null.
///
/// # Safety
/// `table` must come from `scm_table_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scm_table_free(table: *mut ScmTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Vector dimensionality, or 0 for a null handle.
///
/// # Safety
/// `table` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scm_table_dim(table: *const ScmTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.dim())
}

/// Number of stored tokens, or 0 for a null handle.
///
/// # Safety
/// `table` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scm_table_len(table: *const ScmTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Copy the vector for `token` into `out` (capacity `out_len` doubles).
/// Fails with `MissingToken` if the token is absent and `BufferTooSmall`
/// if `out_len` is less than the table dimension.
///
/// # Safety
/// `out` must point to at least `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scm_table_vector(
    table: *const ScmTable,
    token: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> ScmStatus {
    guard(|| {
        let Some(table) = table.as_ref() else {
            return fail(ScmStatus::NullPointer, "table is null");
        };
        let token = match required_str(token, "token") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(ScmStatus::NullPointer, "out is null");
        }
        let Some(v) = table.0.vector(token) else {
            return fail(ScmStatus::MissingToken, &format!("token {token:?} not found"));
        };
        if out_len < v.len() {
            return fail(
                ScmStatus::BufferTooSmall,
                &format!("need {} doubles, got {out_len}", v.len()),
            );
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
        ScmStatus::Ok
    })
}

/// Cosine similarity of two `len`-dim vectors.
///
/// # Safety
/// `a` and `b` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_cosine(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> ScmStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(ScmStatus::NullPointer, "a, b, and out must be non-null");
        }
        let a = std::slice::from_raw_parts(a, len);
        let b = std::slice::from_raw_parts(b, len);
        match cosine(a, b) {
            Ok(c) => {
                *out = c;
                ScmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Spearman rank correlation of two paired samples of length `n`, with a
/// two-sided p-value. Requires `n >= 3` and non-constant samples.
///
/// # Safety
/// `xs` and `ys` must point to `n` readable doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_spearman(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    rho_out: *mut f64,
    p_out: *mut f64,
) -> ScmStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || rho_out.is_null() || p_out.is_null() {
            return fail(ScmStatus::NullPointer, "all pointers must be non-null");
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        match spearman(xs, ys) {
            Ok((rho, p)) => {
                *rho_out = rho;
                *p_out = p;
                ScmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Fit both warmth and competence directions from JSON antonym-pair files,
/// keeping the `top_k` highest-scored in-vocabulary pairs per axis.
/// `replacements_path` may be null (no token substitutions). On success
/// `*out` owns the handle; release it with `scm_subspace_free`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scm_subspace_fit(
    table: *const ScmTable,
    warmth_pairs_path: *const c_char,
    competence_pairs_path: *const c_char,
    top_k: usize,
    center: bool,
    replacements_path: *const c_char,
    out: *mut *mut ScmSubspace,
) -> ScmStatus {
    guard(|| {
        let Some(table) = table.as_ref() else {
            return fail(ScmStatus::NullPointer, "table is null");
        };
        if out.is_null() {
            return fail(ScmStatus::NullPointer, "out is null");
        }
        let warmth_path = match required_str(warmth_pairs_path, "warmth_pairs_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let competence_path = match required_str(competence_pairs_path, "competence_pairs_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let replacements: HashMap<String, String> = if replacements_path.is_null() {
            HashMap::new()
        } else {
            let path = match required_str(replacements_path, "replacements_path") {
                Ok(s) => s,
                Err(status) => return status,
            };
            match scm_debias::embedding::load_replacement_map(path) {
                Ok(map) => map,
                Err(e) => return from_error(e),
            }
        };
        let warmth = match load_word_pairs(warmth_path, Axis::Warmth) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        let competence = match load_word_pairs(competence_path, Axis::Competence) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        match build_subspace(&table.0, &warmth, &competence, top_k, &replacements, center) {
            Ok(sub) => {
                *out = Box::into_raw(Box::new(ScmSubspace(sub)));
                ScmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a subspace handle. Accepts null.
///
/// # Safety
/// `subspace` must come from `scm_subspace_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scm_subspace_free(subspace: *mut ScmSubspace) {
    if !subspace.is_null() {
        drop(Box::from_raw(subspace));
    }
}

/// Subspace dimensionality, or 0 for a null handle.
///
/// # Safety
/// `subspace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn scm_subspace_dim(subspace: *const ScmSubspace) -> usize {
    subspace.as_ref().map_or(0, |s| s.0.dim())
}

/// Copy one unit direction of the subspace into `out`.
///
/// # Safety
/// `out` must point to at least `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scm_subspace_direction(
    subspace: *const ScmSubspace,
    axis: ScmAxis,
    out: *mut f64,
    out_len: usize,
) -> ScmStatus {
    guard(|| {
        let Some(sub) = subspace.as_ref() else {
            return fail(ScmStatus::NullPointer, "subspace is null");
        };
        if out.is_null() {
            return fail(ScmStatus::NullPointer, "out is null");
        }
        let u = match axis {
            ScmAxis::Warmth => &sub.0.u_warmth,
            ScmAxis::Competence => &sub.0.u_competence,
        };
        if out_len < u.len() {
            return fail(
                ScmStatus::BufferTooSmall,
                &format!("need {} doubles, got {out_len}", u.len()),
            );
        }
        std::ptr::copy_nonoverlapping(u.as_ptr(), out, u.len());
        ScmStatus::Ok
    })
}

/// Apply an operator along both subspace directions to one vector. `vec`
/// may have the subspace dimension d or 2d (concatenated identities); the
/// output has the same length as the input. `beta` and the smoothing
/// parameters are only read by Partial Projection.
///
/// # Safety
/// `vec` must point to `len` readable doubles and `out` to `len` writable
/// doubles; the two ranges may alias only if identical.
#[no_mangle]
pub unsafe extern "C" fn scm_debias_vector(
    subspace: *const ScmSubspace,
    operator: ScmOperator,
    beta: f64,
    smoothing: ScmSmoothing,
    sigma: f64,
    concat_mode: ScmConcatMode,
    vec: *const f64,
    len: usize,
    out: *mut f64,
) -> ScmStatus {
    guard(|| {
        let Some(sub) = subspace.as_ref() else {
            return fail(ScmStatus::NullPointer, "subspace is null");
        };
        if vec.is_null() || out.is_null() {
            return fail(ScmStatus::NullPointer, "vec and out must be non-null");
        }
        let spec = DebiasSpec {
            operator: match operator {
                ScmOperator::Subtraction => Operator::Subtraction,
                ScmOperator::LinearProjection => Operator::LinearProjection,
                ScmOperator::PartialProjection => Operator::PartialProjection,
            },
            beta,
            smoothing: smoothing_of(smoothing, sigma),
            concat_mode: match concat_mode {
                ScmConcatMode::Blockwise => ConcatMode::Blockwise,
                ScmConcatMode::Replicated => ConcatMode::Replicated,
            },
        };
        if let Err(e) = spec.smoothing.validate() {
            return from_error(e);
        }
        let input = std::slice::from_raw_parts(vec, len);
        match scm_debias::debias::debias_vector(input, &sub.0, &spec) {
            Ok(result) => {
                std::ptr::copy_nonoverlapping(result.as_ptr(), out, result.len());
                ScmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
