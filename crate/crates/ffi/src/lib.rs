//! C ABI over the `artfid` crate.
//!
//! Every function returns an [`ArtfidStatus`]. On failure the thread-local
//! last error (kind and message) describes what went wrong; it stays valid
//! until the next failing call on the same thread. Handles are opaque and
//! must be released with their `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use artfid::fid_infinity::ExtrapolationConfig;
use artfid::formats;
use artfid::ranking::{self, ComparisonMatrix, FitOptions, PValueMethod};
use artfid::{EmbeddingSet, Error, ErrorCategory, GaussianStats};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtfidStatus {
    Ok = 0,
    InvalidArgument = 2,
    Format = 3,
    Numerical = 4,
    Statistical = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

impl From<&Error> for ArtfidStatus {
    fn from(e: &Error) -> Self {
        match (e, e.category()) {
            (Error::FileNotFound(_) | Error::Io { .. }, _) => ArtfidStatus::Io,
            (_, ErrorCategory::Usage) => ArtfidStatus::InvalidArgument,
            (_, ErrorCategory::Format) => ArtfidStatus::Format,
            (_, ErrorCategory::Numerical) => ArtfidStatus::Numerical,
            (_, ErrorCategory::Statistical) => ArtfidStatus::Statistical,
        }
    }
}

struct LastError {
    kind: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last_error(kind: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(LastError {
            kind: clean(kind),
            message: clean(message),
        })
    });
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> ArtfidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArtfidStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.kind(), &e.to_string());
            ArtfidStatus::from(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error("NullPointer", &format!("{what} must not be null"));
            ArtfidStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error("Panic", &msg);
            ArtfidStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

fn check_len(expected: usize, given: usize) -> FfiResult {
    if given < expected {
        return Err(Error::InvalidArgument(format!("output buffer holds {given} values, {expected} needed")).into());
    }
    Ok(())
}

fn boxed<T>(value: T, dst: &mut *mut T) {
    *dst = Box::into_raw(Box::new(value));
}

/// Row-major `n_rows x n_cols` embedding matrix.
pub struct ArtfidEmbeddings {
    inner: EmbeddingSet,
}

/// Mean and covariance of an embedding set.
pub struct ArtfidStats {
    inner: GaussianStats,
}

/// Square pairwise win-count matrix.
pub struct ArtfidComparisons {
    inner: ComparisonMatrix,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArtfidExtrapolationConfig {
    pub k_points: usize,
    pub min_subsample: usize,
    pub seed: u64,
    pub subsample_both: bool,
}

impl From<&ArtfidExtrapolationConfig> for ExtrapolationConfig {
    fn from(c: &ArtfidExtrapolationConfig) -> Self {
        ExtrapolationConfig {
            k_points: c.k_points,
            min_subsample: c.min_subsample,
            seed: c.seed,
            subsample_both: c.subsample_both,
        }
    }
}

/// `fid_infinity` and `artfid_infinity` are NaN unless `has_infinity`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArtfidResult {
    pub fid: f64,
    pub fid_infinity: f64,
    pub mean_content_distance: f64,
    pub artfid: f64,
    pub artfid_infinity: f64,
    pub has_infinity: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArtfidCorrelation {
    pub rho: f64,
    pub p_two_sided: f64,
    pub p_one_sided: f64,
    pub n: usize,
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version string"),
};

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn artfid_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Kind of the last error on this thread (e.g. "BadMagic"), or NULL.
#[no_mangle]
pub extern "C" fn artfid_last_error_kind() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |l| l.kind.as_ptr()))
}

/// Human-readable message of the last error on this thread, or NULL.
#[no_mangle]
pub extern "C" fn artfid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |l| l.message.as_ptr()))
}

#[no_mangle]
pub extern "C" fn artfid_extrapolation_config_default() -> ArtfidExtrapolationConfig {
    let d = ExtrapolationConfig::default();
    ArtfidExtrapolationConfig {
        k_points: d.k_points,
        min_subsample: d.min_subsample,
        seed: d.seed,
        subsample_both: d.subsample_both,
    }
}

/// Copies `n_rows * n_cols` row-major values. `tag` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_new(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    tag: *const c_char,
    out_handle: *mut *mut ArtfidEmbeddings,
) -> ArtfidStatus {
    guard(|| {
        let dst = out(out_handle, "out_handle")?;
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Error::InvalidArgument("n_rows * n_cols overflows".into()))?;
        let values = slice(data, len, "data")?.to_vec();
        let tag = if tag.is_null() { String::new() } else { string(tag, "tag")? };
        boxed(
            ArtfidEmbeddings {
                inner: EmbeddingSet::new(n_rows, n_cols, values, tag)?,
            },
            dst,
        );
        Ok(())
    })
}

/// Reads an AFE1 file.
#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_read(path: *const c_char, out_handle: *mut *mut ArtfidEmbeddings) -> ArtfidStatus {
    guard(|| {
        let dst = out(out_handle, "out_handle")?;
        let path = PathBuf::from(string(path, "path")?);
        boxed(
            ArtfidEmbeddings {
                inner: formats::read_embeddings(&path)?,
            },
            dst,
        );
        Ok(())
    })
}

/// Writes an AFE1 file (values are stored as f32).
#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_write(handle: *const ArtfidEmbeddings, path: *const c_char) -> ArtfidStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let path = PathBuf::from(string(path, "path")?);
        formats::write_embeddings(&h.inner, &path)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_shape(
    handle: *const ArtfidEmbeddings,
    n_rows: *mut usize,
    n_cols: *mut usize,
) -> ArtfidStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        *out(n_rows, "n_rows")? = h.inner.n_rows();
        *out(n_cols, "n_cols")? = h.inner.n_cols();
        Ok(())
    })
}

/// Copies the row-major values into `dst`, which must hold `n_rows * n_cols`.
#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_data(handle: *const ArtfidEmbeddings, dst: *mut f64, len: usize) -> ArtfidStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let src = h.inner.data();
        check_len(src.len(), len)?;
        slice_mut(dst, src.len(), "dst")?.copy_from_slice(src);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_embeddings_free(handle: *mut ArtfidEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn artfid_stats_compute(
    embeddings: *const ArtfidEmbeddings,
    out_handle: *mut *mut ArtfidStats,
) -> ArtfidStatus {
    guard(|| {
        let e = deref(embeddings, "embeddings")?;
        let dst = out(out_handle, "out_handle")?;
        boxed(
            ArtfidStats {
                inner: artfid::compute_stats(&e.inner)?,
            },
            dst,
        );
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_stats_dim(handle: *const ArtfidStats, dim: *mut usize) -> ArtfidStatus {
    guard(|| {
        *out(dim, "dim")? = deref(handle, "handle")?.inner.dim();
        Ok(())
    })
}

/// Copies the mean vector (`dim` values).
#[no_mangle]
pub unsafe extern "C" fn artfid_stats_mean(handle: *const ArtfidStats, dst: *mut f64, len: usize) -> ArtfidStatus {
    guard(|| {
        let s = &deref(handle, "handle")?.inner;
        check_len(s.dim(), len)?;
        slice_mut(dst, s.dim(), "dst")?.copy_from_slice(s.mu().as_slice());
        Ok(())
    })
}

/// Copies the covariance matrix row-major (`dim * dim` values).
#[no_mangle]
pub unsafe extern "C" fn artfid_stats_covariance(handle: *const ArtfidStats, dst: *mut f64, len: usize) -> ArtfidStatus {
    guard(|| {
        let s = &deref(handle, "handle")?.inner;
        let d = s.dim();
        check_len(d * d, len)?;
        let dst = slice_mut(dst, d * d, "dst")?;
        for i in 0..d {
            for j in 0..d {
                dst[i * d + j] = s.sigma()[(i, j)];
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_stats_free(handle: *mut ArtfidStats) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn artfid_frechet_distance(
    a: *const ArtfidStats,
    b: *const ArtfidStats,
    distance: *mut f64,
) -> ArtfidStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        *out(distance, "distance")? = artfid::frechet_distance(&a.inner, &b.inner)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_fid(
    style: *const ArtfidEmbeddings,
    generated: *const ArtfidEmbeddings,
    fid: *mut f64,
) -> ArtfidStatus {
    guard(|| {
        let (s, g) = (deref(style, "style")?, deref(generated, "generated")?);
        *out(fid, "fid")? = artfid::fid(&s.inner, &g.inner)?;
        Ok(())
    })
}

/// Extrapolated FID. `slope` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn artfid_fid_infinity(
    style: *const ArtfidEmbeddings,
    generated: *const ArtfidEmbeddings,
    config: *const ArtfidExtrapolationConfig,
    intercept: *mut f64,
    slope: *mut f64,
) -> ArtfidStatus {
    guard(|| {
        let (s, g) = (deref(style, "style")?, deref(generated, "generated")?);
        let cfg = ExtrapolationConfig::from(deref(config, "config")?);
        let dst = out(intercept, "intercept")?;
        let trace = artfid::fid_infinity(&s.inner, &g.inner, &cfg)?;
        *dst = trace.intercept;
        if let Some(sl) = slope.as_mut() {
            *sl = trace.slope;
        }
        Ok(())
    })
}

/// ArtFID from per-pair content distances. `config` may be NULL to skip
/// extrapolation.
#[no_mangle]
pub unsafe extern "C" fn artfid_artfid(
    distances: *const f64,
    n_distances: usize,
    style: *const ArtfidEmbeddings,
    generated: *const ArtfidEmbeddings,
    config: *const ArtfidExtrapolationConfig,
    result: *mut ArtfidResult,
) -> ArtfidStatus {
    guard(|| {
        let d = slice(distances, n_distances, "distances")?.to_vec();
        let (s, g) = (deref(style, "style")?, deref(generated, "generated")?);
        let cfg = config.as_ref().map(ExtrapolationConfig::from);
        let dst = out(result, "result")?;
        let d = artfid::ContentDistanceVector::new(d, "file")?;
        let r = artfid::artfid(&d, &s.inner, &g.inner, cfg.as_ref())?;
        *dst = ArtfidResult {
            fid: r.fid,
            fid_infinity: r.fid_infinity.unwrap_or(f64::NAN),
            mean_content_distance: r.mean_content_distance,
            artfid: r.artfid,
            artfid_infinity: r.artfid_infinity.unwrap_or(f64::NAN),
            has_infinity: r.fid_infinity.is_some(),
        };
        Ok(())
    })
}

/// `wins` is `m * m` row-major; entry `(i, j)` counts wins of `i` over `j`.
/// Entities are labelled "0" to "m-1".
#[no_mangle]
pub unsafe extern "C" fn artfid_comparisons_new(
    wins: *const u64,
    m: usize,
    out_handle: *mut *mut ArtfidComparisons,
) -> ArtfidStatus {
    guard(|| {
        let dst = out(out_handle, "out_handle")?;
        let len = m.checked_mul(m).ok_or_else(|| Error::InvalidArgument("m * m overflows".into()))?;
        let flat = slice(wins, len, "wins")?;
        let rows = (0..m).map(|i| flat[i * m..(i + 1) * m].to_vec()).collect();
        let labels = (0..m).map(|i| i.to_string()).collect();
        boxed(
            ArtfidComparisons {
                inner: ComparisonMatrix::new(labels, rows)?,
            },
            dst,
        );
        Ok(())
    })
}

/// Reads a comparison CSV (header of labels, then the win-count rows).
#[no_mangle]
pub unsafe extern "C" fn artfid_comparisons_read(
    path: *const c_char,
    out_handle: *mut *mut ArtfidComparisons,
) -> ArtfidStatus {
    guard(|| {
        let dst = out(out_handle, "out_handle")?;
        let path = PathBuf::from(string(path, "path")?);
        boxed(
            ArtfidComparisons {
                inner: formats::read_comparisons(&path)?,
            },
            dst,
        );
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_comparisons_len(handle: *const ArtfidComparisons, m: *mut usize) -> ArtfidStatus {
    guard(|| {
        *out(m, "m")? = deref(handle, "handle")?.inner.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn artfid_comparisons_free(handle: *mut ArtfidComparisons) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Bradley-Terry scores (summing to 1) into `gamma`, which must hold `m`
/// values. `iterations` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn artfid_bradley_terry(
    comparisons: *const ArtfidComparisons,
    tol: f64,
    max_iter: usize,
    gamma: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> ArtfidStatus {
    guard(|| {
        let w = &deref(comparisons, "comparisons")?.inner;
        check_len(w.len(), len)?;
        let dst = slice_mut(gamma, w.len(), "gamma")?;
        let fit = ranking::bradley_terry_fit(w, &FitOptions { tol, max_iter })?;
        dst.copy_from_slice(&fit.gamma);
        if let Some(it) = iterations.as_mut() {
            *it = fit.iterations;
        }
        Ok(())
    })
}

/// Spearman's rho with t-approximation (or exact, n <= 8) p-values.
#[no_mangle]
pub unsafe extern "C" fn artfid_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    exact: bool,
    result: *mut ArtfidCorrelation,
) -> ArtfidStatus {
    guard(|| {
        let (x, y) = (slice(x, n, "x")?, slice(y, n, "y")?);
        let dst = out(result, "result")?;
        let method = if exact {
            PValueMethod::ExactPermutation
        } else {
            PValueMethod::TApproximation
        };
        let r = ranking::spearman_rho_with(x, y, method)?;
        *dst = ArtfidCorrelation {
            rho: r.rho,
            p_two_sided: r.p_two_sided,
            p_one_sided: r.p_one_sided,
            n: r.n,
        };
        Ok(())
    })
}

/// Fraction of positions where `predicted[i] == target[i]`.
#[no_mangle]
pub unsafe extern "C" fn artfid_deception_rate(
    predicted: *const u64,
    target: *const u64,
    n: usize,
    rate: *mut f64,
) -> ArtfidStatus {
    guard(|| {
        let (p, t) = (slice(predicted, n, "predicted")?, slice(target, n, "target")?);
        let dst = out(rate, "rate")?;
        let pairs: Vec<(u64, u64)> = p.iter().copied().zip(t.iter().copied()).collect();
        *dst = artfid::deception_rate(&pairs)?;
        Ok(())
    })
}
