//! C ABI for the quaternion self-attention library.
//!
//! Conventions:
//!
//! * Tensors are opaque `QsTensor` handles created and destroyed by this
//!   library. Every non-consuming function leaves its arguments untouched.
//! * Functions that can fail return a [`QsStatus`]; constructors return a
//!   null pointer on failure. `qs_last_error_message` describes the most
//!   recent failure on the calling thread.
//! * Score matrices and attention maps are real-valued tensors of shape
//!   `[T, T]` carried in quaternion plane 0, matching the QTB file
//!   convention.
//! * Panics never cross the boundary; they are caught and reported as
//!   `QS_STATUS_INTERNAL_ERROR`.

use qsattn::analysis as qa;
use qsattn::attention as qat;
use qsattn::bench as qb;
use qsattn::{Error, QTensor, Rng};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    IoError = 4,
    FormatError = 5,
    Utf8Error = 6,
    InternalError = 7,
}

/// Attention formulation selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsMode {
    Shared = 0,
    Componentwise = 1,
}

/// Closed-form MACs model output.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QsMacsBreakdown {
    pub projections: u64,
    pub score_stage: u64,
    pub av_stage: u64,
    pub softmax_ops: u64,
    pub score_muls_per_pair: u64,
    pub total: u64,
}

/// Opaque quaternion tensor handle.
pub struct QsTensor {
    inner: QTensor,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> QsStatus {
    match err {
        Error::ShapeMismatch(_) => QsStatus::ShapeMismatch,
        Error::InvalidArgument(_) => QsStatus::InvalidArgument,
        Error::Io(_) => QsStatus::IoError,
        Error::Format(_) => QsStatus::FormatError,
    }
}

/// Runs a fallible body, translating errors and panics into status codes.
fn guarded(body: impl FnOnce() -> Result<(), QsStatus> + std::panic::UnwindSafe) -> QsStatus {
    match catch_unwind(body) {
        Ok(Ok(())) => QsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            QsStatus::InternalError
        }
    }
}

fn guarded_ptr<T>(body: impl FnOnce() -> Result<*mut T, QsStatus> + std::panic::UnwindSafe) -> *mut T {
    match catch_unwind(body) {
        Ok(Ok(ptr)) => ptr,
        Ok(Err(_)) => ptr::null_mut(),
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

fn lib_err(err: Error) -> QsStatus {
    set_error(&err.to_string());
    status_of(&err)
}

unsafe fn tensor_ref<'a>(ptr: *const QsTensor) -> Result<&'a QTensor, QsStatus> {
    if ptr.is_null() {
        set_error("null tensor pointer");
        return Err(QsStatus::NullPointer);
    }
    Ok(unsafe { &(*ptr).inner })
}

fn boxed(tensor: QTensor) -> *mut QsTensor {
    Box::into_raw(Box::new(QsTensor { inner: tensor }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// is valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a tensor from four real planes of `len` values each; `len` must
/// equal the product of `shape[0..ndim]`.
///
/// # Safety
/// `shape` must point to `ndim` readable values and each plane pointer to
/// `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_new(
    shape: *const usize,
    ndim: usize,
    q0: *const f64,
    q1: *const f64,
    q2: *const f64,
    q3: *const f64,
    len: usize,
) -> *mut QsTensor {
    guarded_ptr(AssertUnwindSafe(|| {
        if shape.is_null() || q0.is_null() || q1.is_null() || q2.is_null() || q3.is_null() {
            set_error("null pointer argument");
            return Err(QsStatus::NullPointer);
        }
        let shape = unsafe { std::slice::from_raw_parts(shape, ndim) }.to_vec();
        let plane = |p: *const f64| unsafe { std::slice::from_raw_parts(p, len) }.to_vec();
        let tensor = QTensor::new(shape, [plane(q0), plane(q1), plane(q2), plane(q3)])
            .map_err(lib_err)?;
        Ok(boxed(tensor))
    }))
}

/// Seeded Gaussian tensor with standard deviation `scale`.
///
/// # Safety
/// `shape` must point to `ndim` readable values.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_random(
    shape: *const usize,
    ndim: usize,
    seed: u64,
    stream: u64,
    scale: f64,
) -> *mut QsTensor {
    guarded_ptr(AssertUnwindSafe(|| {
        if shape.is_null() {
            set_error("null shape pointer");
            return Err(QsStatus::NullPointer);
        }
        let shape = unsafe { std::slice::from_raw_parts(shape, ndim) }.to_vec();
        let mut rng = Rng::with_stream(seed, stream);
        Ok(boxed(QTensor::random(shape, &mut rng, scale).map_err(lib_err)?))
    }))
}

/// Frees a tensor created by this library. Null is ignored.
///
/// # Safety
/// `tensor` must be a pointer previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_free(tensor: *mut QsTensor) {
    if !tensor.is_null() {
        drop(unsafe { Box::from_raw(tensor) });
    }
}

/// Number of axes.
///
/// # Safety
/// `tensor` must be a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_ndim(tensor: *const QsTensor) -> usize {
    match unsafe { tensor_ref(tensor) } {
        Ok(t) => t.ndim(),
        Err(_) => 0,
    }
}

/// Elements per plane.
///
/// # Safety
/// `tensor` must be a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_len(tensor: *const QsTensor) -> usize {
    match unsafe { tensor_ref(tensor) } {
        Ok(t) => t.len(),
        Err(_) => 0,
    }
}

/// Copies the shape into `out`, which must hold `qs_tensor_ndim` values.
///
/// # Safety
/// `tensor` must be live; `out` must be writable for `ndim` values.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_shape(tensor: *const QsTensor, out: *mut usize) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let t = unsafe { tensor_ref(tensor) }?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let shape = t.shape();
        unsafe { std::slice::from_raw_parts_mut(out, shape.len()) }.copy_from_slice(shape);
        Ok(())
    }))
}

/// Copies plane `plane` (0..4) into `out`, which must hold `qs_tensor_len`
/// doubles.
///
/// # Safety
/// `tensor` must be live; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_plane(
    tensor: *const QsTensor,
    plane: usize,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let t = unsafe { tensor_ref(tensor) }?;
        if plane >= 4 {
            set_error("plane index out of range");
            return Err(QsStatus::InvalidArgument);
        }
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let data = t.plane(plane);
        unsafe { std::slice::from_raw_parts_mut(out, data.len()) }.copy_from_slice(data);
        Ok(())
    }))
}

unsafe fn path_from(ptr: *const c_char) -> Result<String, QsStatus> {
    if ptr.is_null() {
        set_error("null path pointer");
        return Err(QsStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map(|s| s.to_string())
        .map_err(|_| {
            set_error("path is not valid UTF-8");
            QsStatus::Utf8Error
        })
}

/// Reads a QTB file.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_read_qtb(path: *const c_char) -> *mut QsTensor {
    guarded_ptr(AssertUnwindSafe(|| {
        let path = unsafe { path_from(path) }?;
        Ok(boxed(qsattn::qtb::read_file(path).map_err(lib_err)?))
    }))
}

/// Writes a QTB file.
///
/// # Safety
/// `tensor` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qs_tensor_write_qtb(
    tensor: *const QsTensor,
    path: *const c_char,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let t = unsafe { tensor_ref(tensor) }?;
        let path = unsafe { path_from(path) }?;
        qsattn::qtb::write_file(path, t).map_err(lib_err)
    }))
}

/// Shared real-valued score matrix `scale * Re(Q ⊗ K†)` as a `[T, T]`
/// real tensor.
///
/// # Safety
/// `q` and `k` must be live tensor handles.
#[no_mangle]
pub unsafe extern "C" fn qs_shared_score(
    q: *const QsTensor,
    k: *const QsTensor,
    scale: f64,
) -> *mut QsTensor {
    guarded_ptr(AssertUnwindSafe(|| {
        let q = unsafe { tensor_ref(q) }?;
        let k = unsafe { tensor_ref(k) }?;
        let s = qat::shared_score(q, k, scale).map_err(lib_err)?;
        Ok(boxed(QTensor::from_real_mat(&s)))
    }))
}

/// The four component score matrices of `scale * (Q ⊗ K^T)`; fills
/// `out_components[0..4]` with `[T, T]` real tensors.
///
/// # Safety
/// `q` and `k` must be live; `out_components` must be writable for 4 slots.
#[no_mangle]
pub unsafe extern "C" fn qs_componentwise_score(
    q: *const QsTensor,
    k: *const QsTensor,
    scale: f64,
    out_components: *mut *mut QsTensor,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let q = unsafe { tensor_ref(q) }?;
        let k = unsafe { tensor_ref(k) }?;
        if out_components.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let scores = qat::tay_score(q, k, scale).map_err(lib_err)?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_components, 4) };
        for (slot, score) in out.iter_mut().zip(scores.iter()) {
            *slot = boxed(QTensor::from_real_mat(score));
        }
        Ok(())
    }))
}

/// Full single-head attention in the requested formulation. For
/// `QS_MODE_SHARED` pass `scale = 1/sqrt(4 d_h)`; for componentwise
/// `1/sqrt(d_h)`.
///
/// # Safety
/// `q`, `k`, `v` must be live tensor handles.
#[no_mangle]
pub unsafe extern "C" fn qs_attention(
    q: *const QsTensor,
    k: *const QsTensor,
    v: *const QsTensor,
    scale: f64,
    mode: QsMode,
) -> *mut QsTensor {
    guarded_ptr(AssertUnwindSafe(|| {
        let q = unsafe { tensor_ref(q) }?;
        let k = unsafe { tensor_ref(k) }?;
        let v = unsafe { tensor_ref(v) }?;
        let out = match mode {
            QsMode::Shared => qat::shared_attention(q, k, v, scale),
            QsMode::Componentwise => qat::tay_attention(q, k, v, scale),
        }
        .map_err(lib_err)?;
        Ok(boxed(out))
    }))
}

/// Argmax agreement rate between two attention maps (real `[T, T]`
/// tensors, plane 0).
///
/// # Safety
/// `map_a` and `map_b` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_agreement_rate(
    map_a: *const QsTensor,
    map_b: *const QsTensor,
    out: *mut f64,
) -> QsStatus {
    unsafe { qs_topk_agreement(map_a, map_b, 1, out) }
}

/// Directional top-k agreement between two attention maps.
///
/// # Safety
/// `map_a` and `map_b` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_topk_agreement(
    map_a: *const QsTensor,
    map_b: *const QsTensor,
    k: usize,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let a = unsafe { tensor_ref(map_a) }?;
        let b = unsafe { tensor_ref(map_b) }?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let a = a.plane_as_mat(0).map_err(lib_err)?;
        let b = b.plane_as_mat(0).map_err(lib_err)?;
        let rate = qa::topk_agreement(&a, &b, k).map_err(lib_err)?;
        unsafe { *out = rate };
        Ok(())
    }))
}

unsafe fn samples_from<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], QsStatus> {
    if ptr.is_null() {
        set_error("null sample pointer");
        return Err(QsStatus::NullPointer);
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

/// Two-sample Kolmogorov-Smirnov statistic.
///
/// # Safety
/// Sample pointers must be readable for their stated lengths; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qs_ks_statistic(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let a = unsafe { samples_from(a, a_len) }?;
        let b = unsafe { samples_from(b, b_len) }?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        unsafe { *out = qa::ks_statistic(a, b).map_err(lib_err)? };
        Ok(())
    }))
}

/// Exact 1-Wasserstein distance between empirical distributions.
///
/// # Safety
/// Sample pointers must be readable for their stated lengths; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qs_wasserstein1(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let a = unsafe { samples_from(a, a_len) }?;
        let b = unsafe { samples_from(b, b_len) }?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        unsafe { *out = qa::wasserstein1(a, b).map_err(lib_err)? };
        Ok(())
    }))
}

/// Pearson correlation of the two empirical quantile functions at
/// `n_quantiles` equispaced probabilities.
///
/// # Safety
/// Sample pointers must be readable for their stated lengths; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qs_quantile_correlation(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    n_quantiles: usize,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        let a = unsafe { samples_from(a, a_len) }?;
        let b = unsafe { samples_from(b, b_len) }?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        unsafe { *out = qa::quantile_correlation(a, b, n_quantiles).map_err(lib_err)? };
        Ok(())
    }))
}

/// Analytic MACs model for one attention layer; the default total counts
/// the score and AV stages, with projections included when requested.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_macs_model(
    seq_len: usize,
    d_model: usize,
    heads: usize,
    mode: QsMode,
    include_projections: bool,
    out: *mut QsMacsBreakdown,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let attn_mode = match mode {
            QsMode::Shared => qat::AttnMode::Shared,
            QsMode::Componentwise => qat::AttnMode::Componentwise,
        };
        let cfg = qat::AttnConfig::new(seq_len, d_model, heads, attn_mode).map_err(lib_err)?;
        let macs = qb::macs_model(&cfg, include_projections).map_err(lib_err)?;
        unsafe {
            *out = QsMacsBreakdown {
                projections: macs.projections,
                score_stage: macs.score_stage,
                av_stage: macs.av_stage,
                softmax_ops: macs.softmax_ops,
                score_muls_per_pair: macs.score_muls_per_pair,
                total: macs.total,
            };
        }
        Ok(())
    }))
}

/// Worst reconstruction residual of the score decomposition on a seeded
/// random instance of the given dimensions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_decompose_residual(
    seq_len: usize,
    d_in: usize,
    d_head: usize,
    seed: u64,
    mode: QsMode,
    out: *mut f64,
) -> QsStatus {
    guarded(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(QsStatus::NullPointer);
        }
        let mut rng = Rng::with_stream(seed, 0xDE);
        let w_std = 1.0 / (4.0 * d_in.max(1) as f64).sqrt();
        let x = QTensor::random(vec![seq_len, d_in], &mut rng, 1.0).map_err(lib_err)?;
        let w_q = QTensor::random(vec![d_in, d_head], &mut rng, w_std).map_err(lib_err)?;
        let w_k = QTensor::random(vec![d_in, d_head], &mut rng, w_std).map_err(lib_err)?;
        let report = match mode {
            QsMode::Componentwise => qa::decompose_tay(&x, &w_q, &w_k),
            QsMode::Shared => qa::decompose_ours(&x, &w_q, &w_k),
        }
        .map_err(lib_err)?;
        unsafe { *out = report.residual_max_abs };
        Ok(())
    }))
}
