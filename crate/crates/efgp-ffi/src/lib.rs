//! C ABI for fitting and evaluating EFGP regression models. All functions
//! return an `EfgpStatus` code; on failure a thread-local message is
//! retrievable with `efgp_last_error`. Models are opaque handles owned by
//! the library and released with `efgp_model_free`.

use efgp::bounds;
use efgp::error::EfgpError;
use efgp::grid::FourierGrid;
use efgp::kernels::KernelSpec;
use efgp::solver::{Dataset, EFGPModel, FitOptions};
use libc::{c_char, c_double, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfgpStatus {
    EfgpOk = 0,
    /// Input outside a mathematical domain (e.g. points off the unit cube).
    EfgpErrDomain = 1,
    /// Structurally invalid argument (null pointer, bad sizes, bad family).
    EfgpErrArgument = 2,
    /// A theorem hypothesis fails, so no rigorous parameters exist.
    EfgpErrHypothesis = 3,
    /// Problem size exceeds a configured cap.
    EfgpErrResource = 4,
    /// Dense linear algebra failure.
    EfgpErrLinalg = 5,
    /// File I/O failure.
    EfgpErrIo = 6,
    /// Malformed serialized input.
    EfgpErrParse = 7,
    /// Iteration failed to converge.
    EfgpErrConvergence = 8,
    /// Internal panic; state may be inconsistent.
    EfgpErrInternal = 9,
}

/// Kernel family selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfgpKernel {
    EfgpKernelSe = 0,
    EfgpKernelMatern = 1,
}

/// Opaque fitted-model handle.
pub struct EfgpModelHandle {
    inner: EFGPModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap());
}

fn status_of(err: &EfgpError) -> EfgpStatus {
    match err {
        EfgpError::Domain(_) => EfgpStatus::EfgpErrDomain,
        EfgpError::Argument(_) => EfgpStatus::EfgpErrArgument,
        EfgpError::Hypothesis(_) => EfgpStatus::EfgpErrHypothesis,
        EfgpError::Resource(_) => EfgpStatus::EfgpErrResource,
        EfgpError::Linalg(_) => EfgpStatus::EfgpErrLinalg,
        EfgpError::Io(_) => EfgpStatus::EfgpErrIo,
        EfgpError::Parse(_) => EfgpStatus::EfgpErrParse,
    }
}

fn fail(err: EfgpError) -> EfgpStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn arg_error(msg: &str) -> EfgpStatus {
    set_error(msg);
    EfgpStatus::EfgpErrArgument
}

fn guarded<F: FnOnce() -> EfgpStatus>(f: F) -> EfgpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            EfgpStatus::EfgpErrInternal
        }
    }
}

fn kernel_of(family: EfgpKernel, lengthscale: f64, nu: f64) -> Result<KernelSpec, EfgpError> {
    match family {
        EfgpKernel::EfgpKernelSe => KernelSpec::se(lengthscale),
        EfgpKernel::EfgpKernelMatern => KernelSpec::matern(lengthscale, nu),
    }
}

unsafe fn slice_arg<'a>(ptr: *const c_double, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, EfgpStatus> {
    if ptr.is_null() {
        return Err(arg_error("null path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(arg_error("path is not valid UTF-8")),
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn efgp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Resolve rigorous grid parameters (h, m) meeting uniform kernel error
/// `eps` for the given kernel; `nu` is ignored for the SE family.
#[no_mangle]
pub extern "C" fn efgp_params(
    family: EfgpKernel,
    lengthscale: c_double,
    nu: c_double,
    d: size_t,
    eps: c_double,
    h_out: *mut c_double,
    m_out: *mut size_t,
) -> EfgpStatus {
    guarded(|| {
        if h_out.is_null() || m_out.is_null() {
            return arg_error("null output pointer");
        }
        let params = match family {
            EfgpKernel::EfgpKernelSe => bounds::se_params(lengthscale, d, eps),
            EfgpKernel::EfgpKernelMatern => bounds::matern_params(nu, lengthscale, d, eps),
        };
        match params {
            Ok(p) => {
                unsafe {
                    *h_out = p.h;
                    *m_out = p.m;
                }
                EfgpStatus::EfgpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Fit a model to `n` points (row-major n x d) with targets `y`. Pass the
/// (h, m) pair from `efgp_params` or any explicit admissible choice. On
/// success `*model_out` owns the handle; free it with `efgp_model_free`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn efgp_fit(
    family: EfgpKernel,
    lengthscale: c_double,
    nu: c_double,
    d: size_t,
    points: *const c_double,
    y: *const c_double,
    n: size_t,
    sigma: c_double,
    h: c_double,
    m: size_t,
    cg_tol: c_double,
    model_out: *mut *mut EfgpModelHandle,
) -> EfgpStatus {
    guarded(|| {
        if model_out.is_null() {
            return arg_error("null output pointer");
        }
        let (points, y) = unsafe {
            match (slice_arg(points, n * d), slice_arg(y, n)) {
                (Some(p), Some(y)) => (p, y),
                _ => return arg_error("null data pointer with nonzero n"),
            }
        };
        let kernel = match kernel_of(family, lengthscale, nu) {
            Ok(k) => k,
            Err(e) => return fail(e),
        };
        let result = (|| -> Result<EFGPModel, EfgpError> {
            let dataset = Dataset::new(points.to_vec(), y.to_vec(), d, sigma)?;
            let grid = FourierGrid::build(kernel, h, m, d)?;
            let opts = FitOptions {
                cg_tol,
                max_iters: None,
            };
            EFGPModel::fit(&dataset, grid, &opts)
        })();
        match result {
            Ok(model) => {
                if !model.diagnostics().converged {
                    set_error("conjugate gradient did not reach the requested tolerance");
                    return EfgpStatus::EfgpErrConvergence;
                }
                let handle = Box::new(EfgpModelHandle { inner: model });
                unsafe { *model_out = Box::into_raw(handle) };
                EfgpStatus::EfgpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Posterior mean at `nt` targets (row-major nt x d) into `out` (nt values).
#[no_mangle]
pub extern "C" fn efgp_predict_mean(
    model: *const EfgpModelHandle,
    targets: *const c_double,
    nt: size_t,
    out: *mut c_double,
) -> EfgpStatus {
    guarded(|| {
        if model.is_null() {
            return arg_error("null model handle");
        }
        let handle = unsafe { &*model };
        let d = handle.inner.grid().dim();
        let targets = match unsafe { slice_arg(targets, nt * d) } {
            Some(t) => t,
            None => return arg_error("null target pointer with nonzero nt"),
        };
        if nt > 0 && out.is_null() {
            return arg_error("null output pointer");
        }
        match handle.inner.predict_mean(targets) {
            Ok(mean) => {
                unsafe { std::ptr::copy_nonoverlapping(mean.as_ptr(), out, nt) };
                EfgpStatus::EfgpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Posterior variance at `nt` targets into `out`. Runs one CG solve per
/// target at tolerance `cg_tol`; not reentrant on a shared handle.
#[no_mangle]
pub extern "C" fn efgp_predict_var(
    model: *mut EfgpModelHandle,
    targets: *const c_double,
    nt: size_t,
    cg_tol: c_double,
    out: *mut c_double,
) -> EfgpStatus {
    guarded(|| {
        if model.is_null() {
            return arg_error("null model handle");
        }
        let handle = unsafe { &mut *model };
        let d = handle.inner.grid().dim();
        let targets = match unsafe { slice_arg(targets, nt * d) } {
            Some(t) => t,
            None => return arg_error("null target pointer with nonzero nt"),
        };
        if nt > 0 && out.is_null() {
            return arg_error("null output pointer");
        }
        match handle.inner.predict_var(targets, cg_tol) {
            Ok(var) => {
                unsafe { std::ptr::copy_nonoverlapping(var.as_ptr(), out, nt) };
                EfgpStatus::EfgpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Dimension d of a fitted model.
#[no_mangle]
pub extern "C" fn efgp_model_dim(model: *const EfgpModelHandle) -> size_t {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.grid().dim()
}

/// Total mode count M = (2m+1)^d of a fitted model.
#[no_mangle]
pub extern "C" fn efgp_model_modes(model: *const EfgpModelHandle) -> size_t {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.grid().num_modes()
}

/// CG iterations spent fitting the model.
#[no_mangle]
pub extern "C" fn efgp_model_iterations(model: *const EfgpModelHandle) -> size_t {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.diagnostics().iterations
}

/// Save a model: summary JSON at `json_path`, coefficients at `beta_path`.
#[no_mangle]
pub extern "C" fn efgp_model_save(
    model: *const EfgpModelHandle,
    json_path: *const c_char,
    beta_path: *const c_char,
) -> EfgpStatus {
    guarded(|| {
        if model.is_null() {
            return arg_error("null model handle");
        }
        let (jp, bp) = match (unsafe { path_arg(json_path) }, unsafe { path_arg(beta_path) }) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match unsafe { &*model }.inner.save(&jp, &bp) {
            Ok(()) => EfgpStatus::EfgpOk,
            Err(e) => fail(e),
        }
    })
}

/// Load a model saved with `efgp_model_save`.
#[no_mangle]
pub extern "C" fn efgp_model_load(
    json_path: *const c_char,
    beta_path: *const c_char,
    model_out: *mut *mut EfgpModelHandle,
) -> EfgpStatus {
    guarded(|| {
        if model_out.is_null() {
            return arg_error("null output pointer");
        }
        let (jp, bp) = match (unsafe { path_arg(json_path) }, unsafe { path_arg(beta_path) }) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match EFGPModel::load(&jp, &bp) {
            Ok(model) => {
                let handle = Box::new(EfgpModelHandle { inner: model });
                unsafe { *model_out = Box::into_raw(handle) };
                EfgpStatus::EfgpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a model handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn efgp_model_free(model: *mut EfgpModelHandle) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
