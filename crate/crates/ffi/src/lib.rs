//! C ABI for the cqbem solver.
//!
//! Handles are opaque pointers created by `*_new`/`*_parse` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`CqbemStatus`]; on failure a description is available from
//! [`cqbem_last_error`] until the next call on the same thread.

use cqbem::app::{self, Options, RunOutput};
use cqbem::config::RunConfig;
use cqbem::Error;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqbemStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Mesh = 4,
    Solve = 5,
    Precondition = 6,
    Io = 7,
    BufferTooSmall = 8,
    OutOfRange = 9,
    Panic = 10,
    Other = 11,
}

/// Parsed run configuration.
pub struct CqbemConfig {
    inner: RunConfig,
}

/// Result of a completed run: time grid and field samples.
pub struct CqbemRun {
    inner: RunOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CqbemStatus {
    match e {
        Error::Config { .. } | Error::InvalidTransferSpec(_) | Error::TransferConfig(_) | Error::InvalidScheme(_) => {
            CqbemStatus::Config
        }
        Error::MeshParse { .. }
        | Error::NonTriangleFace { .. }
        | Error::NonManifoldEdge(..)
        | Error::NonOrientable(_)
        | Error::DegenerateTriangle(_)
        | Error::InvalidMesh(_) => CqbemStatus::Mesh,
        Error::SolveFailed { .. } | Error::SymbolEvaluation { .. } => CqbemStatus::Solve,
        Error::Precondition(_) | Error::PointNotInside(_) | Error::NotInRightHalfPlane(_) => CqbemStatus::Precondition,
        Error::Io(_) => CqbemStatus::Io,
        _ => CqbemStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CqbemStatus, String)>) -> CqbemStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqbemStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CqbemStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CqbemStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (CqbemStatus, String)> {
    if p.is_null() {
        return Err((CqbemStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CqbemStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn null(name: &str) -> (CqbemStatus, String) {
    (CqbemStatus::NullArgument, format!("{name} is null"))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next cqbem call on the same thread.
#[no_mangle]
pub extern "C" fn cqbem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cqbem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses configuration text. Relative paths resolve against `base_dir`
/// (the current directory when null).
///
/// # Safety
/// `text` and `base_dir` must be null or NUL-terminated; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqbem_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut CqbemConfig,
) -> CqbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let cfg = RunConfig::parse(text, Path::new(base)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqbemConfig { inner: cfg }));
        Ok(())
    })
}

/// Reads and parses a configuration file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqbem_config_from_file(path: *const c_char, out: *mut *mut CqbemConfig) -> CqbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = RunConfig::from_file(str_arg(path, "path")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqbemConfig { inner: cfg }));
        Ok(())
    })
}

/// Overrides the output directory.
///
/// # Safety
/// `config` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cqbem_config_set_output_dir(config: *mut CqbemConfig, dir: *const c_char) -> CqbemStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.set_output_dir(str_arg(dir, "dir")?.into());
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cqbem_config_free(config: *mut CqbemConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the scattering problem and writes its CSV files and manifest.
///
/// # Safety
/// `config` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run(config: *const CqbemConfig, quiet: c_int, out: *mut *mut CqbemRun) -> CqbemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let run = app::cmd_run(&cfg.inner, Options { quiet: quiet != 0 }).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqbemRun { inner: run }));
        Ok(())
    })
}

/// Number of time samples t_0, ..., t_N (N + 1), or 0 for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run_num_times(run: *const CqbemRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.scheme.steps() + 1)
}

/// Number of observation points, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run_num_points(run: *const CqbemRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.field.values.len())
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), (CqbemStatus, String)> {
    if dst.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err((
            CqbemStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copies the time grid into `out` (capacity `len`).
///
/// # Safety
/// `run` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run_times(run: *const CqbemRun, out: *mut f64, len: usize) -> CqbemStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        copy_out(&r.inner.field.times, out, len)
    })
}

/// Copies the field history at observation point `point` into `out`
/// (capacity `len`). Points inside the obstacle yield NaN.
///
/// # Safety
/// `run` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run_field(run: *const CqbemRun, point: usize, out: *mut f64, len: usize) -> CqbemStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let v = r.inner.field.values.get(point).ok_or_else(|| {
            (
                CqbemStatus::OutOfRange,
                format!("point {point} of {}", r.inner.field.values.len()),
            )
        })?;
        copy_out(v, out, len)
    })
}

/// # Safety
/// `run` must be null or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cqbem_run_free(run: *mut CqbemRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Sphere oracle at the first observation point on the configuration's
/// reference grid (`reference.steps` + 1 samples). `written` receives the
/// sample count, also when the buffer is too small.
///
/// # Safety
/// `config` must come from this library; `out` must hold `len` doubles;
/// `written` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn cqbem_reference_field(
    config: *const CqbemConfig,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> CqbemStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let (_, _, u) = app::reference_series(&cfg.inner).map_err(lib_err)?;
        if !written.is_null() {
            *written = u.len();
        }
        copy_out(&u, out, len)
    })
}
