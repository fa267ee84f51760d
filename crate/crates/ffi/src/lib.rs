//! C ABI over the solver. Every entry point returns an [`SdStatus`]; on failure the message
//! is available from [`sd_last_error_message`] on the same thread. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stokes_darcy::analysis::{point_values, total_fields};
use stokes_darcy::config::RunConfig;
use stokes_darcy::driver::{self, LevelRun};
use stokes_darcy::fem::CellGeometry;
use stokes_darcy::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    OutOfRange = 3,
    Config = 4,
    Mesh = 5,
    Parameter = 6,
    Solver = 7,
    Io = 8,
    /// A check of `sd_check` failed; the audit itself ran.
    CheckFailed = 9,
    Panic = 10,
}

impl From<&Error> for SdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config { .. } | Error::Expression(_) => SdStatus::Config,
            Error::InvalidMesh(_) | Error::Parse { .. } | Error::Interface(_) => SdStatus::Mesh,
            Error::QuadratureDegree(_) | Error::NegativeWeight { .. } | Error::NotSpd(_) | Error::Parameter(_) => {
                SdStatus::Parameter
            }
            Error::Solver(_) => SdStatus::Solver,
            Error::Io(_) => SdStatus::Io,
        }
    }
}

/// A validated run configuration.
pub struct SdConfig(RunConfig);

/// The solved levels of one configuration.
pub struct SdRun {
    cfg: RunConfig,
    runs: Vec<LevelRun>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SdStatus, message: impl Into<String>) -> SdStatus {
    set_error(message);
    status
}

fn from_error(e: &Error) -> SdStatus {
    fail(e.into(), e.to_string())
}

/// Clears the last error, runs `f`, and turns panics into [`SdStatus::Panic`].
fn guard(f: impl FnOnce() -> SdStatus) -> SdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SdStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, SdStatus> {
    if s.is_null() {
        return Err(fail(SdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(SdStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! out_ptr {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            return fail(SdStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn sd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration held in memory. Relative mesh paths are taken as given.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_config_parse(toml: *const c_char, out: *mut *mut SdConfig) -> SdStatus {
    guard(|| {
        out_ptr!(out, "out");
        let text = match read_str(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::parse(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(SdConfig(c)));
                SdStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Reads a TOML configuration file; relative mesh paths resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_config_load(path: *const c_char, out: *mut *mut SdConfig) -> SdStatus {
    guard(|| {
        out_ptr!(out, "out");
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::from_file(path) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(SdConfig(c)));
                SdStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of refinement levels the configuration describes.
///
/// # Safety
/// `config` must come from `sd_config_parse`/`sd_config_load`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_config_level_count(config: *const SdConfig, out: *mut usize) -> SdStatus {
    guard(|| {
        let c = deref!(config, "config");
        out_ptr!(out, "out");
        *out = c.0.levels().len();
        SdStatus::Ok
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_config_free(config: *mut SdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Solves every level of `config` (levels run concurrently when `parallel` is non-zero).
///
/// # Safety
/// `config` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_run(config: *const SdConfig, parallel: c_int, out: *mut *mut SdRun) -> SdStatus {
    guard(|| {
        let c = deref!(config, "config");
        out_ptr!(out, "out");
        match driver::run_levels(&c.0, parallel != 0) {
            Ok(runs) => {
                *out = Box::into_raw(Box::new(SdRun { cfg: c.0.clone(), runs }));
                SdStatus::Ok
            }
            Err(f) => fail((&f.source).into(), f.to_string()),
        }
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_run_free(run: *mut SdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_run_level_count(run: *const SdRun, out: *mut usize) -> SdStatus {
    guard(|| {
        let r = deref!(run, "run");
        out_ptr!(out, "out");
        *out = r.runs.len();
        SdStatus::Ok
    })
}

fn level(r: &SdRun, k: usize) -> Result<&LevelRun, SdStatus> {
    r.runs
        .get(k)
        .ok_or_else(|| fail(SdStatus::OutOfRange, format!("level {k} of {}", r.runs.len())))
}

/// Relative errors `(e_u, e_p)` of level `k`; NaN when the configuration has no reference.
///
/// # Safety
/// `run` must be a live handle; `e_u` and `e_p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_run_errors(run: *const SdRun, k: usize, e_u: *mut f64, e_p: *mut f64) -> SdStatus {
    guard(|| {
        let r = deref!(run, "run");
        out_ptr!(e_u, "e_u");
        out_ptr!(e_p, "e_p");
        match level(r, k) {
            Ok(l) => {
                (*e_u, *e_p) = l.errors;
                SdStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Total velocity, total pressure, and Φ of level `k` at `(x, y)`, written to `out[0..4]`.
///
/// # Safety
/// `run` must be a live handle; `out` must point to four writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sd_run_sample(run: *const SdRun, k: usize, x: f64, y: f64, out: *mut f64) -> SdStatus {
    guard(|| {
        let r = deref!(run, "run");
        out_ptr!(out, "out");
        let l = match level(r, k) {
            Ok(l) => l,
            Err(s) => return s,
        };
        let mesh = l.model.mesh();
        let found = (0..mesh.n_triangles()).find_map(|t| {
            let b = CellGeometry::new(mesh.triangle_points(t)).barycentric([x, y]);
            b.iter().all(|v| *v >= -1e-12).then_some((t, b))
        });
        let Some((cell, bary)) = found else {
            return fail(SdStatus::OutOfRange, format!("({x}, {y}) lies outside the mesh"));
        };
        let v = point_values(&l.model, &l.state, cell, bary);
        let (u, p) = total_fields(&l.model, &v);
        let out = std::slice::from_raw_parts_mut(out, 4);
        out.copy_from_slice(&[u[0], u[1], p, v.phi]);
        SdStatus::Ok
    })
}

/// Writes the convergence report CSV of all levels.
///
/// # Safety
/// `run` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sd_run_write_report(run: *const SdRun, path: *const c_char) -> SdStatus {
    guard(|| {
        let r = deref!(run, "run");
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let report = driver::report(&r.cfg, &r.runs);
        let written = File::create(path)
            .map_err(Error::from)
            .and_then(|f| report.write_csv(BufWriter::new(f), r.cfg.timing));
        match written {
            Ok(()) => SdStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// Writes the fields of level `k` as a VTK legacy file.
///
/// # Safety
/// `run` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sd_run_write_vtk(run: *const SdRun, k: usize, path: *const c_char) -> SdStatus {
    guard(|| {
        let r = deref!(run, "run");
        let path = match read_str(path, "path") {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        let l = match level(r, k) {
            Ok(l) => l,
            Err(s) => return s,
        };
        let title = format!("{} level {k} t = {}", r.cfg.problem.name(), l.state.time);
        match stokes_darcy::output::write_vtk_file(&l.model, &l.state, &title, &path) {
            Ok(()) => SdStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// Same as the `solve` command: runs and writes report, diagnostics, snapshots, and manifest
/// into `out_dir`.
///
/// # Safety
/// `config` must be a live handle; `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sd_execute(config: *const SdConfig, out_dir: *const c_char, parallel: c_int) -> SdStatus {
    guard(|| {
        let c = deref!(config, "config");
        let dir = match read_str(out_dir, "out_dir") {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        if let Err(e) = driver::ensure_writable(&dir) {
            return from_error(&e);
        }
        match driver::execute(&c.0, &dir, parallel != 0) {
            Ok(_) => SdStatus::Ok,
            Err(f) => fail((&f.source).into(), f.to_string()),
        }
    })
}

/// Runs the operator audit; returns [`SdStatus::CheckFailed`] naming the failed checks.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_check(config: *const SdConfig) -> SdStatus {
    guard(|| {
        let c = deref!(config, "config");
        match driver::check(&c.0) {
            Ok(items) => {
                let failed: Vec<_> = items.iter().filter(|i| !i.passed()).map(|i| i.name.as_str()).collect();
                if failed.is_empty() {
                    SdStatus::Ok
                } else {
                    fail(SdStatus::CheckFailed, format!("failed checks: {}", failed.join(", ")))
                }
            }
            Err(e) => from_error(&e),
        }
    })
}
