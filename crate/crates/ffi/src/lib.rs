//! C ABI over `isac-core`.
//!
//! Configurations and solve reports are opaque heap handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns an [`IsacStatus`]; on failure a description is available
//! from [`isac_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use isac_core::baselines::{solve_variant, ArchitectureVariant};
use isac_core::config::ConfigFile;
use isac_core::harness::beampattern_rows;
use isac_core::metrics::SteeringGrid;
use isac_core::scenario::{desired_beampattern, generate_channels, SystemConfig};
use isac_core::solver::SolveReport;
use isac_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Dimension = 4,
    Contract = 5,
    Numerical = 6,
    UnknownVariant = 7,
    Io = 8,
    Parse = 9,
    ZeroDesiredPattern = 10,
    /// The output buffer is too short; the required length was written.
    BufferTooSmall = 11,
    /// A Rust panic was caught at the boundary.
    Internal = 12,
}

impl From<&Error> for IsacStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => IsacStatus::Dimension,
            Error::Contract(_) => IsacStatus::Contract,
            Error::Config(_) => IsacStatus::Config,
            Error::ZeroDesiredPattern => IsacStatus::ZeroDesiredPattern,
            Error::Numerical(_) => IsacStatus::Numerical,
            Error::UnknownVariant(_) => IsacStatus::UnknownVariant,
            Error::Io { .. } => IsacStatus::Io,
            Error::Parse { .. } => IsacStatus::Parse,
            Error::Csv(_) | Error::Json(_) => IsacStatus::Io,
        }
    }
}

/// Opaque system configuration.
pub struct IsacConfig {
    inner: SystemConfig,
}

/// Opaque result of one solve.
pub struct IsacReport {
    report: SolveReport,
    cfg: SystemConfig,
}

/// Scalar summary of a solve, evaluated at the hybrid precoder.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IsacMetrics {
    pub secrecy_rate: f64,
    pub secrecy_gap: f64,
    pub beampattern_mse: f64,
    pub final_violation: f64,
    pub delta: f64,
    pub iterations_inner: u64,
    pub iterations_outer: u64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Status(IsacStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IsacStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IsacStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            IsacStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            IsacStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(IsacStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(IsacStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn isac_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isac_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// New configuration with the default scenario.
#[no_mangle]
pub extern "C" fn isac_config_default() -> *mut IsacConfig {
    Box::into_raw(Box::new(IsacConfig {
        inner: SystemConfig::default(),
    }))
}

/// Parses a flat key-value config document on top of the defaults.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_config_parse(text: *const c_char, out: *mut *mut IsacConfig) -> IsacStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let inner = ConfigFile::parse(text, "<string>")?.to_config()?;
        *out = Box::into_raw(Box::new(IsacConfig { inner }));
        Ok(())
    })
}

/// Loads a config file on top of the defaults.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn isac_config_load(path: *const c_char, out: *mut *mut IsacConfig) -> IsacStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let inner = ConfigFile::load(Path::new(path))?.to_config()?;
        *out = Box::into_raw(Box::new(IsacConfig { inner }));
        Ok(())
    })
}

/// Sets one scalar field by name and revalidates. On failure the
/// configuration is left unchanged.
///
/// # Safety
/// `cfg` comes from this library; `name` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn isac_config_set(cfg: *mut IsacConfig, name: *const c_char, value: f64) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let name = read_str(name, "name")?;
        let mut next = cfg.inner.clone();
        next.set_param(name, value)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// Reads one scalar field by name.
///
/// # Safety
/// `cfg` comes from this library; `name` is a NUL-terminated string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn isac_config_get(cfg: *const IsacConfig, name: *const c_char, out: *mut f64) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let name = read_str(name, "name")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &cfg.inner;
        let h = &c.hyper;
        let v = match name {
            "n_tx" => c.n_tx as f64,
            "n_rf" => c.n_rf as f64,
            "n_streams" => c.n_streams as f64,
            "n_irs" => c.n_irs as f64,
            "n_bob" => c.n_bob as f64,
            "n_eve" => c.n_eve as f64,
            "p_max" => c.p_max,
            "mu" => c.mu,
            "pathloss_ref_db" => c.pathloss_ref_db,
            "pathloss_exponent" => c.pathloss_exponent,
            "distance_ab" => c.distances.ab,
            "distance_ai" => c.distances.ai,
            "distance_ae" => c.distances.ae,
            "distance_ib" => c.distances.ib,
            "distance_ie" => c.distances.ie,
            "varsigma" => h.varsigma,
            "rho0" => h.rho0,
            "kappa0" => h.kappa0,
            "eps_inner" => h.eps_inner,
            "eps_stop" => h.eps_stop,
            "c_shrink" => h.c_shrink,
            "max_inner_iters" => h.max_inner_iters as f64,
            "max_outer_iters" => h.max_outer_iters as f64,
            "max_penalty_rounds" => h.max_penalty_rounds as f64,
            "penalty_target" => h.penalty_target,
            other => {
                return Err(Failure::Core(Error::Config(format!(
                    "`{other}` is not a scalar configuration field"
                ))))
            }
        };
        *out = v;
        Ok(())
    })
}

/// # Safety
/// `cfg` is null or comes from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_config_free(cfg: *mut IsacConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Draws the fading realization for `seed`, solves `variant` on it and
/// stores the result in `*out`.
///
/// # Safety
/// `cfg` comes from this library; `variant` is a NUL-terminated string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn isac_solve(
    cfg: *const IsacConfig,
    variant: *const c_char,
    seed: u64,
    out: *mut *mut IsacReport,
) -> IsacStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let v: ArchitectureVariant = read_str(variant, "variant")?.parse()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = generate_channels(&cfg.inner, seed)?;
        let report = solve_variant(v, &cfg.inner, &ch, seed)?;
        *out = Box::into_raw(Box::new(IsacReport {
            report,
            cfg: cfg.inner.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `report` comes from this library; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn isac_report_metrics(report: *const IsacReport, out: *mut IsacMetrics) -> IsacStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = &r.report.metrics;
        *out = IsacMetrics {
            secrecy_rate: m.secrecy_rate,
            secrecy_gap: m.secrecy_gap,
            beampattern_mse: m.beampattern_mse,
            final_violation: m.final_violation,
            delta: r.report.state.delta,
            iterations_inner: m.iterations_inner_total as u64,
            iterations_outer: m.iterations_outer as u64,
            converged: r.report.converged,
        };
        Ok(())
    })
}

/// Copies the beampattern of the hybrid precoder into three caller arrays
/// of length `capacity`. `*len` receives the number of grid angles; when it
/// exceeds `capacity` nothing is copied and `BUFFER_TOO_SMALL` is returned.
/// Any of the three arrays may be null to skip it.
///
/// # Safety
/// Non-null arrays have room for `capacity` doubles; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn isac_report_beampattern(
    report: *const IsacReport,
    theta_deg: *mut f64,
    p_b: *mut f64,
    delta_p_d: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> IsacStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let desired = desired_beampattern(&r.cfg.targets, &r.cfg.angle_grid)?;
        let grid = SteeringGrid::new(&r.cfg.angle_grid, r.cfg.n_tx)?;
        let rows = beampattern_rows(&r.report, &grid, &desired)?;
        *len = rows.len();
        if rows.len() > capacity {
            return Err(Failure::Status(
                IsacStatus::BufferTooSmall,
                format!("need {} entries, got {capacity}", rows.len()),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if !theta_deg.is_null() {
                *theta_deg.add(i) = row.theta_deg;
            }
            if !p_b.is_null() {
                *p_b.add(i) = row.p_b;
            }
            if !delta_p_d.is_null() {
                *delta_p_d.add(i) = row.delta_p_d;
            }
        }
        Ok(())
    })
}

/// Writes the per-iteration convergence trace as CSV.
///
/// # Safety
/// `report` comes from this library; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn isac_report_write_trace(report: *const IsacReport, path: *const c_char) -> IsacStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let path = read_str(path, "path")?;
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_string(),
            source: e,
        })?;
        r.report.trace.write_csv(BufWriter::new(file))?;
        Ok(())
    })
}

/// # Safety
/// `report` is null or comes from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isac_report_free(report: *mut IsacReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
