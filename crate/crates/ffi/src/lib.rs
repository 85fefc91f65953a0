//! C ABI for the shallow-shell laboratory.
//!
//! Every function returns an [`SsStatus`]. On failure the message is kept in
//! thread-local storage and can be read with [`ss_last_error_message`] until
//! the next failing call on the same thread. Objects are opaque handles
//! created by `*_new`/`*_parse`/`ss_run_*` and released by the matching
//! `*_free`. Strings returned through `char **` are owned by the caller and
//! released with [`ss_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shallow_shell::harness::{self, StudyConfig, StudyReport};
use shallow_shell::material::{nearest_rotation, MaterialKind, MaterialModel};
use shallow_shell::{Error, Mat2, Mat3};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numerical = 3,
    OutOfRange = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// Parsed and validated study configuration.
pub struct SsConfig(StudyConfig);

/// Elastic material law.
pub struct SsMaterial(MaterialModel);

/// Convergence study table.
pub struct SsReport(StudyReport);

/// One row of a study table; `order` is NaN where undefined.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SsReportRow {
    pub h: f64,
    pub e_h: f64,
    pub f_h: f64,
    pub rescaled_energy: f64,
    pub limit_energy: f64,
    pub gap: f64,
    pub order: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SsStatus, msg: impl Into<String>) -> SsStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SsStatus {
    let status = match e {
        Error::Config(_) => SsStatus::Config,
        _ => SsStatus::Numerical,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SsStatus) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SsStatus::Panic, "panic inside shallow-shell"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, SsStatus> {
    if s.is_null() {
        return Err(fail(SsStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SsStatus::InvalidUtf8, "string is not valid UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> SsStatus {
    *out = Box::into_raw(Box::new(value));
    SsStatus::Ok
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> SsStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            SsStatus::Ok
        }
        Err(_) => fail(SsStatus::InvalidUtf8, "string contains a NUL byte"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SsStatus::NullPointer, concat!("null argument `", stringify!($p), "`"));
        })+
    };
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ss_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses configuration text; `*out` receives a handle on success.
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_config_parse(text: *const c_char, out: *mut *mut SsConfig) -> SsStatus {
    guard(|| {
        non_null!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match StudyConfig::parse(text) {
            Ok(cfg) => put(out, SsConfig(cfg)),
            Err(e) => from_error(e),
        }
    })
}

/// Canonical text of a configuration.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_config_echo(cfg: *const SsConfig, out: *mut *mut c_char) -> SsStatus {
    guard(|| {
        non_null!(cfg, out);
        put_string(out, (*cfg).0.echo())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from [`ss_config_parse`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ss_config_free(cfg: *mut SsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// `kind` is `"stvk"` or `"squared-distance"`.
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_material_new(
    kind: *const c_char,
    lambda: f64,
    mu: f64,
    out: *mut *mut SsMaterial,
) -> SsStatus {
    guard(|| {
        non_null!(out);
        let name = match read_str(kind) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let Some(kind) = MaterialKind::from_name(name) else {
            return fail(SsStatus::Config, format!("unknown material {name:?}"));
        };
        match MaterialModel::new(kind, lambda, mu) {
            Ok(m) => put(out, SsMaterial(m)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `mat` must be NULL or a handle from [`ss_material_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ss_material_free(mat: *mut SsMaterial) {
    if !mat.is_null() {
        drop(Box::from_raw(mat));
    }
}

/// Stored energy `W(F)` for a row-major 3×3 `F`.
///
/// # Safety
/// `f` must point to 9 doubles, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn ss_material_energy(mat: *const SsMaterial, f: *const f64, out: *mut f64) -> SsStatus {
    guard(|| {
        non_null!(mat, f, out);
        let f = Mat3::from_row_slice(std::slice::from_raw_parts(f, 9));
        *out = (*mat).0.w(&f);
        SsStatus::Ok
    })
}

/// Closed-form `Q₂(G)` and the value of the stretch minimization for a
/// row-major 2×2 `G`. Either output may be NULL.
///
/// # Safety
/// `g` must point to 4 doubles; non-NULL outputs to one double each.
#[no_mangle]
pub unsafe extern "C" fn ss_material_q2(
    mat: *const SsMaterial,
    g: *const f64,
    closed_form: *mut f64,
    minimized: *mut f64,
) -> SsStatus {
    guard(|| {
        non_null!(mat, g);
        let g = Mat2::from_row_slice(std::slice::from_raw_parts(g, 4));
        let m = &(*mat).0;
        if !closed_form.is_null() {
            *closed_form = m.q2(&g);
        }
        if !minimized.is_null() {
            match m.q2_by_minimization(&g) {
                Ok((v, _)) => *minimized = v,
                Err(e) => return from_error(e),
            }
        }
        SsStatus::Ok
    })
}

/// Nearest rotation to a row-major 3×3 matrix, written row-major to `out`.
///
/// # Safety
/// `f` and `out` must each point to 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_nearest_rotation(f: *const f64, out: *mut f64) -> SsStatus {
    guard(|| {
        non_null!(f, out);
        let m = Mat3::from_row_slice(std::slice::from_raw_parts(f, 9));
        match nearest_rotation(&m) {
            Ok(r) => {
                let dst = std::slice::from_raw_parts_mut(out, 9);
                for (k, v) in dst.iter_mut().enumerate() {
                    *v = r[(k / 3, k % 3)];
                }
                SsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Recovery study over the configured thickness sweep.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_run_recovery_study(cfg: *const SsConfig, out: *mut *mut SsReport) -> SsStatus {
    guard(|| {
        non_null!(cfg, out);
        match harness::run_recovery_study(&(*cfg).0, false) {
            Ok(r) => put(out, SsReport(r)),
            Err(e) => from_error(e),
        }
    })
}

/// Full minimization study over the configured thickness sweep.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_run_full_gamma_study(cfg: *const SsConfig, out: *mut *mut SsReport) -> SsStatus {
    guard(|| {
        non_null!(cfg, out);
        match harness::run_full_gamma_study(&(*cfg).0, false) {
            Ok(s) => put(out, SsReport(s.report)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_report_len(report: *const SsReport, out: *mut usize) -> SsStatus {
    guard(|| {
        non_null!(report, out);
        *out = (*report).0.rows.len();
        SsStatus::Ok
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_report_row(report: *const SsReport, index: usize, out: *mut SsReportRow) -> SsStatus {
    guard(|| {
        non_null!(report, out);
        let rows = &(*report).0.rows;
        let Some(r) = rows.get(index) else {
            return fail(SsStatus::OutOfRange, format!("row {index} of {}", rows.len()));
        };
        *out = SsReportRow {
            h: r.h,
            e_h: r.e_h,
            f_h: r.f_h,
            rescaled_energy: r.rescaled_energy,
            limit_energy: r.limit_energy,
            gap: r.gap,
            order: r.order.unwrap_or(f64::NAN),
        };
        SsStatus::Ok
    })
}

/// The report in its CSV form.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_report_csv(report: *const SsReport, out: *mut *mut c_char) -> SsStatus {
    guard(|| {
        non_null!(report, out);
        put_string(out, (*report).0.to_csv())
    })
}

/// # Safety
/// `report` must be NULL or a handle from a study call, freed once.
#[no_mangle]
pub unsafe extern "C" fn ss_report_free(report: *mut SsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
