//! C ABI over the iqbench library.
//!
//! Suites and reports cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free`. Fallible calls return an
//! [`IqStatus`]; on failure [`iq_last_error`] describes what went wrong on the
//! calling thread. Strings returned by [`iq_report_csv`] must be released
//! with [`iq_string_free`]. No function unwinds into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use iqbench::agents::AgentFactory;
use iqbench::iq;
use iqbench::ndtm::MachineGenParams;
use iqbench::suite::{self, Suite};
use iqbench::world::LifeConfig;

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Runtime = 4,
    Panic = 5,
}

/// A test-world suite.
pub struct IqSuite(Suite);

/// The result of one IQ estimate.
pub struct IqReport(iq::IqReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: IqStatus, msg: impl Into<String>) -> IqStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> IqStatus) -> IqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(IqStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, IqStatus> {
    if p.is_null() {
        return Err(fail(IqStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn iq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Generates a suite with the default generator parameters. A paired suite
/// holds `count / 2` machines and their Win/Loss swaps; `count` must be even.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn iq_suite_generate(
    n_states: usize,
    count: usize,
    master_seed: u64,
    paired: bool,
    out: *mut *mut IqSuite,
) -> IqStatus {
    guard(|| {
        if out.is_null() {
            return fail(IqStatus::NullPointer, "out is null");
        }
        let params = MachineGenParams::default();
        let result = if paired {
            if !count.is_multiple_of(2) {
                return fail(
                    IqStatus::InvalidArgument,
                    "paired suite needs an even count",
                );
            }
            suite::generate_paired_suite(&params, n_states, count / 2, master_seed)
        } else {
            suite::generate_suite(&params, n_states, count, master_seed)
        };
        match result {
            Ok(s) => {
                *out = Box::into_raw(Box::new(IqSuite(s)));
                IqStatus::Ok
            }
            Err(e) => fail(IqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Reads a `suite/1` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`iq_suite_generate`].
#[no_mangle]
pub unsafe extern "C" fn iq_suite_read(path: *const c_char, out: *mut *mut IqSuite) -> IqStatus {
    guard(|| {
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(IqStatus::NullPointer, "out is null");
        }
        match suite::read_suite(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(IqSuite(s)));
                IqStatus::Ok
            }
            Err(suite::SuiteError::Io(e)) => fail(IqStatus::Io, e.to_string()),
            Err(e) => fail(IqStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Writes a suite in `suite/1` form.
///
/// # Safety
/// `suite` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn iq_suite_write(suite: *const IqSuite, path: *const c_char) -> IqStatus {
    guard(|| {
        let Some(suite) = suite.as_ref() else {
            return fail(IqStatus::NullPointer, "suite is null");
        };
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match suite::write_suite(&suite.0, Path::new(path)) {
            Ok(()) => IqStatus::Ok,
            Err(e) => fail(IqStatus::Io, e.to_string()),
        }
    })
}

/// Number of machines; 0 for a null handle.
///
/// # Safety
/// `suite` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_suite_len(suite: *const IqSuite) -> usize {
    suite.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `suite` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iq_suite_free(suite: *mut IqSuite) {
    if !suite.is_null() {
        drop(Box::from_raw(suite));
    }
}

/// Estimates the IQ of the agent described by `agent_spec` (e.g. `random`,
/// `freq:k=2`) on `suite`.
///
/// # Safety
/// `suite` must be a live handle, `agent_spec` a NUL-terminated string and
/// `out` valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn iq_estimate(
    suite: *const IqSuite,
    agent_spec: *const c_char,
    games: u32,
    max_steps_per_game: u32,
    master_seed: u64,
    out: *mut *mut IqReport,
) -> IqStatus {
    guard(|| {
        let Some(suite) = suite.as_ref() else {
            return fail(IqStatus::NullPointer, "suite is null");
        };
        let spec = match str_arg(agent_spec, "agent_spec") {
            Ok(s) => s,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(IqStatus::NullPointer, "out is null");
        }
        let config = match LifeConfig::new(games, max_steps_per_game) {
            Ok(c) => c,
            Err(e) => return fail(IqStatus::InvalidArgument, e.to_string()),
        };
        let factory = match AgentFactory::parse(spec, config) {
            Ok(f) => f,
            Err(e) => return fail(IqStatus::InvalidArgument, e.to_string()),
        };
        match iq::estimate_iq(&factory, &suite.0, config, master_seed) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(IqReport(r)));
                IqStatus::Ok
            }
            Err(e) => fail(IqStatus::Runtime, e.to_string()),
        }
    })
}

/// Mean Success over the suite; NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_report_estimate(report: *const IqReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.estimate)
}

/// Standard error of the estimate; NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_report_stderr(report: *const IqReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.stderr)
}

/// 95% confidence interval, clamped to [0, 1].
///
/// # Safety
/// `report` must be a live handle; `low` and `high` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn iq_report_ci95(
    report: *const IqReport,
    low: *mut f64,
    high: *mut f64,
) -> IqStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(IqStatus::NullPointer, "report is null");
        };
        if low.is_null() || high.is_null() {
            return fail(IqStatus::NullPointer, "low or high is null");
        }
        (*low, *high) = r.0.ci95;
        IqStatus::Ok
    })
}

/// Number of per-world results; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_report_world_count(report: *const IqReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.per_world.len())
}

/// Success of the life lived in world `index`.
///
/// # Safety
/// `report` must be a live handle; `success` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn iq_report_world_success(
    report: *const IqReport,
    index: usize,
    success: *mut f64,
) -> IqStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(IqStatus::NullPointer, "report is null");
        };
        if success.is_null() {
            return fail(IqStatus::NullPointer, "success is null");
        }
        match r.0.per_world.get(index) {
            Some(w) => {
                *success = w.success();
                IqStatus::Ok
            }
            None => fail(
                IqStatus::InvalidArgument,
                format!("world index {index} out of range"),
            ),
        }
    })
}

/// True when the estimate is strictly above `threshold`.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_report_qualifies(report: *const IqReport, threshold: f64) -> bool {
    report
        .as_ref()
        .is_some_and(|r| iq::qualifies_as_ai(&r.0, threshold))
}

/// The report in `iqreport/1` CSV form; null on failure. Release with
/// [`iq_string_free`].
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn iq_report_csv(report: *const IqReport, threshold: f64) -> *mut c_char {
    clear_error();
    let Some(r) = report.as_ref() else {
        set_error("report is null");
        return ptr::null_mut();
    };
    match CString::new(iq::report_csv(&r.0, threshold)) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("report contains a NUL byte");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iq_report_free(report: *mut IqReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
