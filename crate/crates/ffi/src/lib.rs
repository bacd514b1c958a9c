//! C ABI over the diff, CSV, cost and ledger-report parts of `wall`.
//!
//! Conventions:
//! - Every fallible call returns a [`WallStatus`]; results come back through
//!   out-pointers that are only written on success.
//! - Strings are NUL-terminated UTF-8. Strings returned by the library must
//!   be released with [`wall_string_free`].
//! - Handles (`WallDiff`, `WallIssues`, `WallLedger`) are opaque and released
//!   with their matching `*_free` function. Passing NULL to a free is a no-op.
//! - After a non-OK status, [`wall_last_error`] describes the failure on the
//!   calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use wall::diff::{diff_texts, render_html, render_structured, render_terminal, DiffOptions, DiffReport};
use wall::gateway::{compute_cost, ModelPricing, TokenUsage};
use wall::issues::{read_csv, to_csv_string, IssueRecord, IssueType};
use wall::report::{emit_report, savings_vs_advanced, success_rate, CostLedger, ReportError, ReportFormat, Strategy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    ConsistencyError = 5,
    /// Result undefined, e.g. a rate over zero issues.
    Undefined = 6,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallIssueType {
    Bug = 0,
    Vulnerability = 1,
    CodeSmell = 2,
}

impl From<WallIssueType> for IssueType {
    fn from(t: WallIssueType) -> Self {
        match t {
            WallIssueType::Bug => IssueType::Bug,
            WallIssueType::Vulnerability => IssueType::Vulnerability,
            WallIssueType::CodeSmell => IssueType::CodeSmell,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallDiffFormat {
    Terminal = 0,
    TerminalColor = 1,
    Html = 2,
    Structured = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallReportFormat {
    Text = 0,
    Structured = 1,
    Html = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WallDiffMetrics {
    pub matched: usize,
    pub removed: usize,
    pub added: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub struct WallDiff(DiffReport);

pub struct WallIssues(Vec<IssueRecord>);

pub struct WallLedger(CostLedger);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(WallStatus, String);

impl Fail {
    fn new(status: WallStatus, msg: impl Into<String>) -> Self {
        Fail(status, msg.into())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WallStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WallStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WallStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(WallStatus::NullPointer, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(WallStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(WallStatus::NullPointer, format!("`{name}` is NULL")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::new(WallStatus::NullPointer, format!("`{name}` is NULL")))
    } else {
        Ok(())
    }
}

fn to_c(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail::new(WallStatus::Internal, "output contains NUL"))
}

fn report_fail(e: ReportError) -> Fail {
    let status = match e {
        ReportError::ConsistencyError { .. } => WallStatus::ConsistencyError,
        ReportError::ZeroBaseline => WallStatus::Undefined,
        _ => WallStatus::ParseError,
    };
    Fail::new(status, e.to_string())
}

/// Last error on this thread, or NULL. Free with [`wall_string_free`].
#[no_mangle]
pub extern "C" fn wall_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(std::ptr::null_mut(), CString::into_raw))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wall_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static version string; do not free.
#[no_mangle]
pub extern "C" fn wall_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Line diff of two texts.
///
/// # Safety
/// `original` and `revised` must be valid NUL-terminated strings; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_diff_new(
    original: *const c_char,
    revised: *const c_char,
    ignore_trailing_whitespace: bool,
    out: *mut *mut WallDiff,
) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let a = str_arg(original, "original")?;
        let b = str_arg(revised, "revised")?;
        let report = diff_texts(
            a,
            b,
            DiffOptions {
                trim_trailing_whitespace: ignore_trailing_whitespace,
            },
        );
        *out = Box::into_raw(Box::new(WallDiff(report)));
        Ok(())
    })
}

/// # Safety
/// `diff` must be NULL or a live handle from [`wall_diff_new`].
#[no_mangle]
pub unsafe extern "C" fn wall_diff_free(diff: *mut WallDiff) {
    if !diff.is_null() {
        drop(Box::from_raw(diff));
    }
}

/// # Safety
/// `diff` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_diff_metrics(diff: *const WallDiff, out: *mut WallDiffMetrics) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let m = handle(diff, "diff")?.0.metrics;
        *out = WallDiffMetrics {
            matched: m.matched,
            removed: m.removed,
            added: m.added,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        Ok(())
    })
}

/// Number of diff rows.
///
/// # Safety
/// `diff` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wall_diff_len(diff: *const WallDiff) -> usize {
    diff.as_ref().map_or(0, |d| d.0.rows.len())
}

/// # Safety
/// `diff` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_diff_render(
    diff: *const WallDiff,
    format: WallDiffFormat,
    out: *mut *mut c_char,
) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let d = &handle(diff, "diff")?.0;
        let text = match format {
            WallDiffFormat::Terminal => render_terminal(&d.rows, false),
            WallDiffFormat::TerminalColor => render_terminal(&d.rows, true),
            WallDiffFormat::Html => render_html(&d.rows, None, Some(&d.metrics)),
            WallDiffFormat::Structured => render_structured(&d.rows),
        };
        *out = to_c(text)?;
        Ok(())
    })
}

/// Parses issue CSV text. On a bad row the error message names the row.
///
/// # Safety
/// `csv` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_issues_parse(csv: *const c_char, out: *mut *mut WallIssues) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let text = str_arg(csv, "csv")?;
        let v = read_csv(text.as_bytes()).map_err(|e| Fail::new(WallStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(WallIssues(v)));
        Ok(())
    })
}

/// # Safety
/// `issues` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wall_issues_free(issues: *mut WallIssues) {
    if !issues.is_null() {
        drop(Box::from_raw(issues));
    }
}

/// # Safety
/// `issues` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wall_issues_len(issues: *const WallIssues) -> usize {
    issues.as_ref().map_or(0, |i| i.0.len())
}

/// # Safety
/// `issues` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wall_issues_count(issues: *const WallIssues, issue_type: WallIssueType) -> usize {
    let ty = IssueType::from(issue_type);
    issues
        .as_ref()
        .map_or(0, |i| i.0.iter().filter(|r| r.issue_type == ty).count())
}

/// Serializes back to CSV.
///
/// # Safety
/// `issues` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_issues_to_csv(issues: *const WallIssues, out: *mut *mut c_char) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = to_c(to_csv_string(&handle(issues, "issues")?.0))?;
        Ok(())
    })
}

/// Success rate in percent, truncated to one decimal.
/// Returns `WALL_STATUS_UNDEFINED` when `total` is zero.
///
/// # Safety
/// `out_percent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_success_rate(resolved: u64, total: u64, out_percent: *mut f64) -> WallStatus {
    guard(|| {
        out_ptr(out_percent, "out_percent")?;
        let r = success_rate(resolved, total).map_err(report_fail)?;
        let p = r
            .percent
            .ok_or_else(|| Fail::new(WallStatus::Undefined, "no issues of this type"))?;
        *out_percent = p.to_f64().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Cost of one call in USD as a decimal string rounded to four places.
/// Prices are decimal strings per 1,000 tokens.
///
/// # Safety
/// Price pointers must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_compute_cost(
    prompt_tokens: u64,
    completion_tokens: u64,
    input_price_per_1k: *const c_char,
    output_price_per_1k: *const c_char,
    out: *mut *mut c_char,
) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let parse = |p, name| -> Result<Decimal, Fail> {
            let s = str_arg(p, name)?;
            Decimal::from_str(s.trim())
                .map_err(|e| Fail::new(WallStatus::InvalidArgument, format!("`{name}`: {e}")))
        };
        let input = parse(input_price_per_1k, "input_price_per_1k")?;
        let output = parse(output_price_per_1k, "output_price_per_1k")?;
        let pricing = ModelPricing::new("ffi", input, output).map_err(|e| Fail::new(WallStatus::InvalidArgument, e))?;
        let cost = compute_cost(TokenUsage::new(prompt_tokens, completion_tokens), &pricing);
        *out = to_c(format!("{cost:.4}"))?;
        Ok(())
    })
}

/// Parses and validates a ledger CSV.
///
/// # Safety
/// `csv` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_ledger_parse(csv: *const c_char, out: *mut *mut WallLedger) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let text = str_arg(csv, "csv")?;
        let ledger = CostLedger::read(text.as_bytes()).map_err(report_fail)?;
        ledger.validate().map_err(report_fail)?;
        *out = Box::into_raw(Box::new(WallLedger(ledger)));
        Ok(())
    })
}

/// # Safety
/// `ledger` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wall_ledger_free(ledger: *mut WallLedger) {
    if !ledger.is_null() {
        drop(Box::from_raw(ledger));
    }
}

/// # Safety
/// `ledger` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_ledger_report(
    ledger: *const WallLedger,
    format: WallReportFormat,
    out: *mut *mut c_char,
) -> WallStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let l = &handle(ledger, "ledger")?.0;
        let f = match format {
            WallReportFormat::Text => ReportFormat::Text,
            WallReportFormat::Structured => ReportFormat::StructuredRows,
            WallReportFormat::Html => ReportFormat::Html,
        };
        *out = to_c(emit_report(l, f).map_err(report_fail)?)?;
        Ok(())
    })
}

/// Hybrid savings over advanced-only, in percent rounded to one decimal.
///
/// # Safety
/// `ledger` must be a live handle; `out_percent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wall_ledger_savings(ledger: *const WallLedger, out_percent: *mut f64) -> WallStatus {
    guard(|| {
        out_ptr(out_percent, "out_percent")?;
        let l = &handle(ledger, "ledger")?.0;
        let missing = |s: Strategy| Fail::new(WallStatus::Undefined, format!("ledger has no {s} rows"));
        let hybrid = l.total_cost(Strategy::Hybrid).ok_or_else(|| missing(Strategy::Hybrid))?;
        let adv = l
            .total_cost(Strategy::AdvancedOnly)
            .ok_or_else(|| missing(Strategy::AdvancedOnly))?;
        *out_percent = savings_vs_advanced(hybrid, adv)
            .map_err(report_fail)?
            .to_f64()
            .unwrap_or(f64::NAN);
        Ok(())
    })
}
