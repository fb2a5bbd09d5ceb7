//! C ABI for the dse-smc fuzzer.
//!
//! Targets and run results are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`DseStatus`]; on failure a message is available from
//! [`dse_last_error`] on the same thread. Panics never cross the boundary.
//!
//! Handles are not synchronized; do not use one handle from two threads at
//! once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dse_smc::experiment::{self, run_algorithm, Algorithm, SearchResult};
use dse_smc::targets::{FailurePolicy, SubjectSpec, SubprocessTarget, SubprocessTargetConfig};
use dse_smc::{EngineConfig, Error, Target, TargetError};

/// Result codes. `DSE_STATUS_OK` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    UnknownSubject = 4,
    Target = 5,
    BudgetExhausted = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Search algorithm selector for [`dse_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DseAlgorithm {
    DseSmc = 0,
    LocalOpt = 1,
    Random = 2,
}

/// Parameters of a built-in subject. `size` is the array length, key count
/// or byte count; `lo`/`hi` bound array values; `key_len` is used by the
/// hash-table subject only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DseSubjectParams {
    pub size: usize,
    pub lo: i64,
    pub hi: i64,
    pub key_len: usize,
}

/// Tick callback: writes the tick of `genome[0..len]` to `tick_out` and
/// returns 0, or returns nonzero on failure.
pub type DseTickFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        genome: *const u8,
        len: usize,
        tick_out: *mut f64,
    ) -> i32,
>;

/// Opaque target handle.
pub struct DseTarget {
    inner: Box<dyn Target>,
}

/// Opaque run result handle.
pub struct DseRunResult {
    result: SearchResult,
    csv: CString,
}

struct CallbackTarget {
    f: unsafe extern "C" fn(*mut c_void, *const u8, usize, *mut f64) -> i32,
    user_data: *mut c_void,
    genome_len: usize,
}

impl Target for CallbackTarget {
    fn name(&self) -> &str {
        "callback"
    }

    fn genome_len(&self) -> usize {
        self.genome_len
    }

    fn evaluate(&self, genome: &[u8]) -> Result<f64, TargetError> {
        let mut tick = f64::NAN;
        let rc = unsafe { (self.f)(self.user_data, genome.as_ptr(), genome.len(), &mut tick) };
        if rc != 0 {
            return Err(TargetError::Other(format!("callback returned {rc}")));
        }
        Ok(tick)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: DseStatus,
    message: String,
}

fn status_of(e: &Error) -> DseStatus {
    match e {
        Error::Contract(_) => DseStatus::InvalidArgument,
        Error::Target(_) => DseStatus::Target,
        Error::BudgetExhausted => DseStatus::BudgetExhausted,
        Error::Config(_) | Error::Json(_) => DseStatus::Config,
        Error::UnknownSubject(_) => DseStatus::UnknownSubject,
        Error::Io(_) | Error::Csv(_) => DseStatus::Io,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        fail(status_of(&e), e.to_string())
    }
}

fn fail(status: DseStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

/// Runs `f`, turning errors and panics into a status and a last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DseStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DseStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(DseStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(DseStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DseStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(DseStatus::NullPointer, "output pointer is NULL"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `bytes` into `buf` if it fits; always reports the needed length.
unsafe fn copy_out(
    bytes: &[u8],
    buf: *mut u8,
    cap: usize,
    len_out: *mut usize,
) -> Result<(), Failure> {
    if !len_out.is_null() {
        *len_out = bytes.len();
    }
    if bytes.len() > cap {
        return Err(fail(
            DseStatus::BufferTooSmall,
            format!("buffer holds {cap} bytes, {} needed", bytes.len()),
        ));
    }
    if !bytes.is_empty() {
        if buf.is_null() {
            return Err(fail(DseStatus::NullPointer, "buffer is NULL"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dse_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Creates a built-in subject (`"insertion-sort"`, `"hash-table"`, ...).
/// `params` may be NULL for size 8, values 0..255 and 4-byte keys.
#[no_mangle]
pub unsafe extern "C" fn dse_target_builtin(
    name: *const c_char,
    params: *const DseSubjectParams,
    out: *mut *mut DseTarget,
) -> DseStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let mut spec = SubjectSpec::new(name, 8);
        if let Some(p) = params.as_ref() {
            spec.size = p.size;
            spec.lo = p.lo;
            spec.hi = p.hi;
            spec.key_len = p.key_len;
        }
        let inner = spec.build()?;
        store(out, DseTarget { inner })
    })
}

/// Wraps a C function as a target. `user_data` is passed back unchanged
/// and must outlive the target.
#[no_mangle]
pub unsafe extern "C" fn dse_target_callback(
    genome_len: usize,
    tick_fn: DseTickFn,
    user_data: *mut c_void,
    out: *mut *mut DseTarget,
) -> DseStatus {
    guard(|| {
        let f = tick_fn.ok_or_else(|| fail(DseStatus::NullPointer, "tick_fn is NULL"))?;
        if genome_len == 0 {
            return Err(fail(
                DseStatus::InvalidArgument,
                "genome_len must be positive",
            ));
        }
        store(
            out,
            DseTarget {
                inner: Box::new(CallbackTarget {
                    f,
                    user_data,
                    genome_len,
                }),
            },
        )
    })
}

/// Launches `argv[0..argc]` as a line-protocol child. With `use_penalty`
/// nonzero, evaluations that fail twice record `penalty` instead of
/// failing the run.
#[no_mangle]
pub unsafe extern "C" fn dse_target_subprocess(
    argv: *const *const c_char,
    argc: usize,
    genome_len: usize,
    timeout_ms: u64,
    use_penalty: i32,
    penalty: f64,
    out: *mut *mut DseTarget,
) -> DseStatus {
    guard(|| {
        if argv.is_null() {
            return Err(fail(DseStatus::NullPointer, "argv is NULL"));
        }
        let command = slice::from_raw_parts(argv, argc)
            .iter()
            .map(|&a| c_str(a, "argv entry").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let mut cfg = SubprocessTargetConfig::new(command);
        cfg.timeout_ms = timeout_ms;
        if use_penalty != 0 {
            cfg.failure_policy = FailurePolicy::Penalty(penalty);
        }
        let inner = Box::new(SubprocessTarget::new(cfg, genome_len)?);
        store(out, DseTarget { inner })
    })
}

/// Evaluates one genome of exactly `dse_target_genome_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dse_target_evaluate(
    target: *const DseTarget,
    genome: *const u8,
    len: usize,
    tick_out: *mut f64,
) -> DseStatus {
    guard(|| {
        let t = non_null(target, "target")?;
        if genome.is_null() || tick_out.is_null() {
            return Err(fail(DseStatus::NullPointer, "genome or tick_out is NULL"));
        }
        let expected = t.inner.genome_len();
        if len != expected {
            return Err(fail(
                DseStatus::InvalidArgument,
                format!("genome has {len} bytes, target takes {expected}"),
            ));
        }
        let tick = t
            .inner
            .evaluate(slice::from_raw_parts(genome, len))
            .map_err(Error::from)?;
        *tick_out = tick;
        Ok(())
    })
}

/// Genome length in bytes, or 0 for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn dse_target_genome_len(target: *const DseTarget) -> usize {
    target.as_ref().map_or(0, |t| t.inner.genome_len())
}

#[no_mangle]
pub unsafe extern "C" fn dse_target_free(target: *mut DseTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Runs one search. `config_json` may be NULL for the default engine
/// configuration; `seed` always overrides the configured seed. `algorithm`
/// is a `DseAlgorithm` value.
#[no_mangle]
pub unsafe extern "C" fn dse_run(
    target: *const DseTarget,
    config_json: *const c_char,
    algorithm: u32,
    seed: u64,
    out: *mut *mut DseRunResult,
) -> DseStatus {
    guard(|| {
        let t = non_null(target, "target")?;
        let algorithm = match algorithm {
            a if a == DseAlgorithm::DseSmc as u32 => Algorithm::DseSmc,
            a if a == DseAlgorithm::LocalOpt as u32 => Algorithm::LocalOpt,
            a if a == DseAlgorithm::Random as u32 => Algorithm::Random,
            a => {
                return Err(fail(
                    DseStatus::InvalidArgument,
                    format!("unknown algorithm {a}"),
                ))
            }
        };
        let mut cfg = if config_json.is_null() {
            EngineConfig::default()
        } else {
            experiment::parse_config(c_str(config_json, "config_json")?)?
        };
        cfg.seed = seed;
        let result = run_algorithm(algorithm, &cfg, t.inner.as_ref(), None)?;
        let mut csv = Vec::new();
        experiment::write_stats_csv(&mut csv, &result.stats)?;
        let csv = CString::new(csv).map_err(|_| fail(DseStatus::Io, "CSV contains NUL"))?;
        store(out, DseRunResult { result, csv })
    })
}

/// Best tick found, or NaN for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn dse_result_best_tick(result: *const DseRunResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.result.best_tick)
}

/// Copies the best genome into `buf`. `len_out`, if not NULL, receives the
/// genome length even when `cap` is too small.
#[no_mangle]
pub unsafe extern "C" fn dse_result_best_genome(
    result: *const DseRunResult,
    buf: *mut u8,
    cap: usize,
    len_out: *mut usize,
) -> DseStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        copy_out(r.result.best_genome.as_bytes(), buf, cap, len_out)
    })
}

/// Target calls made by the run.
#[no_mangle]
pub unsafe extern "C" fn dse_result_evaluations(result: *const DseRunResult) -> u64 {
    result.as_ref().map_or(0, |r| r.result.evaluations)
}

/// Index of the last completed epoch (0 if only initialization ran).
#[no_mangle]
pub unsafe extern "C" fn dse_result_epochs(result: *const DseRunResult) -> u64 {
    result
        .as_ref()
        .and_then(|r| r.result.stats.last())
        .map_or(0, |s| s.epoch)
}

/// Copies the per-epoch stats CSV, NUL-terminated, into `buf`. `len_out`
/// receives the CSV length without the terminator; `cap` must exceed it.
#[no_mangle]
pub unsafe extern "C" fn dse_result_stats_csv(
    result: *const DseRunResult,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> DseStatus {
    guard(|| {
        let r = non_null(result, "result")?;
        let bytes = r.csv.as_bytes_with_nul();
        if !len_out.is_null() {
            *len_out = bytes.len() - 1;
        }
        copy_out(bytes, buf.cast(), cap, ptr::null_mut())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dse_result_free(result: *mut DseRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
