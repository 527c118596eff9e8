//! C ABI for `expfam-market`.
//!
//! Families and markets are opaque handles created and freed through this
//! interface. Every fallible function returns an [`ExpfamStatus`]; on
//! failure, [`expfam_last_error`] describes the problem. Results are written
//! through out-pointers. Strings returned to the caller must be released
//! with [`expfam_string_free`].
//!
//! Handles are not thread safe; use one handle from one thread at a time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use expfam_market::equilibrium::{solve, EquilibriumProblem};
use expfam_market::harness::{run_simulation, SimConfig};
use expfam_market::scoring::log_score;
use expfam_market::{Error, Family, Market, MarketState, MeanParams, NaturalParams};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpfamStatus {
    Ok = 0,
    Domain = 1,
    Convergence = 2,
    Unsupported = 3,
    Config = 4,
    CorruptLog = 5,
    Io = 6,
    NullPointer = 7,
    InvalidUtf8 = 8,
    /// The output buffer is too short; the needed length is in the message.
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque exponential family.
pub struct ExpfamFamily(Family);

/// Opaque market maker.
pub struct ExpfamMarket(Market);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> ExpfamStatus {
    match err {
        Error::Domain(_) => ExpfamStatus::Domain,
        Error::Convergence(_) => ExpfamStatus::Convergence,
        Error::Unsupported(_) => ExpfamStatus::Unsupported,
        Error::Config(_) => ExpfamStatus::Config,
        Error::CorruptLog { .. } => ExpfamStatus::CorruptLog,
        Error::Io(_) => ExpfamStatus::Io,
    }
}

struct Failure(ExpfamStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> ExpfamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ExpfamStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ExpfamStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ExpfamStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ExpfamStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_slice(values: &[f64], out: *mut f64, out_len: usize) -> FfiResult {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if out_len < values.len() {
        return Err(Failure(
            ExpfamStatus::BufferTooSmall,
            format!("output buffer holds {out_len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn write_value<T>(value: T, out: *mut T) -> FfiResult {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(text: String, out: *mut *mut c_char) -> FfiResult {
    let c = CString::new(text).map_err(|_| Failure(ExpfamStatus::Panic, "string contains NUL".into()))?;
    write_value(c.into_raw(), out)
}

unsafe fn family_ref<'a>(f: *const ExpfamFamily) -> Result<&'a Family, Failure> {
    f.as_ref().map(|f| &f.0).ok_or_else(|| null("family"))
}

unsafe fn market_ref<'a>(m: *mut ExpfamMarket) -> Result<&'a mut Market, Failure> {
    m.as_mut().map(|m| &mut m.0).ok_or_else(|| null("market"))
}

fn json_error(e: serde_json::Error) -> Failure {
    Failure(ExpfamStatus::Config, e.to_string())
}

/// Message for the last failure on this thread, empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn expfam_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn expfam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a family id such as `categorical:3` or `weibull-moment:2`.
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn expfam_family_new(id: *const c_char, out: *mut *mut ExpfamFamily) -> ExpfamStatus {
    guard(|| {
        let family: Family = str_arg(id, "family id")?.parse()?;
        write_value(Box::into_raw(Box::new(ExpfamFamily(family))), out)
    })
}

/// # Safety
/// `f` must be null or a live handle from [`expfam_family_new`].
#[no_mangle]
pub unsafe extern "C" fn expfam_family_free(f: *mut ExpfamFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Length of parameter vectors for the family, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn expfam_family_dim(f: *const ExpfamFamily) -> usize {
    f.as_ref().map_or(0, |f| f.0.dim())
}

/// Log-partition `T(theta)`.
///
/// # Safety
/// `theta` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_log_partition(
    f: *const ExpfamFamily,
    theta: *const f64,
    len: usize,
    out: *mut f64,
) -> ExpfamStatus {
    guard(|| {
        let family = family_ref(f)?;
        let theta = NaturalParams(slice_arg(theta, len, "theta")?.to_vec());
        write_value(family.log_partition(&theta)?, out)
    })
}

/// Mean parameters `grad T(theta)`, written to `out`.
///
/// # Safety
/// `theta` must point to `len` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn expfam_mean_from_natural(
    f: *const ExpfamFamily,
    theta: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> ExpfamStatus {
    guard(|| {
        let family = family_ref(f)?;
        let theta = NaturalParams(slice_arg(theta, len, "theta")?.to_vec());
        write_slice(&family.mean_from_natural(&theta)?, out, out_len)
    })
}

/// Natural parameters for mean `mu`, written to `out`.
///
/// # Safety
/// `mu` must point to `len` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn expfam_natural_from_mean(
    f: *const ExpfamFamily,
    mu: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> ExpfamStatus {
    guard(|| {
        let family = family_ref(f)?;
        let mu = MeanParams(slice_arg(mu, len, "mu")?.to_vec());
        write_slice(&family.natural_from_mean(&mu)?, out, out_len)
    })
}

/// Bregman divergence `D_T(a, b)`.
///
/// # Safety
/// `a` and `b` must each point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_bregman_divergence(
    f: *const ExpfamFamily,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> ExpfamStatus {
    guard(|| {
        let family = family_ref(f)?;
        let a = NaturalParams(slice_arg(a, len, "a")?.to_vec());
        let b = NaturalParams(slice_arg(b, len, "b")?.to_vec());
        write_value(family.bregman_divergence(&a, &b)?, out)
    })
}

/// Log score of mean report `mu` at an outcome given as values (a 1-based
/// category, one real, or three coordinates). Zero-density outcomes score
/// negative infinity.
///
/// # Safety
/// `mu` must point to `len` doubles, `outcome` to `outcome_len` doubles,
/// and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_log_score(
    f: *const ExpfamFamily,
    mu: *const f64,
    len: usize,
    outcome: *const f64,
    outcome_len: usize,
    out: *mut f64,
) -> ExpfamStatus {
    guard(|| {
        let family = family_ref(f)?;
        let mu = MeanParams(slice_arg(mu, len, "mu")?.to_vec());
        let x = family.outcome_from_values(slice_arg(outcome, outcome_len, "outcome")?)?;
        write_value(log_score(family, &mu, &x)?.value(), out)
    })
}

/// Opens a market with shares `theta` and inverse liquidity `lambda`.
///
/// # Safety
/// `f` must be a live handle, `theta` must point to `len` doubles and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_new(
    f: *const ExpfamFamily,
    theta: *const f64,
    len: usize,
    inv_liquidity: f64,
    out: *mut *mut ExpfamMarket,
) -> ExpfamStatus {
    guard(|| {
        let family = *family_ref(f)?;
        let theta = NaturalParams(slice_arg(theta, len, "theta")?.to_vec());
        let market = Market::new(MarketState::new(family, theta, inv_liquidity)?)?;
        write_value(Box::into_raw(Box::new(ExpfamMarket(market))), out)
    })
}

/// Opens a market from a JSON market state.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_from_json(json: *const c_char, out: *mut *mut ExpfamMarket) -> ExpfamStatus {
    guard(|| {
        let state: MarketState = serde_json::from_str(str_arg(json, "json")?).map_err(json_error)?;
        let market = Market::new(state)?;
        write_value(Box::into_raw(Box::new(ExpfamMarket(market))), out)
    })
}

/// # Safety
/// `m` must be null or a live market handle.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_free(m: *mut ExpfamMarket) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Current prices, written to `out`.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_prices(m: *mut ExpfamMarket, out: *mut f64, out_len: usize) -> ExpfamStatus {
    guard(|| {
        let market = market_ref(m)?;
        write_slice(&market.prices()?, out, out_len)
    })
}

/// Cost of buying `delta`, without executing.
///
/// # Safety
/// `m` must be a live handle, `delta` must point to `len` doubles and `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_quote(
    m: *mut ExpfamMarket,
    delta: *const f64,
    len: usize,
    out: *mut f64,
) -> ExpfamStatus {
    guard(|| {
        let market = market_ref(m)?;
        write_value(market.quote(slice_arg(delta, len, "delta")?)?, out)
    })
}

/// Buys `delta` for `trader_id` and writes the cost to `out_cost`. On
/// failure the market is unchanged.
///
/// # Safety
/// `m` must be a live handle, `delta` must point to `len` doubles,
/// `trader_id` must be a NUL-terminated string and `out_cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_execute(
    m: *mut ExpfamMarket,
    delta: *const f64,
    len: usize,
    trader_id: *const c_char,
    out_cost: *mut f64,
) -> ExpfamStatus {
    guard(|| {
        let market = market_ref(m)?;
        let trader = str_arg(trader_id, "trader id")?;
        let record = market.execute(slice_arg(delta, len, "delta")?, trader)?;
        if !out_cost.is_null() {
            out_cost.write(record.cost);
        }
        Ok(())
    })
}

/// The market state as JSON. Free the result with [`expfam_string_free`].
///
/// # Safety
/// `m` must be a live handle and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_market_state_json(m: *mut ExpfamMarket, out: *mut *mut c_char) -> ExpfamStatus {
    guard(|| {
        let market = market_ref(m)?;
        let text = serde_json::to_string(market.state()).map_err(json_error)?;
        write_string(text, out)
    })
}

/// Runs a simulation from a JSON config and returns the JSON report. A
/// report whose `valid` field is false still comes back with status `Ok`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_simulate_json(config_json: *const c_char, out: *mut *mut c_char) -> ExpfamStatus {
    guard(|| {
        let config = SimConfig::from_json(str_arg(config_json, "config")?)?;
        let report = run_simulation(&config)?;
        write_string(serde_json::to_string(&report).map_err(json_error)?, out)
    })
}

/// Solves an equilibrium problem given as JSON and returns the JSON report.
///
/// # Safety
/// `problem_json` must be a NUL-terminated string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn expfam_equilibrium_json(
    problem_json: *const c_char,
    max_rounds: usize,
    tol: f64,
    out: *mut *mut c_char,
) -> ExpfamStatus {
    guard(|| {
        let problem: EquilibriumProblem =
            serde_json::from_str(str_arg(problem_json, "problem")?).map_err(json_error)?;
        let report = solve(&problem, max_rounds, tol)?;
        write_string(serde_json::to_string(&report).map_err(json_error)?, out)
    })
}
