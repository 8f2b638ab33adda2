//! C interface to `wlrgs`.
//!
//! Every function returns a [`WlrgsStatus`]; results come back through out
//! pointers. On failure the message is available from
//! [`wlrgs_last_error`] on the same thread. Strings returned by the library
//! must be released with [`wlrgs_string_free`], state handles with
//! [`wlrgs_gs_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wlrgs::counting::Observation;
use wlrgs::gs::{self, Decision, GsDesign, GsState, Integrator, SpendingRule};
use wlrgs::survival::Arm;
use wlrgs::wlrt::{test_statistic, WeightScheme};
use wlrgs::Error;

/// Outcome of a call. The non-zero values other than `NullPointer` and
/// `Panic` match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlrgsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    StateError = 3,
    NumericalError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlrgsDecision {
    Continue = 0,
    Reject = 1,
    StopAllAlphaSpent = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlrgsScheme {
    LogRank = 0,
    FlemingHarrington01 = 1,
    ModestWeight = 2,
}

/// Opaque monitoring state.
pub struct WlrgsGsState {
    inner: GsState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> WlrgsStatus {
    match e.exit_code() {
        3 => WlrgsStatus::StateError,
        4 => WlrgsStatus::NumericalError,
        _ => WlrgsStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WlrgsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WlrgsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            WlrgsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            WlrgsStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Lib(Error::Input(format!("{what} is not UTF-8: {e}"))))
}

fn give_string(s: String, dst: &mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure::Lib(Error::Input(e.to_string())))?;
    *dst = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn wlrgs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Hwang-Shih-DeCani cumulative spend at an information fraction.
///
/// # Safety
/// `out_alpha` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_hsd_alpha(gamma: f64, info_frac: f64, alpha: f64, out_alpha: *mut f64) -> WlrgsStatus {
    guard(|| {
        *out(out_alpha, "out_alpha")? = gs::hsd_alpha(gamma, info_frac, alpha)?;
        Ok(())
    })
}

/// Weighted log-rank statistic. `events` and `arms` hold 0 or 1 per subject;
/// `scheme` is a [`WlrgsScheme`] value and `t_star` is read only for the
/// modest weight.
///
/// # Safety
/// The three arrays must hold `n` elements; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_weighted_logrank(
    times: *const f64,
    events: *const u8,
    arms: *const u8,
    n: usize,
    scheme: u32,
    t_star: f64,
    out_u: *mut f64,
    out_v: *mut f64,
    out_z: *mut f64,
) -> WlrgsStatus {
    guard(|| {
        let times = slice(times, n, "times")?;
        let events = slice(events, n, "events")?;
        let arms = slice(arms, n, "arms")?;
        let (u, v, z) = (out(out_u, "out_u")?, out(out_v, "out_v")?, out(out_z, "out_z")?);
        let mut obs = Vec::with_capacity(n);
        for i in 0..n {
            if events[i] > 1 {
                return Err(Error::Input(format!("subject {i}: event must be 0 or 1")).into());
            }
            obs.push(Observation {
                time: times[i],
                event: events[i] == 1,
                arm: Arm::from_index(arms[i])?,
            });
        }
        let scheme = match scheme {
            s if s == WlrgsScheme::LogRank as u32 => WeightScheme::LogRank,
            s if s == WlrgsScheme::FlemingHarrington01 as u32 => WeightScheme::FlemingHarrington01,
            s if s == WlrgsScheme::ModestWeight as u32 => WeightScheme::modest(t_star)?,
            other => return Err(Error::Input(format!("unknown weight scheme {other}")).into()),
        };
        let r = test_statistic(&obs, &scheme)?;
        (*u, *v, *z) = (r.u, r.v, r.z);
        Ok(())
    })
}

/// Stage-wise ordering p-value for a trial stopping at look `k` with
/// statistic `z_stop`. `criticals` holds the `k - 1` earlier boundaries and
/// `variances` all `k` variances.
///
/// # Safety
/// Arrays must hold the stated lengths; `out_p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_stagewise_p(
    criticals: *const f64,
    variances: *const f64,
    k: usize,
    z_stop: f64,
    out_p: *mut f64,
) -> WlrgsStatus {
    guard(|| {
        if k == 0 {
            return Err(Error::Input("at least one look is required".into()).into());
        }
        let c = slice(criticals, k - 1, "criticals")?;
        let v = slice(variances, k, "variances")?;
        *out(out_p, "out_p")? = gs::stagewise_p(c, v, z_stop, &Integrator::precise())?;
        Ok(())
    })
}

fn new_state(design: Result<GsDesign, Error>, dst: *mut *mut WlrgsGsState) -> WlrgsStatus {
    guard(|| {
        let dst = unsafe { out(dst, "out_state")? };
        let inner = GsState::new(design?)?;
        *dst = Box::into_raw(Box::new(WlrgsGsState { inner }));
        Ok(())
    })
}

/// Monitoring state with information-based HSD spending.
///
/// # Safety
/// `out_state` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_new_hsd(
    alpha: f64,
    gamma: f64,
    max_info: f64,
    max_analyses: usize,
    out_state: *mut *mut WlrgsGsState,
) -> WlrgsStatus {
    new_state(GsDesign::new(alpha, SpendingRule::Hsd { gamma, max_info }, max_analyses), out_state)
}

/// Monitoring state with pre-specified cumulative spends; the last equals
/// `alpha` and the number of spends is the maximum number of analyses.
///
/// # Safety
/// `cum_alphas` must hold `n` elements; `out_state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_new_fixed(
    alpha: f64,
    cum_alphas: *const f64,
    n: usize,
    out_state: *mut *mut WlrgsGsState,
) -> WlrgsStatus {
    let cum = match slice(cum_alphas, n, "cum_alphas") {
        Ok(c) => c.to_vec(),
        Err(_) => {
            set_error("null pointer: cum_alphas");
            return WlrgsStatus::NullPointer;
        }
    };
    let rule = SpendingRule::Fixed {
        cum_alphas: cum,
        max_info: None,
    };
    new_state(GsDesign::new(alpha, rule, n), out_state)
}

/// Records one analysis. On failure the state is left unchanged.
///
/// # Safety
/// `state` must come from a constructor; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_step(
    state: *mut WlrgsGsState,
    variance: f64,
    z: f64,
    is_final: bool,
    out_critical: *mut f64,
    out_cum_alpha: *mut f64,
    out_decision: *mut WlrgsDecision,
) -> WlrgsStatus {
    guard(|| {
        let s = out(state, "state")?;
        let (c, a, d) = (
            out(out_critical, "out_critical")?,
            out(out_cum_alpha, "out_cum_alpha")?,
            out(out_decision, "out_decision")?,
        );
        let next = s.inner.step(variance, z, is_final, &Integrator::precise())?;
        let look = next.last().expect("step records a look");
        *c = look.critical;
        *a = look.cum_alpha;
        *d = match look.decision {
            Decision::Continue => WlrgsDecision::Continue,
            Decision::Reject => WlrgsDecision::Reject,
            Decision::StopAllAlphaSpent => WlrgsDecision::StopAllAlphaSpent,
        };
        s.inner = next;
        Ok(())
    })
}

/// Stage-wise p-value at the look where the trial stopped.
///
/// # Safety
/// `state` must come from a constructor; `out_p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_stagewise_p(state: *const WlrgsGsState, out_p: *mut f64) -> WlrgsStatus {
    guard(|| {
        let s = state.as_ref().ok_or(Failure::Null("state"))?;
        *out(out_p, "out_p")? = s.inner.stagewise_p(&Integrator::precise())?;
        Ok(())
    })
}

/// Serialises the state to JSON (the command-line `state.json` format).
///
/// # Safety
/// `state` must come from a constructor; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_to_json(state: *const WlrgsGsState, out_json: *mut *mut c_char) -> WlrgsStatus {
    guard(|| {
        let s = state.as_ref().ok_or(Failure::Null("state"))?;
        let text = serde_json::to_string(&s.inner).map_err(|e| Error::Input(e.to_string()))?;
        give_string(text, out(out_json, "out_json")?)
    })
}

/// Restores a state from JSON after validating its audit trail.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_state` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_from_json(json: *const c_char, out_state: *mut *mut WlrgsGsState) -> WlrgsStatus {
    guard(|| {
        let text = string(json, "json")?;
        let dst = out(out_state, "out_state")?;
        let inner: GsState = serde_json::from_str(text).map_err(|e| Error::State(e.to_string()))?;
        inner.validate()?;
        *dst = Box::into_raw(Box::new(WlrgsGsState { inner }));
        Ok(())
    })
}

/// Releases a state handle. Null is ignored.
///
/// # Safety
/// `state` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_gs_free(state: *mut WlrgsGsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Evaluates every design in a configuration document and returns the
/// evaluations as a JSON array.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wlrgs_design_evaluate(config_json: *const c_char, out_json: *mut *mut c_char) -> WlrgsStatus {
    guard(|| {
        let text = string(config_json, "config_json")?;
        let dst = out(out_json, "out_json")?;
        let integ = Integrator::precise();
        let evals = wlrgs::config::parse_designs(text, "config")?
            .iter()
            .map(|c| c.scenario()?.evaluate(&integ))
            .collect::<Result<Vec<_>, _>>()?;
        let json = serde_json::to_string(&evals).map_err(|e| Error::Input(e.to_string()))?;
        give_string(json, dst)
    })
}
