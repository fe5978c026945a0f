//! C ABI over the edgeshed library.
//!
//! Every fallible call returns an [`EsStatus`] and writes its result through
//! an out-pointer. On failure the message is available from
//! [`es_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use edgeshed::agent::{Action, AgentConfig, OutletAgent, Phase};
use edgeshed::control::{Command, ParameterBundle, build_condition_table};
use edgeshed::harness::scenario::MIN_MEASUREMENT_VARIANCE;
use edgeshed::harness::{Overrides, Scenario, build_ieee24};
use edgeshed::sfr::{DerivedParams, FrequencySample, PowerEvent, SystemParams};
use edgeshed::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Unsupported = 3,
    Numerical = 4,
    Parse = 5,
    NoBundle = 6,
    OutOfOrder = 7,
    Config = 8,
    Io = 9,
    /// The requested value is not available yet.
    NotReady = 10,
    Panic = 11,
}

/// What the outlet should do with its switch after a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsAction {
    None = 0,
    SwitchOff = 1,
    SwitchOn = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsPhase {
    Idle = 0,
    EventDetected = 1,
    Estimating = 2,
    ShedDecided = 3,
    Off = 4,
}

/// Physical parameters of the frequency-response model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EsSystemParams {
    pub h: f64,
    pub d: f64,
    pub r: f64,
    pub km: f64,
    pub fh: f64,
    pub tr: f64,
    pub s_base_mva: f64,
    pub f_nominal_hz: f64,
    pub p_load_total_mw: f64,
}

/// Opaque system model.
pub struct EsSystem {
    params: SystemParams,
    derived: DerivedParams,
}

/// Opaque scenario.
pub struct EsScenario {
    inner: Scenario,
}

/// Opaque outlet agent.
pub struct EsAgent {
    inner: OutletAgent,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EsStatus {
    match e {
        Error::InvalidInput(_) => EsStatus::InvalidInput,
        Error::Unsupported(_) => EsStatus::Unsupported,
        Error::Numerical(_) => EsStatus::Numerical,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => EsStatus::Parse,
        Error::NoBundle => EsStatus::NoBundle,
        Error::OutOfOrder { .. } => EsStatus::OutOfOrder,
        Error::Config(_) => EsStatus::Config,
        Error::Io(_) => EsStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> EsStatus
where
    F: FnOnce() -> Result<(), EsStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EsStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("panic inside edgeshed");
            EsStatus::Panic
        }
    }
}

fn fail(e: Error) -> EsStatus {
    set_last_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> EsStatus {
    set_last_error(&format!("null pointer: {what}"));
    EsStatus::NullPointer
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, EsStatus> {
    // SAFETY: caller promises `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, EsStatus> {
    // SAFETY: caller promises `p` is null or a live handle.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `into_handle` and is released once.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn es_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(
        concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes(),
    ) {
        Ok(s) => s,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn es_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn system_from(params: SystemParams) -> Result<EsSystem, EsStatus> {
    let derived = params.derive().map_err(fail)?;
    Ok(EsSystem { params, derived })
}

/// Builds a system model. Fails with `UNSUPPORTED` for an overdamped set.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_new(
    params: *const EsSystemParams,
    out_system: *mut *mut EsSystem,
) -> EsStatus {
    guard(|| {
        let p = unsafe { borrow(params, "params") }?;
        let slot = unsafe { out(out_system, "out_system") }?;
        let sys = system_from(SystemParams {
            h: p.h,
            d: p.d,
            r: p.r,
            km: p.km,
            fh: p.fh,
            tr: p.tr,
            s_base_mva: p.s_base_mva,
            f_nominal_hz: p.f_nominal_hz,
            p_load_total_mw: p.p_load_total_mw,
        })?;
        *slot = into_handle(sys);
        Ok(())
    })
}

/// Releases a system; null is ignored.
///
/// # Safety
/// `system` must be null or a handle from this library not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_free(system: *mut EsSystem) {
    unsafe { free_handle(system) }
}

/// Frequency deviation (p.u.) at `t_s` after a step loss `delta_p_pu` at 0.
///
/// # Safety
/// `system` must be a live handle and `out_pu` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_delta_f(
    system: *const EsSystem,
    delta_p_pu: f64,
    t_s: f64,
    out_pu: *mut f64,
) -> EsStatus {
    guard(|| {
        let s = unsafe { borrow(system, "system") }?;
        *unsafe { out(out_pu, "out_pu") }? = s.derived.delta_f(delta_p_pu, t_s);
        Ok(())
    })
}

/// Rate of change of frequency (Hz/s) at `t_s` after a step loss at 0.
///
/// # Safety
/// `system` must be a live handle and `out_hz_per_s` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_rocof(
    system: *const EsSystem,
    delta_p_pu: f64,
    t_s: f64,
    out_hz_per_s: *mut f64,
) -> EsStatus {
    guard(|| {
        let s = unsafe { borrow(system, "system") }?;
        let events = [PowerEvent { time: 0.0, delta_p: delta_p_pu }];
        *unsafe { out(out_hz_per_s, "out_hz_per_s") }? =
            s.derived.rocof_multi(&events, t_s) * s.derived.f_nominal_hz;
        Ok(())
    })
}

/// Time of the frequency minimum after a step loss (s).
///
/// # Safety
/// `system` must be a live handle and `out_s` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_t_nadir(system: *const EsSystem, out_s: *mut f64) -> EsStatus {
    guard(|| {
        let s = unsafe { borrow(system, "system") }?;
        *unsafe { out(out_s, "out_s") }? = s.derived.t_nadir();
        Ok(())
    })
}

/// Loss (MW) whose frequency minimum is exactly `f_s_hz`.
///
/// # Safety
/// `system` must be a live handle and `out_mw` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_threshold_loss_mw(
    system: *const EsSystem,
    f_s_hz: f64,
    out_mw: *mut f64,
) -> EsStatus {
    guard(|| {
        let s = unsafe { borrow(system, "system") }?;
        *unsafe { out(out_mw, "out_mw") }? =
            s.derived.threshold_power_loss_mw(f_s_hz).map_err(fail)?;
        Ok(())
    })
}

/// Copies the parameters the system was built from.
///
/// # Safety
/// `system` must be a live handle and `out_params` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_system_params(
    system: *const EsSystem,
    out_params: *mut EsSystemParams,
) -> EsStatus {
    guard(|| {
        let p = unsafe { borrow(system, "system") }?.params;
        *unsafe { out(out_params, "out_params") }? = EsSystemParams {
            h: p.h,
            d: p.d,
            r: p.r,
            km: p.km,
            fh: p.fh,
            tr: p.tr,
            s_base_mva: p.s_base_mva,
            f_nominal_hz: p.f_nominal_hz,
            p_load_total_mw: p.p_load_total_mw,
        };
        Ok(())
    })
}

/// The built-in IEEE 24-bus scenario.
///
/// # Safety
/// `out_scenario` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_scenario_ieee24(out_scenario: *mut *mut EsScenario) -> EsStatus {
    guard(|| {
        let slot = unsafe { out(out_scenario, "out_scenario") }?;
        *slot = into_handle(EsScenario { inner: build_ieee24(&Overrides::default()) });
        Ok(())
    })
}

/// Parses a scenario from NUL-terminated TOML text.
///
/// # Safety
/// `toml` must be a valid C string and `out_scenario` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_scenario_from_toml(
    toml: *const c_char,
    out_scenario: *mut *mut EsScenario,
) -> EsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let slot = unsafe { out(out_scenario, "out_scenario") }?;
        // SAFETY: checked non-null; caller promises NUL termination.
        let text = unsafe { CStr::from_ptr(toml) }
            .to_str()
            .map_err(|_| fail(Error::InvalidInput("scenario is not UTF-8".into())))?;
        let scn = Scenario::from_toml_str(text).map_err(fail)?;
        *slot = into_handle(EsScenario { inner: scn });
        Ok(())
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_scenario_free(scenario: *mut EsScenario) {
    unsafe { free_handle(scenario) }
}

/// System model of a scenario; free it separately.
///
/// # Safety
/// `scenario` must be a live handle and `out_system` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_scenario_system(
    scenario: *const EsScenario,
    out_system: *mut *mut EsSystem,
) -> EsStatus {
    guard(|| {
        let scn = unsafe { borrow(scenario, "scenario") }?;
        let slot = unsafe { out(out_system, "out_system") }?;
        *slot = into_handle(system_from(scn.inner.params().map_err(fail)?)?);
        Ok(())
    })
}

/// Protection objective of a scenario (Hz).
///
/// # Safety
/// `scenario` must be a live handle and `out_hz` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_scenario_f_s(scenario: *const EsScenario, out_hz: *mut f64) -> EsStatus {
    guard(|| {
        let scn = unsafe { borrow(scenario, "scenario") }?;
        *unsafe { out(out_hz, "out_hz") }? = scn.inner.system.f_s_hz;
        Ok(())
    })
}

/// Creates an agent holding the parameters of one load block.
///
/// `noise_std_hz` sets the filter's measurement variance.
///
/// # Safety
/// `system` must be a live handle and `out_agent` writable.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn es_agent_new(
    system: *const EsSystem,
    outlet_id: u32,
    f_s_hz: f64,
    accumulated_power_mw: f64,
    switch_off_freq_hz: f64,
    noise_std_hz: f64,
    out_agent: *mut *mut EsAgent,
) -> EsStatus {
    guard(|| {
        let s = unsafe { borrow(system, "system") }?;
        let slot = unsafe { out(out_agent, "out_agent") }?;
        if noise_std_hz.is_nan() || noise_std_hz < 0.0 || !accumulated_power_mw.is_finite() {
            return Err(fail(Error::InvalidInput("bad noise or accumulated power".into())));
        }
        let table = build_condition_table(&s.derived, f_s_hz, 0.05).map_err(fail)?;
        let bundle = ParameterBundle {
            derived: s.derived,
            delta_p_s_mw: s.derived.threshold_power_loss_mw(f_s_hz).map_err(fail)?,
            f_s_hz,
            condition_table: table,
            block_id: 0,
            accumulated_power_mw,
            switch_off_freq_hz,
            issued_at_s: 0.0,
        };
        let mut cfg = AgentConfig::default();
        cfg.ekf.r_meas_hz2 = (noise_std_hz * noise_std_hz).max(MIN_MEASUREMENT_VARIANCE);
        let agent = OutletAgent::new(outlet_id, cfg).map_err(fail)?.with_bundle(bundle);
        *slot = into_handle(EsAgent { inner: agent });
        Ok(())
    })
}

/// Releases an agent; null is ignored.
///
/// # Safety
/// `agent` must be null or a handle from this library not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_agent_free(agent: *mut EsAgent) {
    unsafe { free_handle(agent) }
}

fn action_code(a: Option<Action>) -> EsAction {
    match a {
        None => EsAction::None,
        Some(Action::SwitchOff(_)) => EsAction::SwitchOff,
        Some(Action::SwitchOn) => EsAction::SwitchOn,
    }
}

/// Feeds one frequency sample; samples must arrive in time order.
///
/// # Safety
/// `agent` must be a live handle and `out_action` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_agent_ingest(
    agent: *mut EsAgent,
    t_s: f64,
    f_hz: f64,
    out_action: *mut EsAction,
) -> EsStatus {
    guard(|| {
        let a = unsafe { out(agent, "agent") }?;
        let slot = unsafe { out(out_action, "out_action") }?;
        let action = a.inner.ingest(FrequencySample { t: t_s, f: f_hz, rocof: None }).map_err(fail)?;
        *slot = action_code(action);
        Ok(())
    })
}

/// Applies a direct command from the control center (`switch_on` nonzero for on).
///
/// # Safety
/// `agent` must be a live handle and `out_action` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_agent_command(
    agent: *mut EsAgent,
    t_s: f64,
    switch_on: i32,
    out_action: *mut EsAction,
) -> EsStatus {
    guard(|| {
        let a = unsafe { out(agent, "agent") }?;
        let slot = unsafe { out(out_action, "out_action") }?;
        let cmd = if switch_on != 0 { Command::On } else { Command::Off };
        *slot = action_code(a.inner.apply_command(t_s, cmd));
        Ok(())
    })
}

/// Current phase of the agent.
///
/// # Safety
/// `agent` must be a live handle and `out_phase` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_agent_phase(agent: *const EsAgent, out_phase: *mut EsPhase) -> EsStatus {
    guard(|| {
        let a = unsafe { borrow(agent, "agent") }?;
        *unsafe { out(out_phase, "out_phase") }? = match a.inner.phase() {
            Phase::Idle => EsPhase::Idle,
            Phase::EventDetected => EsPhase::EventDetected,
            Phase::Estimating => EsPhase::Estimating,
            Phase::ShedDecided => EsPhase::ShedDecided,
            Phase::Off => EsPhase::Off,
        };
        Ok(())
    })
}

/// Latest loss estimate in MW: the filter's once finished, else the
/// least-squares one. `NOT_READY` before either exists.
///
/// # Safety
/// `agent` must be a live handle and `out_mw` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn es_agent_estimate_mw(agent: *const EsAgent, out_mw: *mut f64) -> EsStatus {
    guard(|| {
        let a = unsafe { borrow(agent, "agent") }?;
        let slot = unsafe { out(out_mw, "out_mw") }?;
        let b = a.inner.bundle().ok_or_else(|| fail(Error::NoBundle))?;
        match a.inner.estimate_pu().or(a.inner.lse_result()) {
            Some(pu) => {
                *slot = b.derived.pu_to_mw(pu);
                Ok(())
            }
            None => {
                set_last_error("no estimate yet");
                Err(EsStatus::NotReady)
            }
        }
    })
}
