//! C ABI over the ghostlidar model.
//!
//! Every entry point returns a `GlStatus`; on failure the message is kept per thread and can
//! be read with `gl_last_error_message`. Handles are opaque and owned by the caller, who
//! releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ghostlidar::analytic::{snr, speckle_averaging_gamma, TargetSummary};
use ghostlidar::harness::{run_experiment, ExperimentConfig, RunReport};
use ghostlidar::scenario::{derive_geometry, Scenario, SourceKind};
use ghostlidar::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Config = 4,
    Sampling = 5,
    GridMismatch = 6,
    Internal = 7,
    Estimation = 8,
    Budget = 9,
    Unsupported = 10,
    Io = 11,
    Parse = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlSourceKind {
    Pseudothermal = 0,
    Spdc = 1,
    Computational = 2,
}

impl From<GlSourceKind> for SourceKind {
    fn from(k: GlSourceKind) -> Self {
        match k {
            GlSourceKind::Pseudothermal => SourceKind::Pseudothermal,
            GlSourceKind::Spdc => SourceKind::Spdc,
            GlSourceKind::Computational => SourceKind::Computational,
        }
    }
}

/// Derived lengths and dimensionless ratios of a scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GlGeometry {
    pub wavenumber: f64,
    pub rho_l: f64,
    pub a_l: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub beta: f64,
    pub brightness: f64,
    pub brightness_omega: f64,
    /// Turbulence coherence lengths of the R, S and T paths; infinite in vacuum.
    pub rho_r: f64,
    pub rho_s: f64,
    pub rho_t: f64,
}

/// SNR of a uniform target, with its scaled noise terms and asymptotes.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GlSnr {
    pub total: f64,
    pub numerator: f64,
    pub source: f64,
    pub path: f64,
    pub detect: f64,
    pub mix: f64,
    pub saturation: f64,
    pub high_brightness: f64,
    pub low_brightness: f64,
    pub warnings: u32,
}

/// Opaque scenario handle.
pub struct GlScenario {
    inner: Scenario,
}

/// Opaque experiment report handle.
pub struct GlReport {
    inner: RunReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GlStatus {
    match e {
        Error::Domain { .. } => GlStatus::Domain,
        Error::Config(_) => GlStatus::Config,
        Error::Sampling { .. } => GlStatus::Sampling,
        Error::GridMismatch(_) => GlStatus::GridMismatch,
        Error::Internal(_) => GlStatus::Internal,
        Error::Estimation(_) => GlStatus::Estimation,
        Error::Budget(_) => GlStatus::Budget,
        Error::Unsupported(_) => GlStatus::Unsupported,
        Error::Io { .. } => GlStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Format { .. } => GlStatus::Parse,
    }
}

struct Fail(GlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GlStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GlStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(GlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn scenario_ref<'a>(s: *const GlScenario) -> Result<&'a Scenario, Fail> {
    s.as_ref().map(|h| &h.inner).ok_or_else(|| null("scenario"))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length excluding the NUL, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reference parameter set (λ₀ = 1.5 µm, a₀ = 3 cm, L = 1 km) at the given brightness per mode.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn gl_scenario_paper_preset(
    kind: GlSourceKind,
    brightness_omega: f64,
    out: *mut *mut GlScenario,
) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Scenario::paper_preset(kind.into(), brightness_omega);
        inner.validate_parameters()?;
        *out = Box::into_raw(Box::new(GlScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gl_scenario_from_json(json: *const c_char, out: *mut *mut GlScenario) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Scenario::from_json_str(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(GlScenario { inner }));
        Ok(())
    })
}

/// Sets C²ₙ (m^-2/3) on the reference, signal and target paths.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gl_scenario_set_turbulence(s: *mut GlScenario, cn2_r: f64, cn2_s: f64, cn2_t: f64) -> GlStatus {
    guard(|| {
        let h = s.as_mut().ok_or_else(|| null("scenario"))?;
        let next = h.inner.with_turbulence(cn2_r, cn2_s, cn2_t);
        next.validate_parameters()?;
        h.inner = next;
        Ok(())
    })
}

/// Sets the integration time T_I in seconds.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gl_scenario_set_integration_time(s: *mut GlScenario, seconds: f64) -> GlStatus {
    guard(|| {
        let h = s.as_mut().ok_or_else(|| null("scenario"))?;
        let next = h.inner.with_integration_time(seconds);
        next.validate_parameters()?;
        h.inner = next;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gl_scenario_free(s: *mut GlScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_derive_geometry(s: *const GlScenario, out: *mut GlGeometry) -> GlStatus {
    guard(|| {
        let sc = scenario_ref(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = derive_geometry(sc)?;
        let rho = |p: &ghostlidar::scenario::PathTurbulence| p.coherence_length();
        *out = GlGeometry {
            wavenumber: g.wavenumber,
            rho_l: g.rho_l,
            a_l: g.a_l,
            alpha: g.alpha,
            alpha_tilde: g.alpha_tilde,
            beta: g.beta,
            brightness: g.brightness,
            brightness_omega: g.brightness_omega,
            rho_r: rho(&g.reference),
            rho_s: rho(&g.signal),
            rho_t: rho(&g.target),
        };
        Ok(())
    })
}

/// Analytic SNR for a uniform target of cross-section `target_area` (m²).
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_snr(s: *const GlScenario, target_area: f64, out: *mut GlSnr) -> GlStatus {
    guard(|| {
        let sc = scenario_ref(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = derive_geometry(sc)?;
        let gamma = speckle_averaging_gamma(g.beta)?.value;
        let b = snr(&g, &TargetSummary::uniform(target_area)?, sc, gamma)?;
        *out = GlSnr {
            total: b.total,
            numerator: b.numerator,
            source: b.source,
            path: b.path,
            detect: b.detect,
            mix: b.mix,
            saturation: b.asymptotes.saturation,
            high_brightness: b.asymptotes.high_brightness,
            low_brightness: b.asymptotes.low_brightness,
            warnings: b.warnings.len() as u32,
        };
        Ok(())
    })
}

/// Speckle-averaging factor Γ(β).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_speckle_gamma(beta: f64, out: *mut f64) -> GlStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = speckle_averaging_gamma(beta)?.value;
        Ok(())
    })
}

/// Runs an experiment described by a JSON configuration. A failed check is not an error:
/// the call returns `GL_STATUS_OK` and `gl_report_passed` reports 0.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gl_run_experiment(config_json: *const c_char, out: *mut *mut GlReport) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig::from_json_str(read_str(config_json, "config_json")?)?;
        let inner = run_experiment(&config)?;
        let json = serde_json::to_string(&inner).map_err(Error::from)?;
        let json = CString::new(json).map_err(|e| Fail(GlStatus::Internal, e.to_string()))?;
        *out = Box::into_raw(Box::new(GlReport { inner, json }));
        Ok(())
    })
}

/// 1 if every check passed, 0 if not, -1 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gl_report_passed(r: *const GlReport) -> i32 {
    match r.as_ref() {
        Some(h) => h.inner.passed() as i32,
        None => -1,
    }
}

/// JSON form of the report. The string is owned by the handle and lives until `gl_report_free`.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gl_report_json(r: *const GlReport) -> *const c_char {
    match r.as_ref() {
        Some(h) => h.json.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `r` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gl_report_free(r: *mut GlReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
