//! C ABI over `lgbundle`.
//!
//! Groups and scenarios are opaque handles created by `*_from_*` functions
//! and released with the matching `*_free`. Every fallible call returns an
//! [`LgbStatus`]; on failure the message is kept per thread and can be
//! fetched with [`lgb_last_error_message`]. Strings handed out by the
//! library are released with [`lgb_string_free`]. Arrays are passed as a
//! pointer and a length; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lgbundle::calculus::{BiCovector, StepControl};
use lgbundle::config::{preset, Scenario, ScenarioConfig};
use lgbundle::liegroup::{AlgebraElement, GroupDescriptor, GroupElement};
use lgbundle::bundles::TotalPoint;
use lgbundle::report::RunReport;
use lgbundle::scenarios::gauge::{ConnectionJet, Utiyama};
use lgbundle::suite::run_suite;
use lgbundle::Error;
use nalgebra::DMatrix;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LgbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Wrong length, malformed string or unsupported request.
    InvalidArgument = 2,
    /// The configuration could not be parsed or built.
    Config = 3,
    /// A numerical routine failed (group membership, range, integration).
    Numerical = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// A matrix Lie group with a basis of its algebra.
pub struct LgbGroup {
    inner: GroupDescriptor,
}

/// A scenario configuration together with the objects built from it.
pub struct LgbScenario {
    config: ScenarioConfig,
    built: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> LgbStatus {
    match e {
        Error::Config(_) | Error::Construction(_) | Error::Io(_) | Error::DescriptorInconsistency(_) => {
            LgbStatus::Config
        }
        Error::Usage(_) | Error::Dimension { .. } | Error::MalformedCurve(_) | Error::Domain(_) => {
            LgbStatus::InvalidArgument
        }
        _ => LgbStatus::Numerical,
    }
}

struct Fail(LgbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LgbStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LgbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LgbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside lgbundle".into());
            LgbStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(LgbStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, expected: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail(LgbStatus::NullArgument, format!("{what} is null")));
    }
    if len != expected {
        return Err(invalid(format!("{what} needs {expected} values, got {len}")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(p: *mut f64, len: usize, values: &[f64], what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail(LgbStatus::NullArgument, format!("{what} is null")));
    }
    if len != values.len() {
        return Err(invalid(format!("{what} needs room for {} values, got {len}", values.len())));
    }
    std::slice::from_raw_parts_mut(p, len).copy_from_slice(values);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(LgbStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(LgbStatus::NullArgument, format!("{what} is null")))
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(LgbStatus::Internal, "string contains a NUL byte".into()))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn group_element(group: &GroupDescriptor, values: &[f64]) -> Result<GroupElement, Fail> {
    let k = group.matrix_dim();
    Ok(group.element(DMatrix::from_row_slice(k, k, values))?)
}

/// The message of the last failed call on this thread, or null when the
/// last call succeeded. Release with [`lgb_string_free`].
#[no_mangle]
pub extern "C" fn lgb_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(m) => CString::new(m.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lgb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lgb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a group from a preset name such as "so3" or "r3".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_from_preset(name: *const c_char, out: *mut *mut LgbGroup) -> LgbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = GroupDescriptor::preset(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(LgbGroup { inner }));
        Ok(())
    })
}

/// Creates a group from a JSON descriptor (name, kind, matrix_dim, basis).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_from_json(json: *const c_char, out: *mut *mut LgbGroup) -> LgbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let inner = GroupDescriptor::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(LgbGroup { inner }));
        Ok(())
    })
}

/// # Safety
/// `g` must come from a group constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_free(g: *mut LgbGroup) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Dimension of the Lie algebra; 0 for a null handle.
///
/// # Safety
/// `g` must be a live group handle or null.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_dim(g: *const LgbGroup) -> usize {
    g.as_ref().map_or(0, |g| g.inner.dim())
}

/// Size `k` of the `k x k` matrices; 0 for a null handle.
///
/// # Safety
/// `g` must be a live group handle or null.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_matrix_dim(g: *const LgbGroup) -> usize {
    g.as_ref().map_or(0, |g| g.inner.matrix_dim())
}

/// `exp` of algebra coordinates `xi` (length `dim`) into a row-major
/// matrix `out` (length `k * k`).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_exp(
    g: *const LgbGroup,
    xi: *const f64,
    xi_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LgbStatus {
    guard(|| {
        let group = &handle(g, "group")?.inner;
        let xi = AlgebraElement::from_slice(slice_arg(xi, xi_len, group.dim(), "xi")?);
        write_out(out, out_len, &row_major(&group.exp(&xi)?.0), "out")
    })
}

/// `log` of a row-major group element into algebra coordinates.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_log(
    g: *const LgbGroup,
    m: *const f64,
    m_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LgbStatus {
    guard(|| {
        let group = &handle(g, "group")?.inner;
        let k = group.matrix_dim();
        let elem = group_element(group, slice_arg(m, m_len, k * k, "m")?)?;
        write_out(out, out_len, group.log(&elem)?.coords().as_slice(), "out")
    })
}

/// `Ad_m xi` in algebra coordinates.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_adjoint(
    g: *const LgbGroup,
    m: *const f64,
    m_len: usize,
    xi: *const f64,
    xi_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LgbStatus {
    guard(|| {
        let group = &handle(g, "group")?.inner;
        let k = group.matrix_dim();
        let elem = group_element(group, slice_arg(m, m_len, k * k, "m")?)?;
        let xi = AlgebraElement::from_slice(slice_arg(xi, xi_len, group.dim(), "xi")?);
        write_out(out, out_len, group.adjoint(&elem, &xi)?.coords().as_slice(), "out")
    })
}

/// Lie bracket `[a, b]` in algebra coordinates; all arrays have length `dim`.
///
/// # Safety
/// Pointers must be valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn lgb_group_bracket(
    g: *const LgbGroup,
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> LgbStatus {
    guard(|| {
        let group = &handle(g, "group")?.inner;
        let d = group.dim();
        let a = AlgebraElement::from_slice(slice_arg(a, len, d, "a")?);
        let b = AlgebraElement::from_slice(slice_arg(b, len, d, "b")?);
        write_out(out, len, group.bracket(&a, &b).coords().as_slice(), "out")
    })
}

fn new_scenario(config: ScenarioConfig) -> Result<*mut LgbScenario, Fail> {
    let built = config.build()?;
    Ok(Box::into_raw(Box::new(LgbScenario { config, built })))
}

/// Creates a scenario from a preset name such as "principal-so3".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_from_preset(name: *const c_char, out: *mut *mut LgbScenario) -> LgbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = new_scenario(preset(str_arg(name, "name")?)?)?;
        Ok(())
    })
}

/// Creates a scenario from a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_from_json(json: *const c_char, out: *mut *mut LgbScenario) -> LgbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = new_scenario(ScenarioConfig::from_json(str_arg(json, "json")?)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from a scenario constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_free(s: *mut LgbScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs the check suite and writes the JSON-lines report, without timing
/// data, to `out_report` (release with [`lgb_string_free`]). A seed or
/// sample count of 0 keeps the configured value. Failing checks are not
/// an error: their number goes to `out_failed`.
///
/// # Safety
/// `s` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_validate(
    s: *const LgbScenario,
    seed: u64,
    samples: usize,
    out_report: *mut *mut c_char,
    out_failed: *mut usize,
) -> LgbStatus {
    guard(|| {
        let sc = handle(s, "scenario")?;
        let out_report = out_ptr(out_report, "out_report")?;
        let out_failed = out_ptr(out_failed, "out_failed")?;
        let mut cfg = sc.config.clone();
        if seed != 0 {
            cfg.seed = seed;
        }
        if samples != 0 {
            cfg.samples = samples;
        }
        let records = run_suite(&cfg)?;
        let report = RunReport::new(&cfg.name, sc.built.kind(), cfg.seed, cfg.samples, cfg.step, records);
        *out_failed = report.summary.failed;
        *out_report = c_string(report.to_jsonl())?;
        Ok(())
    })
}

/// Transports the fiber element `exp(fiber)` along a configured curve
/// (`curve_id` null selects the first) and writes the end fiber element,
/// row-major, to `out`. `fiber` null starts at the identity.
///
/// # Safety
/// `s` must be a live handle; pointers must be valid for their lengths.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_transport(
    s: *const LgbScenario,
    curve_id: *const c_char,
    fiber: *const f64,
    fiber_len: usize,
    out: *mut f64,
    out_len: usize,
    out_membership: *mut f64,
) -> LgbStatus {
    guard(|| {
        let sc = handle(s, "scenario")?;
        let omega = match &sc.built {
            Scenario::Principal(p) => p.glued.clone().unwrap_or_else(|| p.single.clone()),
            Scenario::Affine(a) => a.connection.clone(),
            Scenario::GaugeJet(_) => return Err(invalid("gauge jet scenarios have no curves")),
        };
        let specs = sc.config.curves()?;
        let spec = if curve_id.is_null() {
            specs.first().ok_or_else(|| invalid("the configuration defines no curves"))?
        } else {
            let id = str_arg(curve_id, "curve_id")?;
            specs
                .iter()
                .find(|c| c.id() == id)
                .ok_or_else(|| invalid(format!("no curve '{id}'")))?
        };
        let curve = spec.build()?;
        let group = omega.space().group().clone();
        let g0 = if fiber.is_null() {
            group.identity()
        } else {
            group.exp(&AlgebraElement::from_slice(slice_arg(fiber, fiber_len, group.dim(), "fiber")?))?
        };
        let y0 = TotalPoint {
            quotient: curve.position(curve.interval().0),
            fiber: g0,
        };
        let end = omega.transport(&curve, &y0, &StepControl::with_step(sc.config.step))?.end;
        write_out(out, out_len, &row_major(&end.fiber.0), "out")?;
        if let Some(m) = out_membership.as_mut() {
            *m = group.membership_residual(&end.fiber.0);
        }
        Ok(())
    })
}

/// Curvature `F` of a connection jet in a gauge jet scenario. `a` holds
/// `A[mu][k]` (length `n * d`), `da` holds `dA[mu][nu][k]` and `out`
/// receives `F[mu][nu][k]` (both length `n * n * d`).
///
/// # Safety
/// `s` must be a live handle; pointers must be valid for their lengths.
#[no_mangle]
pub unsafe extern "C" fn lgb_scenario_utiyama_curvature(
    s: *const LgbScenario,
    a: *const f64,
    a_len: usize,
    da: *const f64,
    da_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LgbStatus {
    guard(|| {
        let sc = handle(s, "scenario")?;
        let Scenario::GaugeJet(setup) = &sc.built else {
            return Err(invalid("Utiyama curvature needs a gauge jet scenario"));
        };
        let jets = setup.jets.clone();
        let n = jets.base_dim();
        let d = jets.group().dim();
        let a = slice_arg(a, a_len, n * d, "a")?;
        let da = slice_arg(da, da_len, n * n * d, "da")?;
        let jet = ConnectionJet {
            a: (0..n).map(|mu| AlgebraElement::from_slice(&a[mu * d..(mu + 1) * d])).collect(),
            da: BiCovector::from_fn(n, d, |mu, nu| {
                let off = (mu * n + nu) * d;
                AlgebraElement::from_slice(&da[off..off + d])
            }),
        };
        let f = Utiyama::new(jets).curvature(&jet)?;
        let mut values = Vec::with_capacity(n * n * d);
        for mu in 0..n {
            for nu in 0..n {
                values.extend_from_slice(f.get(mu, nu).coords().as_slice());
            }
        }
        write_out(out, out_len, &values, "out")
    })
}
