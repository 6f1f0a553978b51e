//! C ABI over `polaron-core`.
//!
//! Every call returns a [`PolaronStatus`]. On failure the thread-local
//! message is available from [`polaron_last_error_message`] until the next
//! call on the same thread. Models are opaque handles released with
//! [`polaron_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polaron_core::cli::RunConfig;
use polaron_core::delta::phi_delta;
use polaron_core::fock::{two_body_check, two_fermion_ground_energy, TwoFermionOptions};
use polaron_core::lattice::{CutoffKind, CutoffScheme, ModelParams};
use polaron_core::molecule::solve_molecule;
use polaron_core::polaron::solve_polaron;
use polaron_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolaronStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Config = 3,
    Numerical = 4,
    /// The requested bound state does not exist.
    NotFound = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolaronCutoff {
    Sharp = 0,
    Gaussian = 1,
    BetaOnly = 2,
}

impl From<PolaronCutoff> for CutoffKind {
    fn from(c: PolaronCutoff) -> Self {
        match c {
            PolaronCutoff::Sharp => CutoffKind::Sharp,
            PolaronCutoff::Gaussian => CutoffKind::Gaussian,
            PolaronCutoff::BetaOnly => CutoffKind::BetaOnly,
        }
    }
}

/// Physical parameters plus a cutoff scheme.
pub struct PolaronModel {
    params: ModelParams,
    scheme: CutoffScheme,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PolaronStatus {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch(_) | Error::DimensionCap { .. } => {
            PolaronStatus::InvalidParameter
        }
        Error::Config { .. } | Error::Io(_) | Error::Json(_) => PolaronStatus::Config,
        _ => PolaronStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic as the last error.
fn guard(f: impl FnOnce() -> Result<(), (PolaronStatus, String)>) -> PolaronStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolaronStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PolaronStatus::Panic
        }
    }
}

fn core<T>(r: polaron_core::Result<T>) -> Result<T, (PolaronStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PolaronStatus, String) {
    (PolaronStatus::NullPointer, format!("{what} is null"))
}

unsafe fn model_ref<'a>(model: *const PolaronModel) -> Result<&'a PolaronModel, (PolaronStatus, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (PolaronStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed(params: ModelParams, scheme: CutoffScheme) -> *mut PolaronModel {
    Box::into_raw(Box::new(PolaronModel { params, scheme }))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// owned by the library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn polaron_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn polaron_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New model with a sharp cutoff at radius `8κ`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn polaron_model_new(
    box_length: f64,
    impurity_mass: f64,
    binding_energy: f64,
    fermi_energy: f64,
    out: *mut *mut PolaronModel,
) -> PolaronStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = core(ModelParams::new(box_length, impurity_mass, binding_energy, fermi_energy))?;
        let scheme = core(CutoffScheme::sharp(8.0 * params.kappa, params.kappa))?;
        write(out, boxed(params, scheme), "out")
    })
}

/// New model from the text of a `key = value` run configuration.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_model_from_config(text: *const c_char, out: *mut *mut PolaronModel) -> PolaronStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (PolaronStatus::Config, format!("config is not utf-8: {e}")))?;
        let config = core(RunConfig::parse(text))?;
        let scheme = core(config.scheme())?;
        write(out, boxed(config.params, scheme), "out")
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polaron_model_free(model: *mut PolaronModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Replaces the cutoff scheme; `radius` is in units of `κ`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn polaron_model_set_cutoff(
    model: *mut PolaronModel,
    kind: PolaronCutoff,
    radius: f64,
) -> PolaronStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.scheme = core(CutoffScheme::new(kind.into(), radius * m.params.kappa, m.params.kappa))?;
        Ok(())
    })
}

/// `κ = 2π/L`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_model_kappa(model: *const PolaronModel, out: *mut f64) -> PolaronStatus {
    guard(|| write(out, model_ref(model)?.params.kappa, "out"))
}

/// Ground energy of the zero-momentum one-fermion sector at the model
/// cutoff, and the residual of the predicted eigenvector.
///
/// # Safety
/// `model` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_two_body_ground(
    model: *const PolaronModel,
    energy: *mut f64,
    residual: *mut f64,
) -> PolaronStatus {
    guard(|| {
        let m = model_ref(model)?;
        let r = core(two_body_check(&m.scheme, &m.params))?;
        write(energy, r.ground, "energy")?;
        write(residual, r.predicted_residual, "residual")
    })
}

/// Ground energy of the zero-momentum two-fermion sector at the model cutoff.
///
/// # Safety
/// `model` must be a live handle; `energy` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_two_fermion_ground(model: *const PolaronModel, energy: *mut f64) -> PolaronStatus {
    guard(|| {
        let m = model_ref(model)?;
        let e = core(two_fermion_ground_energy(
            &m.scheme,
            &m.params,
            &TwoFermionOptions::ladder(&m.scheme),
        ))?;
        write(energy, e, "energy")
    })
}

/// Polaron energy `E_P = E_μ − λ*` and the secular-equation residual.
///
/// # Safety
/// `model` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_solve_polaron(
    model: *const PolaronModel,
    energy: *mut f64,
    residual: *mut f64,
) -> PolaronStatus {
    guard(|| {
        let m = model_ref(model)?;
        let s = core(solve_polaron(&m.params))?;
        write(energy, s.e_polaron, "energy")?;
        write(residual, s.residual, "residual")
    })
}

/// Molecule energy `E_M` with `K_cap` in units of `κ`. Returns
/// [`PolaronStatus::NotFound`] when no molecule lies below `E_μ`.
///
/// # Safety
/// `model` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_solve_molecule(
    model: *const PolaronModel,
    k_cap: f64,
    energy: *mut f64,
    energy_error: *mut f64,
) -> PolaronStatus {
    guard(|| {
        let m = model_ref(model)?;
        match core(solve_molecule(&m.params, k_cap * m.params.kappa))? {
            Some(s) => {
                write(energy, s.e_molecule, "energy")?;
                write(energy_error, s.energy_error, "energy_error")
            }
            None => Err((PolaronStatus::NotFound, "no molecule below the Fermi energy".into())),
        }
    })
}

/// Renormalized point-interaction `φ(z)` for real `z < 0`, with its
/// certified error bound.
///
/// # Safety
/// `model` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn polaron_phi_delta(
    model: *const PolaronModel,
    z: f64,
    value: *mut f64,
    error_bound: *mut f64,
) -> PolaronStatus {
    guard(|| {
        let m = model_ref(model)?;
        let r = core(phi_delta(&m.params, z))?;
        write(value, r.value, "value")?;
        write(error_bound, r.error_bound, "error_bound")
    })
}
