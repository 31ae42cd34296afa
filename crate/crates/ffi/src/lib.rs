//! C ABI over `pendular-core`.
//!
//! Objects cross the boundary as opaque handles created by `pd_*_new` /
//! `pd_optimize` and released with the matching `pd_*_free`. Every fallible
//! call returns a [`PdStatus`]; the message of the last failure on the
//! calling thread is available from [`pd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use pendular_core::dynamics::{Direction, Propagator, Pulse, StateVector};
use pendular_core::mtoct::{self, Gate, OptimizationResult, OptimizerConfig, Reduction};
use pendular_core::pair::{self, Molecule, PairGeometry, PairSystem};
use pendular_core::{units, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Domain = 3,
    Contract = 4,
    Numeric = 5,
    StepSize = 6,
    Degeneracy = 7,
    UnresolvableSites = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdGate {
    Not1 = 0,
    Not2 = 1,
    Had1 = 2,
    Had2 = 3,
    Cnot = 4,
    Identity = 5,
}

impl From<PdGate> for Gate {
    fn from(g: PdGate) -> Gate {
        match g {
            PdGate::Not1 => Gate::Not1,
            PdGate::Not2 => Gate::Not2,
            PdGate::Had1 => Gate::Had1,
            PdGate::Had2 => Gate::Had2,
            PdGate::Cnot => Gate::Cnot,
            PdGate::Identity => Gate::Identity,
        }
    }
}

/// Qubit data of one site.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PdSiteQubit {
    pub x: f64,
    pub w0_over_b: f64,
    pub w1_over_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub cx: f64,
}

/// Optimizer settings. `duration_ns <= 0` selects the default duration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdOptimizerConfig {
    pub alpha0: f64,
    pub max_iter: u32,
    pub fidelity_threshold: f64,
    pub fidelity_delta_tol: f64,
    pub dt_ps: f64,
    pub duration_ns: f64,
    pub initial_amplitude_kv_cm: f64,
    pub update_scale: f64,
    pub strict_reduction: bool,
    pub seed: u64,
}

impl From<&PdOptimizerConfig> for OptimizerConfig {
    fn from(c: &PdOptimizerConfig) -> Self {
        let mut cfg = OptimizerConfig {
            alpha0: c.alpha0,
            max_iter: c.max_iter as usize,
            fidelity_threshold: c.fidelity_threshold,
            fidelity_delta_tol: c.fidelity_delta_tol,
            dt_ps: c.dt_ps,
            duration_ns: (c.duration_ns > 0.0).then_some(c.duration_ns),
            update_scale: c.update_scale,
            reduction: if c.strict_reduction {
                Reduction::Strict
            } else {
                Reduction::Relaxed
            },
            seed: c.seed,
            ..OptimizerConfig::default()
        };
        cfg.initial_field.amplitude_kv_cm = c.initial_amplitude_kv_cm;
        cfg
    }
}

/// Opaque pair handle.
pub struct PdPair {
    inner: PairSystem,
}

/// Opaque optimization result handle.
pub struct PdResult {
    inner: OptimizationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> PdStatus {
    match err {
        Error::Config(_) => PdStatus::Config,
        Error::Domain(_) => PdStatus::Domain,
        Error::Contract(_) => PdStatus::Contract,
        Error::Numeric(_) => PdStatus::Numeric,
        Error::StepSize { .. } => PdStatus::StepSize,
        Error::Degeneracy { .. } => PdStatus::Degeneracy,
        Error::UnresolvableSites => PdStatus::UnresolvableSites,
        Error::Io(_) => PdStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PdStatus, String)>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PdStatus::Panic
        }
    }
}

fn core<T>(r: pendular_core::Result<T>) -> Result<T, (PdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PdStatus, String) {
    (PdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PdStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Builds a two-site pair of identical molecules. `n_levels` is the number
/// of pendular levels per site (2 for the qubit model).
///
/// # Safety
/// `name` must be a NUL-terminated string or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_pair_new(
    name: *const c_char,
    b_cm: f64,
    mu_debye: f64,
    epsilon1_kv_cm: f64,
    epsilon2_kv_cm: f64,
    r12_nm: f64,
    alpha_deg: f64,
    n_levels: u32,
    out: *mut *mut PdPair,
) -> PdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = if name.is_null() {
            "molecule".to_string()
        } else {
            CStr::from_ptr(name).to_string_lossy().into_owned()
        };
        let m = Molecule {
            name: name.clone(),
            b_cm,
            mu_debye,
        };
        let pair = core((|| {
            pair::pair_from_specs(
                &m.at_field(epsilon1_kv_cm)?,
                &m.at_field(epsilon2_kv_cm)?,
                PairGeometry::new(r12_nm, alpha_deg)?,
                &name,
                n_levels as usize,
                pendular_core::pendular::DEFAULT_TOLERANCE,
            )
        })())?;
        *out = Box::into_raw(Box::new(PdPair { inner: pair }));
        Ok(())
    })
}

/// # Safety
/// `pair` must come from [`pd_pair_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pd_pair_free(pair: *mut PdPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Dimension of the pair state space.
///
/// # Safety
/// `pair` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn pd_pair_dim(pair: *const PdPair) -> usize {
    pair.as_ref().map_or(0, |p| p.inner.dim())
}

/// Qubit data of site 1 or 2.
///
/// # Safety
/// `pair` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_pair_site(
    pair: *const PdPair,
    site: u32,
    out: *mut PdSiteQubit,
) -> PdStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let q = match site {
            1 => &p.site1,
            2 => &p.site2,
            _ => return Err((PdStatus::Config, format!("site must be 1 or 2, got {site}"))),
        };
        *out = PdSiteQubit {
            x: q.x,
            w0_over_b: q.w0_over_b,
            w1_over_b: q.w1_over_b,
            c0: q.c0,
            c1: q.c1,
            cx: q.cx,
        };
        Ok(())
    })
}

/// First-order conditional frequency shift Δω/2π in MHz.
///
/// # Safety
/// `pair` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_pair_delta_omega_mhz(pair: *const PdPair, out: *mut f64) -> PdStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.inner;
        *out.as_mut().ok_or_else(|| null("out"))? = units::to_megahertz(p.delta_omega_approx());
        Ok(())
    })
}

/// Default pulse length 10ħ/Δω in ns.
///
/// # Safety
/// `pair` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_pair_default_duration_ns(
    pair: *const PdPair,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.inner;
        let t = core(mtoct::default_duration(p.delta_omega_approx()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = units::to_nanoseconds(t);
        Ok(())
    })
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_optimizer_config_default(out: *mut PdOptimizerConfig) -> PdStatus {
    guard(|| {
        let d = OptimizerConfig::default();
        *out.as_mut().ok_or_else(|| null("out"))? = PdOptimizerConfig {
            alpha0: d.alpha0,
            max_iter: d.max_iter as u32,
            fidelity_threshold: d.fidelity_threshold,
            fidelity_delta_tol: d.fidelity_delta_tol,
            dt_ps: d.dt_ps,
            duration_ns: 0.0,
            initial_amplitude_kv_cm: d.initial_field.amplitude_kv_cm,
            update_scale: d.update_scale,
            strict_reduction: d.reduction == Reduction::Strict,
            seed: d.seed,
        };
        Ok(())
    })
}

/// Optimizes a gate pulse. On success `*out` owns a result handle, also
/// when the run hit `max_iter` without converging (see
/// [`pd_result_converged`]).
///
/// # Safety
/// `pair` and `cfg` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_optimize(
    pair: *const PdPair,
    gate: PdGate,
    cfg: *const PdOptimizerConfig,
    out: *mut *mut PdResult,
) -> PdStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.inner;
        let cfg: OptimizerConfig = deref(cfg, "cfg")?.into();
        if out.is_null() {
            return Err(null("out"));
        }
        let r = core(mtoct::optimize(p, &mtoct::gate_targets(gate.into()), &cfg))?;
        *out = Box::into_raw(Box::new(PdResult { inner: r }));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`pd_optimize`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pd_result_free(result: *mut PdResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Fidelity of the returned pulse; NaN for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_result_fidelity(result: *const PdResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.fidelity)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_result_avg_probability(result: *const PdResult) -> f64 {
    result
        .as_ref()
        .map_or(f64::NAN, |r| r.inner.avg_probability)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_result_iterations(result: *const PdResult) -> u32 {
    result
        .as_ref()
        .map_or(0, |r| r.inner.iterations_used as u32)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_result_converged(result: *const PdResult) -> bool {
    result.as_ref().is_some_and(|r| r.inner.converged)
}

/// Time step of the pulse in ps; NaN for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pd_result_dt_ps(result: *const PdResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.pulse.dt_ps())
}

/// Copies the pulse samples (kV/cm) into `buf`. `*len` holds the capacity
/// on entry and the sample count on return.
///
/// # Safety
/// `result` must be a live handle; `buf` must hold `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_result_pulse(
    result: *const PdResult,
    buf: *mut f64,
    len: *mut usize,
) -> PdStatus {
    guard(|| {
        let r = &deref(result, "result")?.inner;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let s = r.pulse.samples();
        let capacity = *len;
        *len = s.len();
        if buf.is_null() || capacity < s.len() {
            return Err((
                PdStatus::BufferTooSmall,
                format!("pulse has {} samples", s.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.as_ptr(), buf, s.len());
        Ok(())
    })
}

/// Propagates `psi` (split real/imaginary parts, `dim` entries each) in
/// place through a pulse of `n_samples` samples spaced `dt_ps` apart.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pd_propagate(
    pair: *const PdPair,
    samples: *const f64,
    n_samples: usize,
    dt_ps: f64,
    psi_re: *mut f64,
    psi_im: *mut f64,
    dim: usize,
) -> PdStatus {
    guard(|| {
        let p = &deref(pair, "pair")?.inner;
        if samples.is_null() || psi_re.is_null() || psi_im.is_null() {
            return Err(null("samples or state"));
        }
        if dim != p.dim() {
            return Err((
                PdStatus::Contract,
                format!("state has {dim} entries, pair has {}", p.dim()),
            ));
        }
        let e = std::slice::from_raw_parts(samples, n_samples).to_vec();
        let pulse = core(Pulse::new(dt_ps, e))?;
        let re = std::slice::from_raw_parts_mut(psi_re, dim);
        let im = std::slice::from_raw_parts_mut(psi_im, dim);
        let psi0 = StateVector(
            re.iter()
                .zip(im.iter())
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        );
        let psi = core(Propagator::for_pair(p).evolve(&pulse, &psi0, Direction::Forward))?;
        for (i, c) in psi.as_slice().iter().enumerate() {
            re[i] = c.re;
            im[i] = c.im;
        }
        Ok(())
    })
}
