//! Multi-target optimal control of two-qubit gates.
//!
//! One field E(t) is optimized for z = 5 simultaneous transitions: the four
//! computational basis states plus their uniform superposition, whose target
//! locks the relative phases of the other four. The update is the
//! stationarity condition of
//!
//! ```text
//! ℑ = Σ_k |⟨ψ_k(T)|φ_fk⟩|² − α₀ ∫ E²/S dt − cross term
//! ```
//!
//! applied with immediate feedback during each forward sweep.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    envelope_unchecked, grid_steps, GridPropagator, Propagator, Pulse, StateVector, Trajectory,
    Workspace, MAX_NORM_DRIFT,
};
use crate::error::{Error, Result};
use crate::pair::PairSystem;
use crate::units;

/// Number of targets for two qubits: 2² basis transitions plus the phase
/// constraint.
pub const N_TARGETS: usize = 5;

/// Default penalty factor in atomic units.
pub const DEFAULT_ALPHA0_AU: f64 = 5e6;

/// Consecutive fidelity decreases that raise a divergence warning.
pub const DIVERGENCE_WINDOW: usize = 20;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    #[serde(rename = "NOT1")]
    Not1,
    #[serde(rename = "NOT2")]
    Not2,
    #[serde(rename = "HAD1")]
    Had1,
    #[serde(rename = "HAD2")]
    Had2,
    #[serde(rename = "CNOT")]
    Cnot,
    /// Every state maps to itself.
    #[serde(rename = "IDENTITY")]
    Identity,
}

impl Gate {
    pub const ALL: [Gate; 6] = [
        Gate::Not1,
        Gate::Not2,
        Gate::Had1,
        Gate::Had2,
        Gate::Cnot,
        Gate::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Not1 => "NOT1",
            Gate::Not2 => "NOT2",
            Gate::Had1 => "HAD1",
            Gate::Had2 => "HAD2",
            Gate::Cnot => "CNOT",
            Gate::Identity => "IDENTITY",
        }
    }

    /// Unitary on |pq⟩ (index 2p + q, p = molecule 1). Column k is the
    /// image of basis state k.
    pub fn matrix(self) -> [[Complex64; 4]; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = [[0.0, 1.0], [1.0, 0.0]];
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let had = [[h, h], [h, -h]];
        let kron = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
            let mut m = [[ZERO; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = Complex64::new(a[i / 2][j / 2] * b[i % 2][j % 2], 0.0);
                }
            }
            m
        };
        match self {
            Gate::Not1 => kron(x, id),
            Gate::Not2 => kron(id, x),
            Gate::Had1 => kron(had, id),
            Gate::Had2 => kron(id, had),
            Gate::Identity => kron(id, id),
            Gate::Cnot => {
                let mut m = [[ZERO; 4]; 4];
                for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                    m[i][j] = Complex64::new(1.0, 0.0);
                }
                m
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Gate::ALL
            .into_iter()
            .find(|g| g.name() == upper)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown gate '{s}' (expected NOT1, NOT2, HAD1, HAD2, CNOT or IDENTITY)"
                ))
            })
    }
}

/// Ordered (initial, target) pairs on the 4-dimensional qubit space.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub gate: Gate,
    pub targets: Vec<(StateVector, StateVector)>,
    /// Targets are given relative to field-free evolution, so the state to
    /// reach at T is e^{−iHT}φ_f rather than φ_f itself.
    pub interaction_picture: bool,
}

impl GateSpec {
    pub fn z(&self) -> usize {
        self.targets.len()
    }

    /// Targets embedded in a pair space with `n1 × n2` levels.
    pub fn embedded(&self, n1: usize, n2: usize) -> Result<Vec<(StateVector, StateVector)>> {
        self.targets
            .iter()
            .map(|(i, f)| Ok((i.embed_qubits(n1, n2)?, f.embed_qubits(n1, n2)?)))
            .collect()
    }
}

pub fn gate_targets(gate: Gate) -> GateSpec {
    let u = gate.matrix();
    let mut targets: Vec<(StateVector, StateVector)> = (0..4)
        .map(|k| {
            (
                StateVector::basis(4, k),
                StateVector((0..4).map(|i| u[i][k]).collect()),
            )
        })
        .collect();
    // The phase-constraint pair, φ = 0: U·½Σ|k⟩ = ½Σ U|k⟩.
    let initial = StateVector(vec![Complex64::new(0.5, 0.0); 4]);
    let target = StateVector(
        (0..4)
            .map(|i| targets.iter().map(|(_, f)| f[i]).sum::<Complex64>() * 0.5)
            .collect(),
    );
    targets.push((initial, target));
    GateSpec {
        gate,
        targets,
        interaction_picture: gate == Gate::Identity,
    }
}

/// (1/z) Σ |τ_k|².
pub fn avg_transition_probability(overlaps: &[Complex64]) -> f64 {
    overlaps.iter().map(|t| t.norm_sqr()).sum::<f64>() / overlaps.len() as f64
}

/// (1/z²) |Σ τ_k|².
pub fn fidelity(overlaps: &[Complex64]) -> f64 {
    let z = overlaps.len() as f64;
    overlaps.iter().sum::<Complex64>().norm_sqr() / (z * z)
}

/// Fidelity maximized over the phase of the last (phase-constraint) target.
pub fn max_phase_fidelity(overlaps: &[Complex64]) -> f64 {
    let z = overlaps.len() as f64;
    match overlaps.split_last() {
        None => 0.0,
        Some((last, rest)) => {
            let s = rest.iter().sum::<Complex64>().norm() + last.norm();
            s * s / (z * z)
        }
    }
}

/// Shape of the starting field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialField {
    pub amplitude_kv_cm: f64,
    /// Linear carrier frequency; `None` uses the mean of the two single-site
    /// |0⟩→|1⟩ frequencies.
    pub frequency_mhz: Option<f64>,
    /// Multiply by S(t). When false the cosine runs at full amplitude and
    /// only the two end samples are zeroed.
    pub enveloped: bool,
    /// Amplitude of seeded uniform noise added under the envelope.
    pub noise_kv_cm: f64,
}

impl Default for InitialField {
    fn default() -> Self {
        InitialField {
            amplitude_kv_cm: 0.1,
            frequency_mhz: None,
            enveloped: true,
            noise_kv_cm: 0.0,
        }
    }
}

/// Summation order over targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Everything sequential in target order: bit-reproducible.
    Strict,
    /// Independent propagations run on the thread pool.
    #[default]
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Penalty factor α₀ in internal units, rad/(ps·(kV/cm)²). The default
    /// is 5×10⁶ atomic units.
    pub alpha0: f64,
    pub max_iter: usize,
    pub fidelity_threshold: f64,
    pub fidelity_delta_tol: f64,
    pub dt_ps: f64,
    /// Pulse length; `None` uses [`default_duration`].
    pub duration_ns: Option<f64>,
    pub initial_field: InitialField,
    /// Relaxation weight of the update: E ← (1 − s)·E + s·E_update.
    pub update_scale: f64,
    pub reduction: Reduction,
    /// Seed of the initial-guess noise; set from the run configuration.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            alpha0: units::penalty_from_atomic(DEFAULT_ALPHA0_AU),
            max_iter: 600,
            fidelity_threshold: 0.9,
            fidelity_delta_tol: 1e-5,
            dt_ps: 0.25,
            duration_ns: None,
            initial_field: InitialField::default(),
            update_scale: 1.0,
            reduction: Reduction::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Config(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fidelity_threshold) {
            return Err(Error::Config(format!(
                "fidelity_threshold must lie in [0, 1], got {}",
                self.fidelity_threshold
            )));
        }
        if !(self.fidelity_delta_tol >= 0.0) {
            return Err(Error::Config(
                "fidelity_delta_tol must be non-negative".into(),
            ));
        }
        if !(self.dt_ps > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {} ps",
                self.dt_ps
            )));
        }
        if let Some(t) = self.duration_ns {
            grid_steps(units::nanoseconds(t), self.dt_ps)?;
        }
        if !(0.0..=1.0).contains(&self.update_scale) {
            return Err(Error::Config(format!(
                "update_scale must lie in [0, 1], got {}",
                self.update_scale
            )));
        }
        let f = &self.initial_field;
        if !f.amplitude_kv_cm.is_finite() || !(f.noise_kv_cm >= 0.0) {
            return Err(Error::Config(
                "initial field amplitude and noise must be finite, noise ≥ 0".into(),
            ));
        }
        if matches!(f.frequency_mhz, Some(nu) if !(nu >= 0.0)) {
            return Err(Error::Config(
                "initial field frequency must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Pulse length in ps for a pair.
    pub fn duration_ps(&self, pair: &PairSystem) -> Result<f64> {
        match self.duration_ns {
            Some(t) => Ok(units::nanoseconds(t)),
            None => {
                let tau = default_duration(pair.delta_omega_approx())?;
                Ok((tau / self.dt_ps).round().max(1.0) * self.dt_ps)
            }
        }
    }
}

/// τ = 10ħ/Δω in ps, with Δω an internal angular frequency.
pub fn default_duration(delta_omega: f64) -> Result<f64> {
    if delta_omega == 0.0 {
        return Err(Error::UnresolvableSites);
    }
    if !(delta_omega > 0.0) {
        return Err(Error::Domain(format!(
            "frequency shift must be positive, got {delta_omega}"
        )));
    }
    Ok(10.0 / delta_omega)
}

/// Starting field for a pair: S(t)·A·cos(ωt) plus optional seeded noise.
pub fn initial_guess(pair: &PairSystem, cfg: &OptimizerConfig, duration_ps: f64) -> Result<Pulse> {
    let f = &cfg.initial_field;
    let omega = match f.frequency_mhz {
        Some(nu) => units::megahertz(nu),
        None => 0.5 * (pair.site1.gap_over_b() + pair.site2.gap_over_b()) * pair.b(),
    };
    let n = grid_steps(duration_ps, cfg.dt_ps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 * cfg.dt_ps;
            let s = envelope_unchecked(t, duration_ps);
            let carrier = f.amplitude_kv_cm * (omega * t).cos();
            let noise = if f.noise_kv_cm > 0.0 {
                f.noise_kv_cm * rng.random_range(-1.0..1.0) * s
            } else {
                0.0
            };
            if f.enveloped {
                carrier * s + noise
            } else {
                carrier + noise
            }
        })
        .collect();
    samples[0] = 0.0;
    samples[n] = 0.0;
    Pulse::new(cfg.dt_ps, samples)
}

/// α₀ ∫ E²/S dt by the trapezoid rule; the integrand is 0 where S = 0.
pub fn penalty(pulse: &Pulse, alpha0: f64) -> Result<f64> {
    let t_end = pulse.duration_ps();
    let e = pulse.samples();
    let n = pulse.steps();
    let mut sum = 0.0;
    for (i, &ei) in e.iter().enumerate() {
        let s = envelope_unchecked(pulse.time_ps(i), t_end);
        let term = if i == 0 || i == n || s == 0.0 {
            if ei != 0.0 {
                return Err(Error::Contract(format!(
                    "field {ei} kV/cm at grid point {i} where S = 0"
                )));
            }
            0.0
        } else {
            ei * ei / s
        };
        sum += if i == 0 || i == n { 0.5 * term } else { term };
    }
    Ok(alpha0 * sum * pulse.dt_ps())
}

/// Eq. 9 field for one time point from lab-frame forward states `psi_i` and
/// backward states `psi_f`, `t` and `duration` in ps.
pub fn field_update(
    psi_i: &[StateVector],
    psi_f: &[StateVector],
    m: &nalgebra::DMatrix<f64>,
    cfg: &OptimizerConfig,
    t: f64,
    duration: f64,
) -> f64 {
    let s = envelope_unchecked(t, duration);
    if s == 0.0 || t <= 0.0 || t >= duration {
        return 0.0;
    }
    let z = psi_i.len() as f64;
    let mut acc = 0.0;
    for (a, b) in psi_i.iter().zip(psi_f) {
        let n = a.dim();
        let overlap = a.inner(b);
        let mut mel = ZERO;
        for r in 0..n {
            let mut row = ZERO;
            for c in 0..n {
                row += a[c] * m[(r, c)];
            }
            mel += b[r].conj() * row;
        }
        acc += (overlap * mel).im;
    }
    -cfg.update_scale * z * s / cfg.alpha0 * acc
}

/// The three parts of ℑ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// Σ|τ_k|².
    pub overlap: f64,
    /// α₀∫E²/S dt.
    pub penalty: f64,
    /// 2 Re Σ_k τ_k ∫⟨ψ_fk|(i(H − EM) + ∂_t)|ψ_ik⟩ dt, evaluated with a
    /// fourth-order finite-difference derivative.
    pub cross: f64,
}

impl ObjectiveTerms {
    pub fn value(&self) -> f64 {
        self.overlap - self.penalty - self.cross
    }
}

/// ℑ from stored laboratory trajectories. Both sets must hold every grid
/// point of `pulse`; the final state of each backward trajectory is the
/// target φ_fk.
pub fn objective(
    prop: &Propagator,
    trajs_i: &[Trajectory],
    trajs_f: &[Trajectory],
    pulse: &Pulse,
    cfg: &OptimizerConfig,
) -> Result<ObjectiveTerms> {
    let n = pulse.steps();
    if trajs_i.len() != trajs_f.len() {
        return Err(Error::Contract(
            "forward and backward trajectory counts differ".into(),
        ));
    }
    for t in trajs_i.iter().chain(trajs_f) {
        if t.len() != n + 1 || t.dim() != prop.dim() {
            return Err(Error::Contract(
                "trajectories must store every grid point of the pulse".into(),
            ));
        }
    }
    let grid = prop.on_grid(pulse.dt_ps(), n);
    let to_frame = |t: &Trajectory| -> Vec<Complex64> {
        (0..=n).flat_map(|k| grid.to_frame(k, t.state(k))).collect()
    };
    let fwd: Vec<Vec<Complex64>> = trajs_i.iter().map(to_frame).collect();
    let bwd: Vec<Vec<Complex64>> = trajs_f.iter().map(to_frame).collect();
    let overlaps = final_overlaps(&fwd, &bwd, prop.dim(), n);
    Ok(ObjectiveTerms {
        overlap: overlaps.iter().map(|t| t.norm_sqr()).sum(),
        penalty: penalty(pulse, cfg.alpha0)?,
        cross: cross_term(&grid, pulse.samples(), &fwd, &bwd, &overlaps),
    })
}

fn final_overlaps(
    fwd: &[Vec<Complex64>],
    bwd: &[Vec<Complex64>],
    dim: usize,
    n: usize,
) -> Vec<Complex64> {
    fwd.iter()
        .zip(bwd)
        .map(|(a, b)| inner(&a[n * dim..(n + 1) * dim], &b[n * dim..(n + 1) * dim]))
        .collect()
}

#[inline]
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cross_term(
    grid: &GridPropagator<'_>,
    e: &[f64],
    fwd: &[Vec<Complex64>],
    bwd: &[Vec<Complex64>],
    overlaps: &[Complex64],
) -> f64 {
    let dim = grid.dim();
    let n = grid.steps();
    if n < 4 {
        return 0.0;
    }
    let dt = grid.dt_ps();
    let mut ws = Workspace::new(dim);
    let mut f = vec![ZERO; dim];
    let mut total = 0.0;
    for ((psi, chi), tau) in fwd.iter().zip(bwd).zip(overlaps) {
        let at = |k: usize| &psi[k * dim..(k + 1) * dim];
        let mut integral = ZERO;
        for k in 2..=n - 2 {
            grid.derivative(k, e[k], at(k), &mut f, &mut ws);
            let c = &chi[k * dim..(k + 1) * dim];
            let mut acc = ZERO;
            for i in 0..dim {
                let d = (at(k - 2)[i] - at(k + 2)[i] + (at(k + 1)[i] - at(k - 1)[i]) * 8.0)
                    / (12.0 * dt);
                acc += c[i].conj() * (d - f[i]);
            }
            integral += acc;
        }
        total += 2.0 * (tau * integral * dt).re;
    }
    total
}

/// One optimizer iteration; iteration 0 is the initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub fidelity: f64,
    pub avg_prob: f64,
    pub objective: f64,
    pub max_field_kv_cm: f64,
    pub cross_term: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub gate: Gate,
    /// Best-fidelity iterate.
    pub pulse: Pulse,
    pub fidelity: f64,
    pub avg_probability: f64,
    pub objective_value: f64,
    pub per_target_overlaps: Vec<Complex64>,
    pub max_phase_fidelity: f64,
    /// Iteration that produced `pulse`.
    pub best_iter: usize,
    pub initial_fidelity: f64,
    pub trace: Vec<TraceRow>,
    pub iterations_used: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

struct Evaluated {
    overlaps: Vec<Complex64>,
    row: TraceRow,
}

struct Engine<'a> {
    grid: GridPropagator<'a>,
    dim: usize,
    n: usize,
    initial: Vec<Vec<Complex64>>,
    targets: Vec<Vec<Complex64>>,
    envelope: Vec<f64>,
    scale: f64,
    coef: f64,
    strict: bool,
}

impl Engine<'_> {
    fn map_targets<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        let z = self.initial.len();
        if self.strict {
            (0..z).map(f).collect()
        } else {
            (0..z).into_par_iter().map(f).collect()
        }
    }

    /// Frame states of every target at every grid point, stored as
    /// `(n + 1) * dim` rows in time order.
    fn backward(&self, e: &[f64]) -> Vec<Vec<Complex64>> {
        let (dim, n) = (self.dim, self.n);
        self.map_targets(|k| {
            let mut out = vec![ZERO; (n + 1) * dim];
            let mut psi = self.targets[k].clone();
            let mut ws = Workspace::new(dim);
            out[n * dim..].copy_from_slice(&psi);
            for j in (1..=n).rev() {
                self.grid
                    .step_backward(&mut psi, j, e[j], e[j - 1], &mut ws);
                out[(j - 1) * dim..j * dim].copy_from_slice(&psi);
            }
            out
        })
    }

    fn forward(&self, e: &[f64]) -> Vec<Vec<Complex64>> {
        let (dim, n) = (self.dim, self.n);
        self.map_targets(|k| {
            let mut out = vec![ZERO; (n + 1) * dim];
            let mut psi = self.initial[k].clone();
            let mut ws = Workspace::new(dim);
            out[..dim].copy_from_slice(&psi);
            for j in 0..n {
                self.grid.step_forward(&mut psi, j, e[j], e[j + 1], &mut ws);
                out[(j + 1) * dim..(j + 2) * dim].copy_from_slice(&psi);
            }
            out
        })
    }

    /// Σ_k Im{⟨ψ_k|χ_k⟩⟨χ_k|M|ψ_k⟩} at grid point `j`, fixed order.
    fn feedback(&self, j: usize, psi: &[Vec<Complex64>], chi: &[Vec<Complex64>]) -> f64 {
        let dim = self.dim;
        let mut acc = 0.0;
        for (p, c) in psi.iter().zip(chi) {
            let c = &c[j * dim..(j + 1) * dim];
            acc += (inner(p, c) * self.grid.drive_element(j, c, p)).im;
        }
        acc
    }

    fn field_at(&self, j: usize, old: f64, psi: &[Vec<Complex64>], chi: &[Vec<Complex64>]) -> f64 {
        if j == 0 || j == self.n {
            return 0.0;
        }
        let update = -self.scale * self.coef * self.envelope[j] * self.feedback(j, psi, chi);
        (1.0 - self.scale) * old + update
    }

    /// Forward sweep with immediate feedback. Each step first advances the
    /// states with the field extrapolated to t_{j+1}, evaluates the update
    /// there, then redoes the step with the updated end value, so the
    /// emitted pulse reproduces the sweep exactly.
    fn sweep(&self, old: &[f64], chi: &[Vec<Complex64>]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let (dim, n) = (self.dim, self.n);
        let z = self.initial.len();
        let mut e = vec![0.0; n + 1];
        let mut psi = self.initial.clone();
        let mut trial = psi.clone();
        let mut store: Vec<Vec<Complex64>> = psi
            .iter()
            .map(|p| {
                let mut v = vec![ZERO; (n + 1) * dim];
                v[..dim].copy_from_slice(p);
                v
            })
            .collect();
        let mut ws = Workspace::new(dim);
        for j in 0..n {
            let e_j = e[j];
            let e_next = if j + 1 == n {
                0.0
            } else {
                let predicted = if j == 0 { old[1] } else { 2.0 * e_j - e[j - 1] };
                for k in 0..z {
                    trial[k].copy_from_slice(&psi[k]);
                    self.grid
                        .step_forward(&mut trial[k], j, e_j, predicted, &mut ws);
                }
                self.field_at(j + 1, old[j + 1], &trial, chi)
            };
            for k in 0..z {
                self.grid.step_forward(&mut psi[k], j, e_j, e_next, &mut ws);
                store[k][(j + 1) * dim..(j + 2) * dim].copy_from_slice(&psi[k]);
            }
            e[j + 1] = e_next;
        }
        (e, store)
    }

    fn evaluate(
        &self,
        iter: usize,
        e: &[f64],
        fwd: &[Vec<Complex64>],
        chi: &[Vec<Complex64>],
        alpha0: f64,
        dt: f64,
    ) -> Result<Evaluated> {
        if let Some(j) = e.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite field at grid point {j} in iteration {iter}"
            )));
        }
        let overlaps: Vec<Complex64> = fwd
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| inner(&p[self.n * self.dim..], t))
            .collect();
        for p in fwd {
            let norm = p[self.n * self.dim..]
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite state in iteration {iter}"
                )));
            }
            if (norm - 1.0).abs() > MAX_NORM_DRIFT {
                return Err(Error::StepSize {
                    drift: (norm - 1.0).abs(),
                    dt,
                });
            }
        }
        let pulse = Pulse::new(dt, e.to_vec())?;
        let pen = penalty(&pulse, alpha0)?;
        let cross = cross_term(&self.grid, e, fwd, chi, &overlaps);
        let overlap: f64 = overlaps.iter().map(|t| t.norm_sqr()).sum();
        let row = TraceRow {
            iter,
            fidelity: fidelity(&overlaps),
            avg_prob: avg_transition_probability(&overlaps),
            objective: overlap - pen - cross,
            max_field_kv_cm: pulse.max_abs(),
            cross_term: cross,
        };
        Ok(Evaluated { overlaps, row })
    }
}

pub fn optimize(
    pair: &PairSystem,
    gate: &GateSpec,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    optimize_with(pair, gate, cfg, |_| {})
}

/// [`optimize`] with a callback invoked after every iteration.
pub fn optimize_with(
    pair: &PairSystem,
    gate: &GateSpec,
    cfg: &OptimizerConfig,
    mut progress: impl FnMut(&TraceRow),
) -> Result<OptimizationResult> {
    cfg.validate()?;
    if pair.delta_omega_approx() == 0.0 && gate.gate != Gate::Identity {
        return Err(Error::UnresolvableSites);
    }
    let duration = cfg.duration_ps(pair)?;
    let guess = initial_guess(pair, cfg, duration)?;
    optimize_from(pair, gate, cfg, guess, &mut progress)
}

/// Runs the loop from an explicit starting pulse.
pub fn optimize_from(
    pair: &PairSystem,
    gate: &GateSpec,
    cfg: &OptimizerConfig,
    guess: Pulse,
    progress: &mut dyn FnMut(&TraceRow),
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let (n1, n2) = pair.n_levels();
    let targets = gate.embedded(n1, n2)?;
    let prop = Propagator::for_pair(pair);
    let n = guess.steps();
    let dt = guess.dt_ps();
    let duration = guess.duration_ps();
    let grid = prop.on_grid(dt, n);
    let engine = Engine {
        dim: prop.dim(),
        n,
        initial: targets
            .iter()
            .map(|(i, _)| grid.to_frame(0, &i.0))
            .collect(),
        targets: targets
            .iter()
            .map(|(_, f)| grid.to_frame(if gate.interaction_picture { 0 } else { n }, &f.0))
            .collect(),
        envelope: (0..=n)
            .map(|j| envelope_unchecked(j as f64 * dt, duration))
            .collect(),
        scale: cfg.update_scale,
        coef: targets.len() as f64 / cfg.alpha0,
        strict: cfg.reduction == Reduction::Strict,
        grid,
    };

    let mut field = guess.samples().to_vec();
    let fwd = engine.forward(&field);
    let chi = engine.backward(&field);
    let first = engine.evaluate(0, &field, &fwd, &chi, cfg.alpha0, dt)?;
    progress(&first.row);
    let initial_fidelity = first.row.fidelity;
    let mut trace = vec![first.row];
    let mut best = (first, field.clone());
    let mut prev_f = initial_fidelity;
    let mut converged = false;
    let mut decreasing = 0;
    let mut warnings = Vec::new();
    let mut iterations_used = 0;

    for iter in 1..=cfg.max_iter {
        let chi = engine.backward(&field);
        let (new_field, fwd) = engine.sweep(&field, &chi);
        let ev = engine.evaluate(iter, &new_field, &fwd, &chi, cfg.alpha0, dt)?;
        field = new_field;
        iterations_used = iter;
        progress(&ev.row);
        trace.push(ev.row);
        let f = ev.row.fidelity;
        decreasing = if f < prev_f { decreasing + 1 } else { 0 };
        if decreasing == DIVERGENCE_WINDOW {
            warnings.push(format!("fidelity decreased for {DIVERGENCE_WINDOW} consecutive iterations ending at {iter}"));
        }
        let delta = (f - prev_f).abs();
        prev_f = f;
        if f > best.0.row.fidelity {
            best = (ev, field.clone());
        }
        if f > cfg.fidelity_threshold && delta < cfg.fidelity_delta_tol {
            converged = true;
            break;
        }
    }

    let (ev, samples) = best;
    Ok(OptimizationResult {
        gate: gate.gate,
        pulse: Pulse::new(dt, samples)?,
        fidelity: ev.row.fidelity,
        avg_probability: ev.row.avg_prob,
        objective_value: ev.row.objective,
        max_phase_fidelity: max_phase_fidelity(&ev.overlaps),
        per_target_overlaps: ev.overlaps,
        best_iter: ev.row.iter,
        initial_fidelity,
        trace,
        iterations_used,
        converged,
        warnings,
    })
}
