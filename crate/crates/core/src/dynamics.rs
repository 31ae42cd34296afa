//! Sampled laser pulses and fourth-order Runge–Kutta propagation of
//! i ∂ψ/∂t = [H − E(t)·M] ψ (ħ = 1, internal units).
//!
//! The field is known on the uniform grid t_n = n·dt; the half-step values
//! needed by RK4 are linear interpolations of the neighbouring samples.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pair::PairSystem;
use crate::units;

/// Norm drift above which a propagation is rejected.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

/// Laser envelope S(t) = sin²(πt/T).
pub fn envelope(t: f64, duration: f64) -> Result<f64> {
    if !(0.0..=duration).contains(&t) {
        return Err(Error::Contract(format!(
            "envelope evaluated at t = {t} outside [0, {duration}]"
        )));
    }
    Ok(envelope_unchecked(t, duration))
}

#[inline]
pub(crate) fn envelope_unchecked(t: f64, duration: f64) -> f64 {
    let s = (PI * t / duration).sin();
    s * s
}

/// Number of steps for a duration and time step, both in ps.
pub fn grid_steps(duration_ps: f64, dt_ps: f64) -> Result<usize> {
    if !(dt_ps > 0.0) || !(duration_ps > 0.0) {
        return Err(Error::Config(format!(
            "duration ({duration_ps} ps) and dt ({dt_ps} ps) must be positive"
        )));
    }
    let n = (duration_ps / dt_ps).round();
    if (n * dt_ps - duration_ps).abs() >= dt_ps * 1e-9 || n < 1.0 {
        return Err(Error::Config(format!(
            "duration {duration_ps} ps is not an integral number of {dt_ps} ps steps"
        )));
    }
    Ok(n as usize)
}

/// Uniformly sampled field E_n = E(n·dt), n = 0..=N, in kV/cm.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    dt_ps: f64,
    samples: Vec<f64>,
}

impl Pulse {
    /// Wraps samples on a grid of spacing `dt_ps`; the first and last sample
    /// must vanish.
    pub fn new(dt_ps: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt_ps > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt_ps}")));
        }
        if samples.len() < 2 {
            return Err(Error::Config("a pulse needs at least two samples".into()));
        }
        if samples[0] != 0.0 || samples[samples.len() - 1] != 0.0 {
            return Err(Error::Contract(
                "pulse must vanish at t = 0 and t = T".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|e| !e.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite field sample at index {i}"
            )));
        }
        Ok(Pulse { dt_ps, samples })
    }

    pub fn zeros(duration_ps: f64, dt_ps: f64) -> Result<Self> {
        let n = grid_steps(duration_ps, dt_ps)?;
        Ok(Pulse {
            dt_ps,
            samples: vec![0.0; n + 1],
        })
    }

    /// Samples `f(t)·S(t)` on the grid, `t` in ps.
    pub fn enveloped(duration_ps: f64, dt_ps: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = grid_steps(duration_ps, dt_ps)?;
        let duration = n as f64 * dt_ps;
        let mut samples: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 * dt_ps;
                f(t) * envelope_unchecked(t, duration)
            })
            .collect();
        samples[0] = 0.0;
        samples[n] = 0.0;
        Pulse::new(dt_ps, samples)
    }

    /// Resonant cosine E₀·S(t)·cos(ωt) with ω an internal angular frequency.
    pub fn cosine(duration_ps: f64, dt_ps: f64, amplitude_kv_cm: f64, omega: f64) -> Result<Self> {
        Pulse::enveloped(duration_ps, dt_ps, |t| amplitude_kv_cm * (omega * t).cos())
    }

    pub fn dt_ps(&self) -> f64 {
        self.dt_ps
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn duration_ps(&self) -> f64 {
        self.steps() as f64 * self.dt_ps
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn time_ps(&self, n: usize) -> f64 {
        n as f64 * self.dt_ps
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// ∫ E² dt by the trapezoid rule, in (kV/cm)²·ps.
    pub fn fluence(&self) -> f64 {
        let n = self.samples.len();
        let inner: f64 = self.samples[1..n - 1].iter().map(|e| e * e).sum();
        self.dt_ps * (inner + 0.5 * (self.samples[0].powi(2) + self.samples[n - 1].powi(2)))
    }

    /// Resamples onto a grid `factor` times finer by linear interpolation,
    /// which leaves the piecewise-linear field unchanged.
    pub fn refined(&self, factor: usize) -> Pulse {
        let factor = factor.max(1);
        let mut samples = Vec::with_capacity(self.steps() * factor + 1);
        for w in self.samples.windows(2) {
            for j in 0..factor {
                let a = j as f64 / factor as f64;
                samples.push(w[0] * (1.0 - a) + w[1] * a);
            }
        }
        samples.push(self.samples[self.samples.len() - 1]);
        Pulse {
            dt_ps: self.dt_ps / factor as f64,
            samples,
        }
    }

    pub fn scaled(&self, k: f64) -> Pulse {
        Pulse {
            dt_ps: self.dt_ps,
            samples: self.samples.iter().map(|e| e * k).collect(),
        }
    }
}

/// State amplitudes over the product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<Complex64>);

impl StateVector {
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[index] = Complex64::new(1.0, 0.0);
        StateVector(v)
    }

    pub fn from_real(v: &[f64]) -> Self {
        StateVector(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Contract(
                "cannot normalize a zero or non-finite state".into(),
            ));
        }
        Ok(StateVector(self.0.iter().map(|c| c / n).collect()))
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.0, &other.0)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Embeds a state given on the 2×2 qubit basis into a pair with
    /// `(n1, n2)` levels per site.
    pub fn embed_qubits(&self, n1: usize, n2: usize) -> Result<Self> {
        if self.dim() != 4 {
            return Err(Error::Contract(format!(
                "expected a 4-component qubit state, got {}",
                self.dim()
            )));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n1 * n2];
        for p in 0..2 {
            for q in 0..2 {
                v[p * n2 + q] = self.0[2 * p + q];
            }
        }
        Ok(StateVector(v))
    }
}

impl Index<usize> for StateVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

#[inline]
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From t = 0 to T; the supplied state is ψ(0).
    Forward,
    /// From t = T to 0; the supplied state is ψ(T).
    Backward,
}

/// States on the time grid, ordered by increasing time regardless of the
/// integration direction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    dt_ps: f64,
    /// Grid indices of the stored states, ascending.
    grid: Vec<usize>,
    amplitudes: Vec<Complex64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Grid index of the `k`-th stored state.
    pub fn grid_index(&self, k: usize) -> usize {
        self.grid[k]
    }

    pub fn time_ps(&self, k: usize) -> f64 {
        self.grid[k] as f64 * self.dt_ps
    }

    pub fn state(&self, k: usize) -> &[Complex64] {
        &self.amplitudes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn first(&self) -> StateVector {
        StateVector(self.state(0).to_vec())
    }

    pub fn last(&self) -> StateVector {
        StateVector(self.state(self.len() - 1).to_vec())
    }
}

/// Coordinates in which the Runge–Kutta integration runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Interaction picture of the static pair Hamiltonian: the field-free
    /// evolution e^{−iHt} is applied exactly through the eigen-decomposition
    /// of H and RK4 integrates only the laser coupling.
    #[default]
    Interaction,
    /// RK4 directly on the laboratory-frame equation.
    Lab,
}

/// Time-independent part of the propagation problem.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    frame: Frame,
    /// H, row-major, internal units.
    h: Vec<f64>,
    /// M = μ(cosθ₁ + cosθ₂), row-major.
    m: Vec<f64>,
    /// Eigenvalues of H.
    eigvals: Vec<f64>,
    /// Eigenvectors of H as columns, row-major storage.
    eigvecs: Vec<f64>,
    /// Vᵀ M V
    m_eig: Vec<f64>,
}

/// Reusable RK4 work buffers.
#[derive(Debug, Clone)]
pub struct Workspace {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    rot: Vec<Complex64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Workspace {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            rot: z,
        }
    }
}

/// The laser coupling μ(cosθ₁ + cosθ₂) of a pair, internal units.
pub fn drive_operator(pair: &PairSystem) -> DMatrix<f64> {
    pair.drive_operator()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>, m: &DMatrix<f64>, frame: Frame) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || m.nrows() != n || m.ncols() != n {
            return Err(Error::Contract(
                "H and M must be square and of equal size".into(),
            ));
        }
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let v = eig.eigenvectors;
        let m_eig = v.transpose() * m * &v;
        Ok(Propagator {
            dim: n,
            frame,
            h: row_major(h),
            m: row_major(m),
            eigvals: eig.eigenvalues.iter().copied().collect(),
            eigvecs: row_major(&v),
            m_eig: row_major(&m_eig),
        })
    }

    pub fn for_pair(pair: &PairSystem) -> Self {
        Self::for_pair_in(pair, Frame::Interaction)
    }

    pub fn for_pair_in(pair: &PairSystem, frame: Frame) -> Self {
        Propagator::new(&pair.hamiltonian(), &pair.drive_operator(), frame)
            .expect("pair matrices are square and equally sized")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Binds the propagator to a time grid of `steps` intervals of `dt_ps`.
    pub fn on_grid(&self, dt_ps: f64, steps: usize) -> GridPropagator<'_> {
        let phases = match self.frame {
            Frame::Lab => Vec::new(),
            Frame::Interaction => {
                let half = 0.5 * dt_ps;
                let mut p = Vec::with_capacity((2 * steps + 1) * self.dim);
                for j in 0..=2 * steps {
                    let t = j as f64 * half;
                    p.extend(
                        self.eigvals
                            .iter()
                            .map(|&l| Complex64::from_polar(1.0, -l * t)),
                    );
                }
                p
            }
        };
        GridPropagator {
            prop: self,
            dt_ps,
            steps,
            phases,
        }
    }

    fn check_initial(&self, psi0: &StateVector) -> Result<()> {
        if psi0.dim() != self.dim {
            return Err(Error::Contract(format!(
                "state has {} components, system has {}",
                psi0.dim(),
                self.dim
            )));
        }
        if (psi0.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Contract(format!(
                "initial state not normalized (norm {})",
                psi0.norm()
            )));
        }
        Ok(())
    }

    /// Integrates over the whole pulse, storing every `stride`-th grid state
    /// plus both end points, in the laboratory frame.
    pub fn propagate(
        &self,
        pulse: &Pulse,
        psi0: &StateVector,
        direction: Direction,
        stride: usize,
    ) -> Result<Trajectory> {
        self.check_initial(psi0)?;
        let stride = stride.max(1);
        let n_steps = pulse.steps();
        let grid = self.on_grid(pulse.dt_ps(), n_steps);
        let e = pulse.samples();
        let dim = self.dim;
        let mut ws = Workspace::new(dim);
        let mut lab = vec![Complex64::new(0.0, 0.0); dim];

        let stored = |k: usize| k.is_multiple_of(stride) || k == n_steps;
        let mut indices = Vec::with_capacity(n_steps / stride + 2);
        let mut amplitudes = Vec::with_capacity((n_steps / stride + 2) * dim);

        let mut psi;
        match direction {
            Direction::Forward => {
                psi = grid.to_frame(0, &psi0.0);
                indices.push(0);
                amplitudes.extend_from_slice(&psi0.0);
                for k in 0..n_steps {
                    grid.step_forward(&mut psi, k, e[k], e[k + 1], &mut ws);
                    if stored(k + 1) {
                        grid.to_lab(k + 1, &psi, &mut lab);
                        indices.push(k + 1);
                        amplitudes.extend_from_slice(&lab);
                    }
                }
            }
            Direction::Backward => {
                psi = grid.to_frame(n_steps, &psi0.0);
                indices.push(n_steps);
                amplitudes.extend_from_slice(&psi0.0);
                for k in (0..n_steps).rev() {
                    grid.step_backward(&mut psi, k + 1, e[k + 1], e[k], &mut ws);
                    if stored(k) {
                        grid.to_lab(k, &psi, &mut lab);
                        indices.push(k);
                        amplitudes.extend_from_slice(&lab);
                    }
                }
                indices.reverse();
                let rows: Vec<&[Complex64]> = amplitudes.chunks(dim).rev().collect();
                amplitudes = rows.concat();
            }
        }
        check_drift(&psi, pulse.dt_ps())?;
        Ok(Trajectory {
            dim,
            dt_ps: pulse.dt_ps(),
            grid: indices,
            amplitudes,
        })
    }

    /// Final state only, without storing the trajectory.
    pub fn evolve(
        &self,
        pulse: &Pulse,
        psi0: &StateVector,
        direction: Direction,
    ) -> Result<StateVector> {
        self.check_initial(psi0)?;
        let n = pulse.steps();
        let grid = self.on_grid(pulse.dt_ps(), n);
        let e = pulse.samples();
        let mut ws = Workspace::new(self.dim);
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        let psi = match direction {
            Direction::Forward => {
                let mut psi = grid.to_frame(0, &psi0.0);
                for k in 0..n {
                    grid.step_forward(&mut psi, k, e[k], e[k + 1], &mut ws);
                }
                grid.to_lab(n, &psi, &mut out);
                psi
            }
            Direction::Backward => {
                let mut psi = grid.to_frame(n, &psi0.0);
                for k in (1..=n).rev() {
                    grid.step_backward(&mut psi, k, e[k], e[k - 1], &mut ws);
                }
                grid.to_lab(0, &psi, &mut out);
                psi
            }
        };
        check_drift(&psi, pulse.dt_ps())?;
        Ok(StateVector(out))
    }
}

fn check_drift(psi: &[Complex64], dt: f64) -> Result<()> {
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::Numeric(
            "state became non-finite during propagation".into(),
        ));
    }
    let drift = (norm - 1.0).abs();
    if drift > MAX_NORM_DRIFT {
        return Err(Error::StepSize { drift, dt });
    }
    Ok(())
}

/// A propagator bound to a uniform time grid. States handled by its
/// stepping methods are in frame coordinates; convert with
/// [`GridPropagator::to_frame`] and [`GridPropagator::to_lab`].
#[derive(Debug, Clone)]
pub struct GridPropagator<'a> {
    prop: &'a Propagator,
    dt_ps: f64,
    steps: usize,
    /// e^{−iλ_l t_j} at half-grid times t_j = j·dt/2, row per j.
    phases: Vec<Complex64>,
}

impl GridPropagator<'_> {
    pub fn dim(&self) -> usize {
        self.prop.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt_ps(&self) -> f64 {
        self.dt_ps
    }

    #[inline]
    fn phase_row(&self, half_index: usize) -> &[Complex64] {
        let n = self.prop.dim;
        &self.phases[half_index * n..(half_index + 1) * n]
    }

    /// Laboratory state at grid point `k` to frame coordinates.
    pub fn to_frame(&self, k: usize, lab: &[Complex64]) -> Vec<Complex64> {
        let n = self.prop.dim;
        match self.prop.frame {
            Frame::Lab => lab.to_vec(),
            Frame::Interaction => {
                let p = self.phase_row(2 * k);
                (0..n)
                    .map(|l| {
                        // c_l = Σ_i V_il ψ_i, φ_l = c_l / p_l
                        let mut c = Complex64::new(0.0, 0.0);
                        for i in 0..n {
                            c += lab[i] * self.prop.eigvecs[i * n + l];
                        }
                        c * p[l].conj()
                    })
                    .collect()
            }
        }
    }

    /// Frame coordinates at grid point `k` to the laboratory state.
    pub fn to_lab(&self, k: usize, frame: &[Complex64], out: &mut [Complex64]) {
        let n = self.prop.dim;
        match self.prop.frame {
            Frame::Lab => out.copy_from_slice(frame),
            Frame::Interaction => {
                let p = self.phase_row(2 * k);
                for i in 0..n {
                    let row = &self.prop.eigvecs[i * n..(i + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..n {
                        acc += frame[l] * p[l] * row[l];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    /// ⟨a|M|b⟩ for two frame states at grid point `k`.
    #[inline]
    pub fn drive_element(&self, k: usize, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let n = self.prop.dim;
        match self.prop.frame {
            Frame::Lab => bilinear(&self.prop.m, n, a, b),
            Frame::Interaction => {
                let p = self.phase_row(2 * k);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let row = &self.prop.m_eig[i * n..(i + 1) * n];
                    let mut mb = Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        mb += b[j] * p[j] * row[j];
                    }
                    acc += (a[i] * p[i]).conj() * mb;
                }
                acc
            }
        }
    }

    /// out = dψ/dt in frame coordinates at half-grid index `j` for field `e`.
    #[inline]
    fn rhs(
        &self,
        j: usize,
        e: f64,
        psi: &[Complex64],
        out: &mut [Complex64],
        rot: &mut [Complex64],
    ) {
        let n = self.prop.dim;
        match self.prop.frame {
            Frame::Lab => {
                for i in 0..n {
                    let h = &self.prop.h[i * n..(i + 1) * n];
                    let m = &self.prop.m[i * n..(i + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..n {
                        acc += psi[c] * (h[c] - e * m[c]);
                    }
                    // −i·acc
                    out[i] = Complex64::new(acc.im, -acc.re);
                }
            }
            Frame::Interaction => {
                // φ' = i e P† M_eig P φ
                let p = self.phase_row(j);
                for l in 0..n {
                    rot[l] = psi[l] * p[l];
                }
                for i in 0..n {
                    let row = &self.prop.m_eig[i * n..(i + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..n {
                        acc += rot[c] * row[c];
                    }
                    let v = p[i].conj() * acc * e;
                    out[i] = Complex64::new(-v.im, v.re);
                }
            }
        }
    }

    #[inline]
    fn rk4(
        &self,
        psi: &mut [Complex64],
        j0: usize,
        jm: usize,
        j1: usize,
        e0: f64,
        e1: f64,
        h: f64,
        ws: &mut Workspace,
    ) {
        let n = self.prop.dim;
        let em = 0.5 * (e0 + e1);
        let Workspace { k, tmp, rot } = ws;
        let [k1, k2, k3, k4] = k;
        self.rhs(j0, e0, psi, k1, rot);
        for i in 0..n {
            tmp[i] = psi[i] + k1[i] * (0.5 * h);
        }
        self.rhs(jm, em, tmp, k2, rot);
        for i in 0..n {
            tmp[i] = psi[i] + k2[i] * (0.5 * h);
        }
        self.rhs(jm, em, tmp, k3, rot);
        for i in 0..n {
            tmp[i] = psi[i] + k3[i] * h;
        }
        self.rhs(j1, e1, tmp, k4, rot);
        let h6 = h / 6.0;
        for i in 0..n {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
    }

    /// dφ/dt of a frame state at grid point `k` under field `e`.
    pub fn derivative(
        &self,
        k: usize,
        e: f64,
        psi: &[Complex64],
        out: &mut [Complex64],
        ws: &mut Workspace,
    ) {
        self.rhs(2 * k, e, psi, out, &mut ws.rot);
    }

    /// Advances a frame state from grid point `k` to `k + 1`; the field
    /// varies linearly from `e_k` to `e_next`.
    #[inline]
    pub fn step_forward(
        &self,
        psi: &mut [Complex64],
        k: usize,
        e_k: f64,
        e_next: f64,
        ws: &mut Workspace,
    ) {
        self.rk4(
            psi,
            2 * k,
            2 * k + 1,
            2 * k + 2,
            e_k,
            e_next,
            self.dt_ps,
            ws,
        );
    }

    /// Moves a frame state from grid point `k` back to `k − 1`.
    #[inline]
    pub fn step_backward(
        &self,
        psi: &mut [Complex64],
        k: usize,
        e_k: f64,
        e_prev: f64,
        ws: &mut Workspace,
    ) {
        self.rk4(
            psi,
            2 * k,
            2 * k - 1,
            2 * k - 2,
            e_k,
            e_prev,
            -self.dt_ps,
            ws,
        );
    }
}

#[inline]
fn bilinear(m: &[f64], n: usize, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let mut mb = Complex64::new(0.0, 0.0);
        for j in 0..n {
            mb += b[j] * row[j];
        }
        acc += a[i].conj() * mb;
    }
    acc
}

/// One row of a population time series.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRow {
    pub t_ns: f64,
    pub populations: Vec<f64>,
}

/// |amplitude|² per basis state at every stored time.
pub fn populations(traj: &Trajectory) -> Vec<PopulationRow> {
    (0..traj.len())
        .map(|k| PopulationRow {
            t_ns: units::to_nanoseconds(traj.time_ps(k)),
            populations: traj.state(k).iter().map(|c| c.norm_sqr()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{pair_from_specs, Molecule, PairGeometry};
    use crate::pendular::DEFAULT_TOLERANCE;
    use approx::assert_relative_eq;

    fn sro_pair() -> PairSystem {
        let m = Molecule::sro();
        pair_from_specs(
            &m.at_field(4.4).unwrap(),
            &m.at_field(6.6).unwrap(),
            PairGeometry::new(50.0, 90.0).unwrap(),
            "SrO",
            2,
            DEFAULT_TOLERANCE,
        )
        .unwrap()
    }

    #[test]
    fn envelope_values() {
        assert_eq!(envelope(0.0, 10.0).unwrap(), 0.0);
        assert!(envelope(10.0, 10.0).unwrap() < 1e-30);
        assert_relative_eq!(envelope(5.0, 10.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(envelope(2.5, 10.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(envelope(-0.1, 10.0), Err(Error::Contract(_))));
        assert!(matches!(envelope(10.5, 10.0), Err(Error::Contract(_))));
    }

    #[test]
    fn grid_must_be_integral() {
        assert_eq!(grid_steps(33_000.0, 0.25).unwrap(), 132_000);
        assert!(grid_steps(10.1, 0.25).is_err());
        assert!(grid_steps(10.0, 0.0).is_err());
    }

    #[test]
    fn pulse_endpoints_must_vanish() {
        assert!(matches!(
            Pulse::new(0.25, vec![1.0, 0.0, 0.0]),
            Err(Error::Contract(_))
        ));
        let p = Pulse::cosine(100.0, 0.25, 1.0, 0.3).unwrap();
        assert_eq!(p.samples()[0], 0.0);
        assert_eq!(*p.samples().last().unwrap(), 0.0);
        assert_eq!(p.steps(), 400);
    }

    #[test]
    fn drive_operator_entries() {
        let pair = sro_pair();
        let m = drive_operator(&pair);
        let mu = pair.molecule.mu();
        let (s1, s2) = (&pair.site1, &pair.site2);
        assert_relative_eq!(m[(0, 0)], mu * (s1.c0 + s2.c0), max_relative = 1e-14);
        assert_relative_eq!(m[(0, 1)], mu * s2.cx, max_relative = 1e-14);
        assert_relative_eq!(m[(0, 2)], mu * s1.cx, max_relative = 1e-14);
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn stationary_state_phases() {
        // With no field and an uncoupled pair, |pq⟩ only acquires e^{−iEt}.
        let m = Molecule::sro();
        let pair = pair_from_specs(
            &m.at_field(4.4).unwrap(),
            &m.at_field(6.6).unwrap(),
            PairGeometry::new(50.0, crate::pair::magic_angle_deg()).unwrap(),
            "SrO",
            2,
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        let prop = Propagator::for_pair(&pair);
        let pulse = Pulse::zeros(1000.0, 0.25).unwrap();
        let h = pair.hamiltonian();
        for i in 0..4 {
            let out = prop
                .evolve(&pulse, &StateVector::basis(4, i), Direction::Forward)
                .unwrap();
            let phase = -h[(i, i)] * pulse.duration_ps();
            let want = Complex64::from_polar(1.0, phase);
            assert!(
                (out[i] - want).norm() < 1e-10,
                "state {i}: {} vs {want}",
                out[i]
            );
            assert!((out[i].norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn forward_backward_identity() {
        let pair = sro_pair();
        let prop = Propagator::for_pair(&pair);
        let w = (pair.site1.gap_over_b()) * pair.b();
        let pulse = Pulse::cosine(2000.0, 0.25, 1.5, w).unwrap();
        let psi0 = StateVector(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, -0.5),
        ]);
        let end = prop.evolve(&pulse, &psi0, Direction::Forward).unwrap();
        let back = prop.evolve(&pulse, &end, Direction::Backward).unwrap();
        assert!(psi0.inner(&back).norm() > 1.0 - 1e-8);
    }

    #[test]
    fn trajectory_storage_and_order() {
        let pair = sro_pair();
        let prop = Propagator::for_pair(&pair);
        let pulse = Pulse::cosine(10.0, 0.25, 1.0, 0.2).unwrap();
        let psi = StateVector::basis(4, 0);
        let fwd = prop.propagate(&pulse, &psi, Direction::Forward, 7).unwrap();
        assert_eq!(fwd.grid_index(0), 0);
        assert_eq!(fwd.grid_index(fwd.len() - 1), 40);
        assert_eq!(fwd.len(), 7);
        let bwd = prop
            .propagate(&pulse, &psi, Direction::Backward, 1)
            .unwrap();
        assert_eq!(bwd.len(), 41);
        assert_eq!(bwd.last(), psi);
        assert_eq!(bwd.time_ps(40), 10.0);
        let end = prop.evolve(&pulse, &psi, Direction::Backward).unwrap();
        assert_eq!(bwd.first(), end);
    }

    #[test]
    fn unnormalized_input_rejected() {
        let prop = Propagator::for_pair(&sro_pair());
        let pulse = Pulse::zeros(1.0, 0.25).unwrap();
        let bad = StateVector::from_real(&[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            prop.evolve(&pulse, &bad, Direction::Forward),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn huge_step_reports_drift() {
        let prop = Propagator::for_pair(&sro_pair());
        let pulse = Pulse::cosine(2000.0, 10.0, 1.5, 0.2).unwrap();
        let err = prop
            .evolve(&pulse, &StateVector::basis(4, 0), Direction::Forward)
            .unwrap_err();
        assert!(
            matches!(err, Error::StepSize { .. } | Error::Numeric(_)),
            "{err}"
        );
    }

    #[test]
    fn populations_sum_to_one() {
        let pair = sro_pair();
        let prop = Propagator::for_pair(&pair);
        let w = pair.site2.gap_over_b() * pair.b();
        let pulse = Pulse::cosine(500.0, 0.25, 1.0, w).unwrap();
        let traj = prop
            .propagate(&pulse, &StateVector::basis(4, 0), Direction::Forward, 1)
            .unwrap();
        for row in populations(&traj) {
            assert!((row.populations.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn qubit_embedding() {
        let s = StateVector::from_real(&[0.0, 0.6, 0.8, 0.0]);
        let e = s.embed_qubits(3, 3).unwrap();
        assert_eq!(e.dim(), 9);
        assert_eq!(e[1].re, 0.6);
        assert_eq!(e[3].re, 0.8);
    }
}
