//! Pendular eigenstates of a polar rotor in a static field.
//!
//! In units of the rotational constant the Hamiltonian B·J² − με·cosθ
//! restricted to M = 0 is tridiagonal in the Y_{j,0} basis:
//! diagonal j(j+1), off-diagonal −x·⟨Y_{j,0}|cosθ|Y_{j+1,0}⟩ with
//! ⟨Y_{j,0}|cosθ|Y_{j+1,0}⟩ = (j+1)/√((2j+1)(2j+3)).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::units;

/// Smallest basis cutoff accepted by the matrix builder.
pub const MIN_JMAX: usize = 2;
const JMAX_START: usize = 10;
const JMAX_STEP: usize = 5;
/// Largest basis cutoff tried by [`site_qubit`] before giving up.
pub const JMAX_LIMIT: usize = 60;
/// Default convergence tolerance on the site observables.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Molecule parameters at one trap site, in laboratory units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpec {
    /// Rotational constant (cm⁻¹).
    pub b_cm: f64,
    /// Permanent dipole moment (Debye).
    pub mu_debye: f64,
    /// Static field at this site (kV/cm).
    pub epsilon_kv_cm: f64,
}

impl RotorSpec {
    pub fn new(b_cm: f64, mu_debye: f64, epsilon_kv_cm: f64) -> Result<Self> {
        let spec = RotorSpec {
            b_cm,
            mu_debye,
            epsilon_kv_cm,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_cm > 0.0) {
            return Err(Error::Config(format!(
                "rotational constant must be > 0, got {}",
                self.b_cm
            )));
        }
        if !(self.mu_debye > 0.0) {
            return Err(Error::Config(format!(
                "dipole moment must be > 0, got {}",
                self.mu_debye
            )));
        }
        if !(self.epsilon_kv_cm >= 0.0) {
            return Err(Error::Config(format!(
                "field must be >= 0, got {}",
                self.epsilon_kv_cm
            )));
        }
        Ok(())
    }

    /// Reduced field x = με/B.
    pub fn reduced_field(&self) -> Result<f64> {
        units::reduced_field(
            units::debye(self.mu_debye),
            units::kv_per_cm(self.epsilon_kv_cm),
            units::wavenumber(self.b_cm),
        )
    }
}

/// Symmetric tridiagonal matrix stored as its diagonal and first
/// super-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.off.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }

    /// y = A·x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Bilinear form a·A·b.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        self.apply(b).iter().zip(a).map(|(x, y)| x * y).sum()
    }
}

/// ⟨Y_{j,0}|cosθ|Y_{j+1,0}⟩
pub fn cos_coupling(j: usize) -> f64 {
    let j = j as f64;
    (j + 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 3.0)).sqrt()
}

/// The cosθ operator in the Y_{j,0} basis, j = 0..=j_max.
pub fn cos_theta_matrix(j_max: usize) -> Tridiagonal {
    Tridiagonal {
        diag: vec![0.0; j_max + 1],
        off: (0..j_max).map(cos_coupling).collect(),
    }
}

/// H/B for reduced field `x` in the basis j = 0..=j_max.
pub fn build_stark_matrix(x: f64, j_max: usize) -> Result<Tridiagonal> {
    if j_max < MIN_JMAX {
        return Err(Error::Config(format!(
            "j_max must be >= {MIN_JMAX}, got {j_max}"
        )));
    }
    Ok(Tridiagonal {
        diag: (0..=j_max).map(|j| (j * (j + 1)) as f64).collect(),
        off: (0..j_max).map(|j| -x * cos_coupling(j)).collect(),
    })
}

/// Eigenpairs of a symmetric tridiagonal matrix by the implicit QL method
/// with Wilkinson shifts. Returns eigenvalues ascending and the matching
/// eigenvectors as columns of a row-major `n × n` buffer (`vecs[i * n + k]`
/// is component `i` of eigenvector `k`).
pub fn tridiagonal_eigen(t: &Tridiagonal) -> Result<(Vec<f64>, Vec<f64>)> {
    const MAX_SWEEPS: usize = 64;
    let n = t.dim();
    let mut d = t.diag.clone();
    let mut e = t.off.clone();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::Numeric(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} of {n} \
                     (|e| = {:.3e}, d = {:.6})",
                    e[l].abs(),
                    d[l]
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zk1 = z[k * n + i + 1];
                    let zk = z[k * n + i];
                    z[k * n + i + 1] = s * zk + c * zk1;
                    z[k * n + i] = c * zk - s * zk1;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + col] = z[i * n + k];
        }
    }
    Ok((values, vectors))
}

/// One pendular eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct PendularLevel {
    pub x: f64,
    pub energy_over_b: f64,
    /// Expansion coefficients over Y_{j,0}, j = 0..=j_max.
    pub coeffs: Vec<f64>,
}

impl PendularLevel {
    pub fn j_max(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Flips the sign so the largest-magnitude coefficient is positive.
fn fix_gauge(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, c| if c.abs() > acc.abs() { c } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Lowest `n_levels` pendular states, ascending in energy.
pub fn solve_pendular(x: f64, j_max: usize, n_levels: usize) -> Result<Vec<PendularLevel>> {
    if n_levels > j_max {
        return Err(Error::Config(format!(
            "n_levels ({n_levels}) must not exceed j_max ({j_max})"
        )));
    }
    let h = build_stark_matrix(x, j_max)?;
    let (values, vectors) = tridiagonal_eigen(&h)?;
    let n = h.dim();
    Ok((0..n_levels)
        .map(|k| {
            let mut coeffs: Vec<f64> = (0..n).map(|i| vectors[i * n + k]).collect();
            let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            coeffs.iter_mut().for_each(|c| *c /= norm);
            fix_gauge(&mut coeffs);
            PendularLevel {
                x,
                energy_over_b: values[k],
                coeffs,
            }
        })
        .collect())
}

/// ⟨p|cosθ|q⟩ for two levels on the same basis.
pub fn cos_element(p: &PendularLevel, q: &PendularLevel) -> Result<f64> {
    if p.coeffs.len() != q.coeffs.len() {
        return Err(Error::Contract(format!(
            "basis size mismatch: {} vs {}",
            p.coeffs.len(),
            q.coeffs.len()
        )));
    }
    Ok(cos_theta_matrix(p.j_max()).bilinear(&p.coeffs, &q.coeffs))
}

/// Cosine matrix elements of the qubit pair of levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineElements {
    pub c0: f64,
    pub c1: f64,
    pub cx: f64,
}

pub fn cosine_elements(ground: &PendularLevel, excited: &PendularLevel) -> Result<CosineElements> {
    if ground.x != excited.x {
        return Err(Error::Contract(format!(
            "levels belong to different fields: x = {} vs {}",
            ground.x, excited.x
        )));
    }
    Ok(CosineElements {
        c0: cos_element(ground, ground)?,
        c1: cos_element(excited, excited)?,
        cx: cos_element(ground, excited)?.abs(),
    })
}

/// Qubit data for one site: the two lowest M = 0 pendular levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteQubit {
    pub w0_over_b: f64,
    pub w1_over_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub cx: f64,
    pub x: f64,
    pub jmax_used: usize,
}

impl SiteQubit {
    /// Qubit transition energy (W₁ − W₀)/B.
    pub fn gap_over_b(&self) -> f64 {
        self.w1_over_b - self.w0_over_b
    }

    /// 2×2 cosθ matrix in the {|0⟩, |1⟩} basis.
    pub fn cos_block(&self) -> [[f64; 2]; 2] {
        [[self.c0, self.cx], [self.cx, self.c1]]
    }

    fn fields(&self) -> [f64; 5] {
        [self.w0_over_b, self.w1_over_b, self.c0, self.c1, self.cx]
    }
}

/// Energies and cosθ matrix for the lowest `n` levels of one site, used
/// when the dynamics carries levels beyond the qubit pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteLevels {
    pub x: f64,
    pub energies_over_b: Vec<f64>,
    /// Row-major n×n ⟨p|cosθ|q⟩, gauged so ⟨0|cosθ|1⟩ > 0.
    pub cos_matrix: Vec<f64>,
    pub jmax_used: usize,
}

impl SiteLevels {
    pub fn n_levels(&self) -> usize {
        self.energies_over_b.len()
    }

    pub fn from_qubit(q: &SiteQubit) -> Self {
        SiteLevels {
            x: q.x,
            energies_over_b: vec![q.w0_over_b, q.w1_over_b],
            cos_matrix: vec![q.c0, q.cx, q.cx, q.c1],
            jmax_used: q.jmax_used,
        }
    }
}

fn qubit_at(x: f64, j_max: usize) -> Result<SiteQubit> {
    let levels = solve_pendular(x, j_max, 2)?;
    let c = cosine_elements(&levels[0], &levels[1])?;
    Ok(SiteQubit {
        w0_over_b: levels[0].energy_over_b,
        w1_over_b: levels[1].energy_over_b,
        c0: c.c0,
        c1: c.c1,
        cx: c.cx,
        x,
        jmax_used: j_max,
    })
}

/// Qubit data at reduced field `x`, growing the basis until every field
/// changes by less than `tolerance`.
pub fn site_qubit_at(x: f64, tolerance: f64) -> Result<SiteQubit> {
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "reduced field must be finite and >= 0, got {x}"
        )));
    }
    let mut prev = qubit_at(x, JMAX_START)?;
    let mut j_max = JMAX_START + JMAX_STEP;
    while j_max <= JMAX_LIMIT {
        let next = qubit_at(x, j_max)?;
        let converged = prev
            .fields()
            .iter()
            .zip(next.fields())
            .all(|(a, b)| (a - b).abs() < tolerance);
        if converged {
            return Ok(next);
        }
        prev = next;
        j_max += JMAX_STEP;
    }
    Err(Error::Numeric(format!(
        "pendular basis not converged to {tolerance:e} at j_max = {JMAX_LIMIT} for x = {x}"
    )))
}

/// Qubit data for a molecule at one site.
pub fn site_qubit(spec: &RotorSpec, tolerance: f64) -> Result<SiteQubit> {
    spec.validate()?;
    site_qubit_at(spec.reduced_field()?, tolerance)
}

/// Lowest `n_levels` levels with their full cosθ matrix, at the basis
/// size that converges the qubit observables.
pub fn site_levels(x: f64, n_levels: usize, tolerance: f64) -> Result<SiteLevels> {
    if n_levels < 2 {
        return Err(Error::Config(format!(
            "need at least 2 levels per site, got {n_levels}"
        )));
    }
    let qubit = site_qubit_at(x, tolerance)?;
    // Extra head-room so the upper levels are as converged as the qubit pair.
    let j_max = (qubit.jmax_used + 2 * n_levels).max(n_levels + 1);
    let levels = solve_pendular(x, j_max, n_levels)?;
    let mut cos_matrix = vec![0.0; n_levels * n_levels];
    for p in 0..n_levels {
        for q in p..n_levels {
            let c = cos_element(&levels[p], &levels[q])?;
            cos_matrix[p * n_levels + q] = c;
            cos_matrix[q * n_levels + p] = c;
        }
    }
    if cos_matrix[1] < 0.0 {
        for k in 0..n_levels {
            if k != 1 {
                cos_matrix[k * n_levels + 1] *= -1.0;
                cos_matrix[n_levels + k] *= -1.0;
            }
        }
    }
    Ok(SiteLevels {
        x,
        energies_over_b: levels.iter().map(|l| l.energy_over_b).collect(),
        cos_matrix,
        jmax_used: j_max,
    })
}
