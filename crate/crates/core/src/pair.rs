//! Two dipole-coupled pendular molecules.
//!
//! In the product basis |pq⟩ (index `p * n2 + q`) the pair Hamiltonian is
//!
//! ```text
//! H = W ⊗ I + I ⊗ W' + Ω_α (C ⊗ C')
//! ```
//!
//! where W, W' are the diagonal site energies and C, C' the site cosθ
//! matrices. The laser couples through cosθ₁ + cosθ₂ = C ⊗ I + I ⊗ C'.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pendular::{self, RotorSpec, SiteLevels, SiteQubit};
use crate::units;

/// Angle at which 1 − 3cos²α vanishes, in degrees.
pub fn magic_angle_deg() -> f64 {
    (1.0 / 3f64.sqrt()).acos().to_degrees()
}

/// Separation and orientation of the two trap sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// Separation (nm).
    pub r12_nm: f64,
    /// Angle between the array axis and the static field (degrees).
    pub alpha_deg: f64,
}

impl PairGeometry {
    pub fn new(r12_nm: f64, alpha_deg: f64) -> Result<Self> {
        let g = PairGeometry { r12_nm, alpha_deg };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r12_nm > 0.0) {
            return Err(Error::Config(format!(
                "r12 must be > 0 nm, got {}",
                self.r12_nm
            )));
        }
        if !(0.0..=180.0).contains(&self.alpha_deg) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 180] degrees, got {}",
                self.alpha_deg
            )));
        }
        Ok(())
    }
}

/// Molecular species constants shared by both sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub name: String,
    pub b_cm: f64,
    pub mu_debye: f64,
}

impl Molecule {
    pub fn sro() -> Self {
        Molecule {
            name: "SrO".into(),
            b_cm: 0.33,
            mu_debye: 8.9,
        }
    }

    pub fn nacs() -> Self {
        Molecule {
            name: "NaCs".into(),
            b_cm: 0.059,
            mu_debye: 4.6,
        }
    }

    pub fn at_field(&self, epsilon_kv_cm: f64) -> Result<RotorSpec> {
        RotorSpec::new(self.b_cm, self.mu_debye, epsilon_kv_cm)
    }

    /// Rotational constant as an internal energy.
    pub fn b(&self) -> f64 {
        units::wavenumber(self.b_cm)
    }

    /// Dipole moment in internal units.
    pub fn mu(&self) -> f64 {
        units::debye(self.mu_debye)
    }
}

/// Ω_α = Ω(1 − 3cos²α). The angular factor is snapped to zero within
/// 10⁻¹² of the magic angle so the interaction vanishes exactly there.
pub fn omega_alpha(omega: f64, alpha_deg: f64) -> f64 {
    let c = alpha_deg.to_radians().cos();
    let factor = 1.0 - 3.0 * c * c;
    if factor.abs() < 1e-12 {
        0.0
    } else {
        omega * factor
    }
}

/// Two-site Hamiltonian and drive operators. Energies are in units of B.
#[derive(Debug, Clone)]
pub struct PairSystem {
    pub site1: SiteQubit,
    pub site2: SiteQubit,
    pub levels1: SiteLevels,
    pub levels2: SiteLevels,
    pub geometry: PairGeometry,
    pub molecule: Molecule,
    pub omega_alpha_over_b: f64,
    pub h_over_b: DMatrix<f64>,
    /// cosθ₁ ⊗ I
    pub drive1: DMatrix<f64>,
    /// I ⊗ cosθ₂
    pub drive2: DMatrix<f64>,
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn square(n: usize, row_major: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, row_major)
}

/// Assembles the pair Hamiltonian from per-site level data.
pub fn build_pair(
    levels1: &SiteLevels,
    levels2: &SiteLevels,
    geometry: PairGeometry,
    molecule: &Molecule,
) -> Result<PairSystem> {
    geometry.validate()?;
    let (n1, n2) = (levels1.n_levels(), levels2.n_levels());
    let omega = units::dipole_dipole_omega(molecule.mu(), units::nanometers(geometry.r12_nm))?;
    let omega_alpha_over_b = omega_alpha(omega, geometry.alpha_deg) / molecule.b();

    let w1 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
        &levels1.energies_over_b,
    ));
    let w2 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
        &levels2.energies_over_b,
    ));
    let c1 = square(n1, &levels1.cos_matrix);
    let c2 = square(n2, &levels2.cos_matrix);
    let (i1, i2) = (DMatrix::identity(n1, n1), DMatrix::identity(n2, n2));

    let h_over_b = kron(&w1, &i2) + kron(&i1, &w2) + kron(&c1, &c2) * omega_alpha_over_b;
    let drive1 = kron(&c1, &i2);
    let drive2 = kron(&i1, &c2);

    let site_of = |l: &SiteLevels| SiteQubit {
        w0_over_b: l.energies_over_b[0],
        w1_over_b: l.energies_over_b[1],
        c0: l.cos_matrix[0],
        c1: l.cos_matrix[l.n_levels() + 1],
        cx: l.cos_matrix[1],
        x: l.x,
        jmax_used: l.jmax_used,
    };

    Ok(PairSystem {
        site1: site_of(levels1),
        site2: site_of(levels2),
        levels1: levels1.clone(),
        levels2: levels2.clone(),
        geometry,
        molecule: molecule.clone(),
        omega_alpha_over_b,
        h_over_b,
        drive1,
        drive2,
    })
}

/// Builds a pair from two rotor specifications, which must describe the same
/// species. `n_levels` is the number of pendular levels kept per site.
pub fn pair_from_specs(
    spec1: &RotorSpec,
    spec2: &RotorSpec,
    geometry: PairGeometry,
    name: &str,
    n_levels: usize,
    tolerance: f64,
) -> Result<PairSystem> {
    spec1.validate()?;
    spec2.validate()?;
    if spec1.b_cm != spec2.b_cm || spec1.mu_debye != spec2.mu_debye {
        return Err(Error::Config(format!(
            "sites describe different species: (B, μ) = ({}, {}) vs ({}, {})",
            spec1.b_cm, spec1.mu_debye, spec2.b_cm, spec2.mu_debye
        )));
    }
    let molecule = Molecule {
        name: name.to_string(),
        b_cm: spec1.b_cm,
        mu_debye: spec1.mu_debye,
    };
    let levels = |s: &RotorSpec| -> Result<SiteLevels> {
        let x = s.reduced_field()?;
        if n_levels == 2 {
            Ok(SiteLevels::from_qubit(&pendular::site_qubit_at(
                x, tolerance,
            )?))
        } else {
            pendular::site_levels(x, n_levels, tolerance)
        }
    };
    build_pair(&levels(spec1)?, &levels(spec2)?, geometry, &molecule)
}

impl PairSystem {
    pub fn dim(&self) -> usize {
        self.h_over_b.nrows()
    }

    pub fn n_levels(&self) -> (usize, usize) {
        (self.levels1.n_levels(), self.levels2.n_levels())
    }

    /// Product-basis index of |p q⟩.
    pub fn index(&self, p: usize, q: usize) -> usize {
        p * self.levels2.n_levels() + q
    }

    /// Rotational constant (internal energy).
    pub fn b(&self) -> f64 {
        self.molecule.b()
    }

    /// Ω_α as an internal energy.
    pub fn omega_alpha(&self) -> f64 {
        self.omega_alpha_over_b * self.b()
    }

    /// Hamiltonian in internal energy units.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        &self.h_over_b * self.b()
    }

    /// Laser coupling μ(cosθ₁ + cosθ₂) in internal units; the interaction
    /// Hamiltonian is −E(t) times this matrix.
    pub fn drive_operator(&self) -> DMatrix<f64> {
        (&self.drive1 + &self.drive2) * self.molecule.mu()
    }

    /// First-order conditional frequency shift |Ω_α|(C₁−C₀)(C₁′−C₀′), as an
    /// internal energy (ħ = 1 angular frequency).
    pub fn delta_omega_approx(&self) -> f64 {
        self.omega_alpha().abs() * site_factor(&self.site1) * site_factor(&self.site2)
    }

    /// Pair eigenvalues labeled by their dominant product state.
    pub fn labeled_spectrum(&self) -> Result<Vec<LabeledLevel>> {
        let eig = SymmetricEigen::new(self.hamiltonian());
        let n = self.dim();
        let mut labeled = vec![None; n];
        for k in 0..n {
            let v = eig.eigenvectors.column(k);
            let (idx, weight) =
                v.iter()
                    .map(|c| c * c)
                    .enumerate()
                    .fold(
                        (0, -1.0),
                        |best, (i, w)| if w > best.1 { (i, w) } else { best },
                    );
            if weight < LABEL_THRESHOLD {
                return Err(Error::Degeneracy {
                    state: idx,
                    overlap: weight,
                });
            }
            if labeled[idx].is_some() {
                return Err(Error::Degeneracy {
                    state: idx,
                    overlap: weight,
                });
            }
            labeled[idx] = Some(LabeledLevel {
                basis_index: idx,
                energy: eig.eigenvalues[k],
                weight,
            });
        }
        labeled
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or(Error::Degeneracy {
                    state: i,
                    overlap: 0.0,
                })
            })
            .collect()
    }

    /// Exact conditional shift (E₁₁ − E₀₁) − (E₁₀ − E₀₀) from the pair
    /// spectrum, as an internal energy. Signed: follows the sign of Ω_α.
    pub fn delta_omega_exact(&self) -> Result<f64> {
        let spectrum = self.labeled_spectrum()?;
        let e = |p, q| spectrum[self.index(p, q)].energy;
        Ok((e(1, 1) - e(0, 1)) - (e(1, 0) - e(0, 0)))
    }

    /// All pairwise gaps of the labeled spectrum with their beat periods.
    pub fn eigen_gaps(&self) -> Result<Vec<EigenGap>> {
        let spectrum = self.labeled_spectrum()?;
        let mut gaps = Vec::new();
        for i in 0..spectrum.len() {
            for j in (i + 1)..spectrum.len() {
                let gap = (spectrum[j].energy - spectrum[i].energy).abs();
                gaps.push(EigenGap {
                    lower: spectrum[i].basis_index,
                    upper: spectrum[j].basis_index,
                    gap,
                    period_ps: 2.0 * std::f64::consts::PI / gap,
                });
            }
        }
        Ok(gaps)
    }
}

/// Minimum squared overlap with a product state for an eigenvector label.
pub const LABEL_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledLevel {
    pub basis_index: usize,
    /// Internal energy.
    pub energy: f64,
    /// Squared overlap with the labeling product state.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenGap {
    pub lower: usize,
    pub upper: usize,
    /// Internal energy.
    pub gap: f64,
    /// Beat period h/ΔE in ps.
    pub period_ps: f64,
}

/// (C₁ − C₀) for one site.
pub fn site_factor(site: &SiteQubit) -> f64 {
    site.c1 - site.c0
}

/// An inclusive grid axis `start, start + step, ...` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        GridRange { start, stop, step }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0)
            || !(self.stop >= self.start)
            || !self.start.is_finite()
            || !self.stop.is_finite()
        {
            return Err(Error::Config(format!(
                "empty grid range: start {}, stop {}, step {}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// One cell of the frequency-shift ratio map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub x: f64,
    pub x_prime_minus_x: f64,
    pub ratio: f64,
}

/// Δω/|Ω_α| = (C₁−C₀)(C₁′−C₀′) over a grid of (x, x′−x). The ratio does not
/// depend on the orientation angle. Row-major in x, then x′−x.
pub fn ratio_map(
    x_range: GridRange,
    dx_range: GridRange,
    tolerance: f64,
) -> Result<Vec<RatioPoint>> {
    let xs = x_range.points()?;
    let dxs = dx_range.points()?;
    if xs.iter().any(|&x| x < 0.0) || xs.iter().any(|&x| dxs.iter().any(|&d| x + d < 0.0)) {
        return Err(Error::Config(
            "ratio map requires x >= 0 and x' >= 0 on the whole grid".into(),
        ));
    }
    let cells: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| dxs.iter().map(move |&d| (x, d)))
        .collect();
    cells
        .par_iter()
        .map(|&(x, d)| {
            let a = pendular::site_qubit_at(x, tolerance)?;
            let b = pendular::site_qubit_at(x + d, tolerance)?;
            Ok(RatioPoint {
                x,
                x_prime_minus_x: d,
                ratio: site_factor(&a) * site_factor(&b),
            })
        })
        .collect()
}
