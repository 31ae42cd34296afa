//! Physical constants and the conversion chokepoint between laboratory units
//! and the internal unit system.
//!
//! Internally every quantity is expressed with ħ = 1:
//!
//! | dimension | laboratory unit | internal unit            |
//! |-----------|-----------------|--------------------------|
//! | energy    | cm⁻¹            | rad/ps (angular)         |
//! | frequency | MHz (linear)    | rad/ps (angular)         |
//! | time      | ns              | ps                       |
//! | length    | nm              | nm                       |
//! | field     | kV/cm           | kV/cm                    |
//! | dipole    | Debye           | (rad/ps) per (kV/cm)     |
//!
//! so that `dipole * field` is an internal energy and `energy * time` is a
//! phase in radians. Constants are the exact 2019 SI values unless noted.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Planck constant (J s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// One Debye in C m (10⁻²¹/c).
pub const DEBYE: f64 = 1.0e-21 / SPEED_OF_LIGHT;
/// Hartree energy (J), CODATA 2018.
pub const HARTREE: f64 = 4.359_744_722_207_1e-18;
/// Bohr radius (m), CODATA 2018.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

const PS: f64 = 1.0e-12;
const NS_PER_PS: f64 = 1.0e-3;
const KV_PER_CM_IN_V_PER_M: f64 = 1.0e5;
const NM: f64 = 1.0e-9;
const MHZ: f64 = 1.0e6;

/// Atomic unit of electric field (V/m).
pub const ATOMIC_FIELD: f64 = HARTREE / (ELEMENTARY_CHARGE * BOHR_RADIUS);
/// Atomic unit of time (s).
pub const ATOMIC_TIME: f64 = HBAR / HARTREE;

/// The physical dimensions that cross the I/O boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Energy,
    Dipole,
    Field,
    Length,
    Time,
    Frequency,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Energy,
        Dimension::Dipole,
        Dimension::Field,
        Dimension::Length,
        Dimension::Time,
        Dimension::Frequency,
    ];

    /// Laboratory unit label used in files and reports.
    pub fn lab_unit(self) -> &'static str {
        match self {
            Dimension::Energy => "cm^-1",
            Dimension::Dipole => "D",
            Dimension::Field => "kV/cm",
            Dimension::Length => "nm",
            Dimension::Time => "ns",
            Dimension::Frequency => "MHz",
        }
    }

    /// Multiplier taking one laboratory unit to internal units.
    fn scale(self) -> f64 {
        match self {
            // ω = 2π c ν̃, with ν̃ in m⁻¹
            Dimension::Energy => 2.0 * PI * SPEED_OF_LIGHT * 100.0 * PS,
            Dimension::Dipole => DEBYE * KV_PER_CM_IN_V_PER_M / HBAR * PS,
            Dimension::Field => 1.0,
            Dimension::Length => 1.0,
            Dimension::Time => 1.0 / NS_PER_PS,
            Dimension::Frequency => 2.0 * PI * MHZ * PS,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Energy => "energy",
            Dimension::Dipole => "dipole",
            Dimension::Field => "field",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
        };
        f.write_str(name)
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unsupported dimension `{s}`")))
    }
}

/// A value in laboratory units tagged with its dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

impl Quantity {
    pub fn new(value: f64, dimension: Dimension) -> Self {
        Quantity { value, dimension }
    }

    pub fn to_internal(self) -> f64 {
        self.value * self.dimension.scale()
    }

    pub fn from_internal(value: f64, dimension: Dimension) -> Self {
        Quantity {
            value: value / dimension.scale(),
            dimension,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.dimension.lab_unit())
    }
}

pub fn wavenumber(cm_inv: f64) -> f64 {
    Quantity::new(cm_inv, Dimension::Energy).to_internal()
}

pub fn debye(d: f64) -> f64 {
    Quantity::new(d, Dimension::Dipole).to_internal()
}

pub fn kv_per_cm(e: f64) -> f64 {
    Quantity::new(e, Dimension::Field).to_internal()
}

pub fn nanometers(r: f64) -> f64 {
    Quantity::new(r, Dimension::Length).to_internal()
}

pub fn nanoseconds(t: f64) -> f64 {
    Quantity::new(t, Dimension::Time).to_internal()
}

pub fn picoseconds(t: f64) -> f64 {
    t
}

pub fn megahertz(nu: f64) -> f64 {
    Quantity::new(nu, Dimension::Frequency).to_internal()
}

/// Internal time (ps) to nanoseconds.
pub fn to_nanoseconds(t: f64) -> f64 {
    Quantity::from_internal(t, Dimension::Time).value
}

/// Internal angular frequency to linear MHz.
pub fn to_megahertz(omega: f64) -> f64 {
    Quantity::from_internal(omega, Dimension::Frequency).value
}

/// Internal energy to cm⁻¹.
pub fn to_wavenumber(energy: f64) -> f64 {
    Quantity::from_internal(energy, Dimension::Energy).value
}

/// Internal field to kV/cm.
pub fn to_kv_per_cm(field: f64) -> f64 {
    Quantity::from_internal(field, Dimension::Field).value
}

/// Dimensionless reduced field x = με/B. All arguments are internal values.
pub fn reduced_field(mu: f64, epsilon: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!(
            "rotational constant must be positive, got {b}"
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::Domain(format!(
            "field strength must be non-negative, got {epsilon}"
        )));
    }
    Ok(mu * epsilon / b)
}

/// Dipole-dipole coupling scale Ω = μ²/(4πε₀ r³) as an internal energy.
///
/// `mu` is an internal dipole, `r12` an internal length.
pub fn dipole_dipole_omega(mu: f64, r12: f64) -> Result<f64> {
    if !(r12 > 0.0) {
        return Err(Error::Domain(format!(
            "separation must be positive, got {r12}"
        )));
    }
    let mu_si = mu / Dimension::Dipole.scale() * DEBYE;
    let r_si = r12 / Dimension::Length.scale() * NM;
    let joules = mu_si * mu_si / (4.0 * PI * VACUUM_PERMITTIVITY * r_si.powi(3));
    Ok(joules / HBAR * PS)
}

/// Converts a penalty factor α₀ given in atomic units (1/(field² · time))
/// to internal units, 1/((kV/cm)² · ps).
pub fn penalty_from_atomic(alpha0_au: f64) -> f64 {
    let field_au = ATOMIC_FIELD / KV_PER_CM_IN_V_PER_M;
    let time_au = ATOMIC_TIME / PS;
    alpha0_au / (field_au * field_au * time_au)
}
