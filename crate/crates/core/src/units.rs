//! Physical constants and the trap unit system.
//!
//! The dynamical modules work in dimensionless trap units: lengths are
//! measured in the radial oscillator length `l_r = sqrt(hbar / (m omega_r))`,
//! energies in `hbar omega_r`, times in `1 / omega_r`. The interaction enters
//! through a single dimensionless coupling
//!
//! ```text
//! g0 = 4 pi (N - 1) a0 / l_r
//! ```
//!
//! together with the trap anisotropy `lambda = omega_z / omega_r`. This
//! module owns the conversions between laboratory quantities (SI, with
//! scattering lengths usually quoted in Bohr radii) and that system.

use crate::error::{Error, Result};

/// Reduced Planck constant, J s. 2018 CODATA adjustment.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Bohr radius, m. 2018 CODATA adjustment.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

/// Unified atomic mass unit, kg. 2018 CODATA adjustment.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of an isotope with the given mass number, kg.
///
/// The integer mass number times the atomic mass unit is accurate to better
/// than 0.1% for the alkali species used here, far below the tolerance of
/// anything downstream.
pub fn isotope_mass(mass_number: u32) -> f64 {
    f64::from(mass_number) * ATOMIC_MASS_UNIT
}

/// Angular frequency (rad/s) from an ordinary frequency in Hz.
pub fn angular_from_hz(nu: f64) -> f64 {
    2.0 * std::f64::consts::PI * nu
}

/// Laboratory description of the trapped cloud.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrapParams {
    /// Radial (transverse) trap frequency, rad/s.
    pub omega_r: f64,
    /// Axial trap frequency, rad/s.
    pub omega_z: f64,
    /// Atomic mass, kg.
    pub mass: f64,
    /// Number of condensed atoms.
    pub n_atoms: f64,
}

impl TrapParams {
    pub fn new(omega_r: f64, omega_z: f64, mass: f64, n_atoms: f64) -> Result<Self> {
        let p = TrapParams {
            omega_r,
            omega_z,
            mass,
            n_atoms,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_r", self.omega_r),
            ("omega_z", self.omega_z),
            ("mass", self.mass),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::parameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.n_atoms.is_finite() || self.n_atoms < 2.0 {
            return Err(Error::parameter(format!(
                "n_atoms must be at least 2 for a mean-field coupling, got {}",
                self.n_atoms
            )));
        }
        Ok(())
    }

    /// Radial oscillator length `sqrt(hbar / (m omega_r))`, m.
    pub fn radial_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_r)).sqrt()
    }

    /// Trap anisotropy `omega_z / omega_r`.
    pub fn anisotropy(&self) -> f64 {
        self.omega_z / self.omega_r
    }
}

/// The dimensionless parameter set the dynamical modules consume.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DimensionlessParams {
    /// Interaction coupling `4 pi (N - 1) a0 / l_r`.
    pub g0: f64,
    /// Trap anisotropy `omega_z / omega_r`.
    pub lambda: f64,
    /// Radial oscillator length, m. Kept so results can be mapped back.
    pub l_r: f64,
}

/// Reduce a laboratory configuration to trap units.
///
/// `a0` is the mean scattering length in meters; it may be negative
/// (attractive interaction), in which case `g0` comes out negative.
pub fn to_dimensionless(trap: &TrapParams, a0: f64) -> Result<DimensionlessParams> {
    trap.validate()?;
    if !a0.is_finite() {
        return Err(Error::parameter(format!(
            "scattering length must be finite, got {a0}"
        )));
    }
    let l_r = trap.radial_length();
    Ok(DimensionlessParams {
        g0: 4.0 * std::f64::consts::PI * (trap.n_atoms - 1.0) * a0 / l_r,
        lambda: trap.anisotropy(),
        l_r,
    })
}

/// Invert the coupling relation: the mean scattering length (m) that produces
/// the requested `g0` in the given trap.
pub fn coupling_to_scattering_length(g0: f64, trap: &TrapParams) -> Result<f64> {
    trap.validate()?;
    if !g0.is_finite() {
        return Err(Error::parameter(format!("g0 must be finite, got {g0}")));
    }
    Ok(g0 * trap.radial_length() / (4.0 * std::f64::consts::PI * (trap.n_atoms - 1.0)))
}
