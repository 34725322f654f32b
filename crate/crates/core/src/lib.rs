//! Resonant generation of excited nonlinear modes in a trapped Bose-Einstein
//! condensate by modulation of the atomic scattering length.
//!
//! A condensate held in a cylindrical harmonic trap supports stationary
//! nonlinear modes (the mean-field analogues of the oscillator levels). An
//! oscillating magnetic field near a Feshbach resonance modulates the
//! scattering length; when the modulation frequency sits close to the
//! transition frequency between the ground mode and one excited mode, the
//! condensate coherently cycles between the two. This crate models that
//! process at three levels:
//!
//! * [`feshbach`] converts between laboratory field parameters and the
//!   mean/oscillating parts of the scattering length,
//! * [`modes`] / [`overlaps`] build a variational Gaussian description of the
//!   coupled mode pair and its interaction integrals,
//! * [`twomode`] integrates the reduced two-amplitude equations of motion and
//!   [`order_parameter`] condenses trajectories into the time-averaged
//!   population imbalance used to map the smooth/abrupt transfer regimes,
//! * [`gpe`] cross-checks the reduction against the full mean-field equation
//!   on a cylindrical grid.
//!
//! All dynamical quantities are expressed in trap units: lengths in radial
//! oscillator lengths, energies in units of the radial trap quantum, times in
//! inverse radial trap frequencies. [`units`] holds the physical constants
//! and conversions in and out of that system.

pub mod error;
pub mod feshbach;
pub mod gpe;
pub mod modes;
pub mod order_parameter;
pub mod overlaps;
pub mod parallel;
pub mod quadrature;
pub mod twomode;
pub mod units;

pub use error::{Error, Result};
