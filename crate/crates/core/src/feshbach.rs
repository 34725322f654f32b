//! Scattering-length control near a magnetic Feshbach resonance.
//!
//! Near an isolated resonance the s-wave scattering length follows
//!
//! ```text
//! a_s(B) = a_nr (1 - Delta / (B - B_res))
//! ```
//!
//! with `a_nr` the off-resonant background value, `B_res` the pole position
//! and `Delta` the resonance width. A bias field `B0` plus a small harmonic
//! ripple `b cos(omega t)` then modulates the scattering length around
//!
//! ```text
//! a0 = a_nr (1 - Delta / (B0 - B_res)),
//! a  = a_nr b Delta / (B0 - B_res)^2,        a_s(t) ~ a0 + a cos(omega t)
//! ```
//!
//! to first order in `b / (B0 - B_res)`. This module plans such drives:
//! given a species and a requested mean scattering length (or dimensionless
//! coupling) it produces the bias point, the ripple amplitude and the
//! modulation depth `a / a0`, with validity guards on the linearization.
//!
//! Fields are in gauss throughout; scattering lengths are in Bohr radii
//! except where a conversion to meters is explicit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, TrapParams};

/// Ripple amplitudes above this fraction of `|B0 - B_res|` invalidate the
/// first-order expansion and are rejected outright.
pub const MAX_RIPPLE_FRACTION: f64 = 0.2;

/// Above this fraction the expansion still holds but second-order terms
/// reach the percent level; planning logs a warning.
pub const MARGINAL_RIPPLE_FRACTION: f64 = 0.1;

/// Resonance parameters of one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeshbachParams {
    /// Pole position, G.
    pub b_res_gauss: f64,
    /// Resonance width, G. Sign convention: `a_s = a_nr` at `B - B_res = Delta`.
    pub delta_gauss: f64,
    /// Background scattering length, Bohr radii.
    pub a_nr_bohr: f64,
}

impl FeshbachParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_res_gauss", self.b_res_gauss),
            ("delta_gauss", self.delta_gauss),
            ("a_nr_bohr", self.a_nr_bohr),
        ] {
            if !v.is_finite() {
                return Err(Error::parameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.delta_gauss == 0.0 {
            return Err(Error::parameter("resonance width must be nonzero"));
        }
        if self.a_nr_bohr == 0.0 {
            return Err(Error::parameter(
                "background scattering length must be nonzero",
            ));
        }
        Ok(())
    }
}

/// Scattering length (Bohr radii) at a static field `b_gauss`.
pub fn scattering_length(params: &FeshbachParams, b_gauss: f64) -> Result<f64> {
    params.validate()?;
    let detuning = b_gauss - params.b_res_gauss;
    if detuning == 0.0 {
        return Err(Error::parameter(
            "field sits exactly on the resonance pole",
        ));
    }
    Ok(params.a_nr_bohr * (1.0 - params.delta_gauss / detuning))
}

/// First-order mean and ripple of the scattering length under
/// `B(t) = b0 + b cos(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    /// Mean scattering length, Bohr radii.
    pub a0_bohr: f64,
    /// Oscillation amplitude of the scattering length, Bohr radii.
    pub a_bohr: f64,
}

/// Expand `a_s(b0 + b cos)` to first order in the ripple.
///
/// Requires `|b| < |b0 - B_res|`; beyond that the trajectory crosses the
/// pole and no expansion exists.
pub fn linearize_modulation(params: &FeshbachParams, b0_gauss: f64, b_gauss: f64) -> Result<Linearization> {
    params.validate()?;
    let detuning = b0_gauss - params.b_res_gauss;
    if detuning == 0.0 {
        return Err(Error::parameter(
            "bias field sits exactly on the resonance pole",
        ));
    }
    if b_gauss.abs() >= detuning.abs() {
        return Err(Error::parameter(format!(
            "ripple |b| = {} G reaches the pole: requires |b| < |b0 - B_res| = {} G",
            b_gauss.abs(),
            detuning.abs()
        )));
    }
    Ok(Linearization {
        a0_bohr: params.a_nr_bohr * (1.0 - params.delta_gauss / detuning),
        a_bohr: params.a_nr_bohr * b_gauss * params.delta_gauss / (detuning * detuning),
    })
}

/// How the ripple amplitude of a plan is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeRule {
    /// Request a modulation depth `a / a0` directly.
    ModulationDepth(f64),
    /// Set `|b|` as a fraction of the pole distance `|B0 - B_res|`, signed so
    /// that the scattering-length ripple comes out positive.
    FieldFraction(f64),
}

/// A complete bias-plus-ripple plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPlan {
    /// Bias field, G.
    pub b0_gauss: f64,
    /// Ripple amplitude, G (sign is a phase convention).
    pub b_gauss: f64,
    /// Mean scattering length, Bohr radii.
    pub a0_bohr: f64,
    /// Scattering-length oscillation amplitude, Bohr radii.
    pub a_bohr: f64,
    /// Modulation depth `a / a0`.
    pub ratio: f64,
    /// `|b| / |B0 - B_res|`, the small parameter of the linearization.
    pub ripple_fraction: f64,
}

/// Place the bias so the mean scattering length equals `target_a0_bohr`,
/// then fix the ripple per `rule`.
pub fn plan_field(
    params: &FeshbachParams,
    target_a0_bohr: f64,
    rule: AmplitudeRule,
) -> Result<FieldPlan> {
    params.validate()?;
    if !target_a0_bohr.is_finite() {
        return Err(Error::parameter("target a0 must be finite"));
    }
    let rel = target_a0_bohr / params.a_nr_bohr;
    if (1.0 - rel).abs() < 1e-12 {
        return Err(Error::parameter(
            "target a0 equals the background value: bias field diverges",
        ));
    }
    let detuning = params.delta_gauss / (1.0 - rel);
    let b0_gauss = params.b_res_gauss + detuning;

    // Slope of a_s per gauss of ripple at the bias point.
    let slope = params.a_nr_bohr * params.delta_gauss / (detuning * detuning);
    let b_gauss = match rule {
        AmplitudeRule::ModulationDepth(ratio) => {
            if !(ratio.is_finite() && ratio >= 0.0) {
                return Err(Error::parameter(format!(
                    "modulation depth must be nonnegative, got {ratio}"
                )));
            }
            ratio * target_a0_bohr / slope
        }
        AmplitudeRule::FieldFraction(f) => {
            if !(f.is_finite() && f > 0.0 && f <= MAX_RIPPLE_FRACTION) {
                return Err(Error::parameter(format!(
                    "field fraction must lie in (0, {MAX_RIPPLE_FRACTION}], got {f}"
                )));
            }
            // Sign chosen so the scattering-length ripple is positive, which
            // is the phase convention the rest of the pipeline assumes.
            f * detuning.abs() * (params.a_nr_bohr * params.delta_gauss).signum()
        }
    };

    let ripple_fraction = b_gauss.abs() / detuning.abs();
    if ripple_fraction > MAX_RIPPLE_FRACTION {
        return Err(Error::parameter(format!(
            "plan needs |b| = {:.4} G but the expansion bound is |b| <= {MAX_RIPPLE_FRACTION} |B0 - B_res| = {:.4} G",
            b_gauss.abs(),
            MAX_RIPPLE_FRACTION * detuning.abs()
        )));
    }
    if ripple_fraction > MARGINAL_RIPPLE_FRACTION {
        log::warn!(
            "ripple is {:.1}% of the pole distance; second-order corrections reach the percent level",
            100.0 * ripple_fraction
        );
    }

    let lin = linearize_modulation(params, b0_gauss, b_gauss)?;
    Ok(FieldPlan {
        b0_gauss,
        b_gauss,
        a0_bohr: lin.a0_bohr,
        a_bohr: lin.a_bohr,
        ratio: lin.a_bohr / lin.a0_bohr,
        ripple_fraction,
    })
}

/// One registry entry: resonance parameters plus species bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesEntry {
    pub mass_number: u32,
    pub b_res_gauss: f64,
    pub delta_gauss: f64,
    pub a_nr_bohr: f64,
    /// Free-text provenance of the resonance parameters.
    pub source: String,
}

impl SpeciesEntry {
    pub fn resonance(&self) -> FeshbachParams {
        FeshbachParams {
            b_res_gauss: self.b_res_gauss,
            delta_gauss: self.delta_gauss,
            a_nr_bohr: self.a_nr_bohr,
        }
    }

    /// Atomic mass, kg.
    pub fn mass(&self) -> f64 {
        units::isotope_mass(self.mass_number)
    }
}

/// Keyed collection of species, serializable as a flat TOML table per
/// species so the file stays hand-editable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesRegistry {
    entries: BTreeMap<String, SpeciesEntry>,
}

impl SpeciesRegistry {
    /// The four species with broad, experimentally established resonances
    /// that the planners are normally pointed at.
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            "rb85".to_string(),
            SpeciesEntry {
                mass_number: 85,
                b_res_gauss: 155.0,
                delta_gauss: 10.7,
                a_nr_bohr: -443.0,
                source: "s-wave resonance near 155 G, attractive background".to_string(),
            },
        );
        entries.insert(
            "rb87".to_string(),
            SpeciesEntry {
                mass_number: 87,
                b_res_gauss: 1007.34,
                delta_gauss: 0.17,
                a_nr_bohr: 100.0,
                source: "narrow s-wave resonance near 1007 G, repulsive background".to_string(),
            },
        );
        entries.insert(
            "li7".to_string(),
            SpeciesEntry {
                mass_number: 7,
                b_res_gauss: 735.0,
                delta_gauss: -113.0,
                a_nr_bohr: -27.5,
                source: "broad s-wave resonance near 735 G, attractive background".to_string(),
            },
        );
        entries.insert(
            "k39".to_string(),
            SpeciesEntry {
                mass_number: 39,
                b_res_gauss: 403.4,
                delta_gauss: -52.0,
                a_nr_bohr: -23.0,
                source: "broad s-wave resonance near 403 G, attractive background".to_string(),
            },
        );
        SpeciesRegistry { entries }
    }

    pub fn get(&self, name: &str) -> Result<&SpeciesEntry> {
        self.entries.get(name).ok_or_else(|| {
            Error::parameter(format!(
                "unknown species '{name}' (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &SpeciesEntry)> {
        self.entries.iter()
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: SpeciesEntry) {
        self.entries.insert(name.into(), entry);
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let reg: SpeciesRegistry =
            toml::from_str(text).map_err(|e| Error::format(format!("species registry: {e}")))?;
        for (name, entry) in &reg.entries {
            entry
                .resonance()
                .validate()
                .map_err(|e| Error::format(format!("species '{name}': {e}")))?;
        }
        Ok(reg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::format(format!("species registry: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// A laboratory plan tied to a species and trap: field settings plus the
/// atom number that realizes the requested coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationPlan {
    pub species: String,
    pub plan: FieldPlan,
    /// Atoms needed for the requested dimensionless coupling.
    pub n_atoms: f64,
    /// Radial oscillator length, m.
    pub l_r: f64,
}

/// Plan bias, ripple and atom number for a species from the dimensionless
/// coupling, a modulation depth and the field-fraction rule.
///
/// The bias branch is fixed by requiring a positive mean scattering length
/// (the condensate must stay repulsive on average), which determines
/// `x = Delta / (B0 - B_res)` as `x = ratio / (ratio + sign(a_nr) fraction)`.
pub fn plan_for_coupling(
    name: &str,
    entry: &SpeciesEntry,
    g0: f64,
    omega_r: f64,
    ratio: f64,
    fraction: f64,
) -> Result<ModulationPlan> {
    let params = entry.resonance();
    params.validate()?;
    if !(g0.is_finite() && g0 > 0.0) {
        return Err(Error::parameter(format!(
            "coupling must be positive for a repulsive plan, got {g0}"
        )));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::parameter(format!(
            "modulation depth must be positive, got {ratio}"
        )));
    }
    if !(fraction.is_finite() && fraction > 0.0 && fraction <= MAX_RIPPLE_FRACTION) {
        return Err(Error::parameter(format!(
            "field fraction must lie in (0, {MAX_RIPPLE_FRACTION}], got {fraction}"
        )));
    }
    if params.a_nr_bohr < 0.0 && ratio <= fraction {
        return Err(Error::parameter(
            "attractive background needs modulation depth > field fraction for a repulsive bias point",
        ));
    }
    let x = ratio / (ratio + params.a_nr_bohr.signum() * fraction);
    let target_a0 = params.a_nr_bohr * (1.0 - x);
    debug_assert!(target_a0 > 0.0);
    let plan = plan_field(&params, target_a0, AmplitudeRule::FieldFraction(fraction))?;

    let l_r = (units::HBAR / (entry.mass() * omega_r)).sqrt();
    let a0_m = plan.a0_bohr * units::BOHR_RADIUS;
    let n_atoms = 1.0 + g0 * l_r / (4.0 * std::f64::consts::PI * a0_m);
    Ok(ModulationPlan {
        species: name.to_string(),
        plan,
        n_atoms,
        l_r,
    })
}

/// Plan bias and ripple for a species holding the atom number fixed: the
/// coupling then dictates the mean scattering length, and the ripple is set
/// by the requested modulation depth.
pub fn plan_for_atom_number(
    name: &str,
    entry: &SpeciesEntry,
    g0: f64,
    omega_r: f64,
    n_atoms: f64,
    ratio: f64,
) -> Result<ModulationPlan> {
    let params = entry.resonance();
    let trap = TrapParams::new(omega_r, omega_r, entry.mass(), n_atoms)?;
    let a0_m = units::coupling_to_scattering_length(g0, &trap)?;
    let target_a0 = a0_m / units::BOHR_RADIUS;
    let plan = plan_field(&params, target_a0, AmplitudeRule::ModulationDepth(ratio))?;
    Ok(ModulationPlan {
        species: name.to_string(),
        plan,
        n_atoms,
        l_r: trap.radial_length(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rb85() -> FeshbachParams {
        SpeciesRegistry::builtin().get("rb85").unwrap().resonance()
    }

    fn li7() -> FeshbachParams {
        SpeciesRegistry::builtin().get("li7").unwrap().resonance()
    }

    #[test]
    fn scattering_length_zero_crossing() {
        // a_s vanishes at B = B_res + Delta by construction.
        let a = scattering_length(&rb85(), 155.0 + 10.7).unwrap();
        assert!(a.abs() < 1e-10);
        // Far from the pole the background value is recovered.
        let far = scattering_length(&rb85(), 1.0e6).unwrap();
        assert_relative_eq!(far, -443.0, max_relative = 1e-4);
    }

    #[test]
    fn pole_is_rejected() {
        assert!(scattering_length(&rb85(), 155.0).is_err());
        assert!(linearize_modulation(&rb85(), 155.0, 0.1).is_err());
    }

    #[test]
    fn linearization_matches_closed_algebra() {
        // Bias 636.125 G on the 735 G resonance: pole distance is
        // -98.875 G = -(7/8) * 113, so a0 = -27.5 (1 - 8/7) = 27.5/7.
        let lin = linearize_modulation(&li7(), 636.125, 9.8875).unwrap();
        assert_relative_eq!(lin.a0_bohr, 27.5 / 7.0, max_relative = 1e-12);
        // a = a_nr b Delta / (B0-B_res)^2 and the chosen b makes a/a0 = 0.8.
        assert_relative_eq!(lin.a_bohr / lin.a0_bohr, 0.8, max_relative = 1e-12);
    }

    #[test]
    fn ripple_reaching_pole_is_rejected() {
        let err = linearize_modulation(&li7(), 636.125, 99.0).unwrap_err();
        assert!(err.to_string().contains("|b| < |b0 - B_res|"));
    }

    #[test]
    fn linearization_error_is_second_order() {
        // Compare the expansion against the exact a_s at the ripple turning
        // points; halving b must cut the residual by about four.
        let p = li7();
        let b0 = 636.125;
        let residual = |b: f64| {
            let lin = linearize_modulation(&p, b0, b).unwrap();
            let exact = scattering_length(&p, b0 + b).unwrap();
            (exact - (lin.a0_bohr + lin.a_bohr)).abs()
        };
        let r1 = residual(8.0);
        let r2 = residual(4.0);
        assert!(r1 / r2 > 3.5 && r1 / r2 < 4.5, "ratio {}", r1 / r2);
    }

    #[test]
    fn plan_field_hits_target_and_depth() {
        let plan = plan_field(&li7(), 27.5 / 7.0, AmplitudeRule::ModulationDepth(0.8)).unwrap();
        assert_relative_eq!(plan.b0_gauss, 636.125, max_relative = 1e-12);
        assert_relative_eq!(plan.a0_bohr, 27.5 / 7.0, max_relative = 1e-12);
        assert_relative_eq!(plan.ratio, 0.8, max_relative = 1e-12);
        // For this self-consistent target the depth rule and the 10% field
        // fraction give the same ripple.
        assert_relative_eq!(plan.b_gauss, 9.8875, max_relative = 1e-10);

        let by_fraction = plan_field(&li7(), 27.5 / 7.0, AmplitudeRule::FieldFraction(0.1)).unwrap();
        assert_relative_eq!(by_fraction.b_gauss, plan.b_gauss, max_relative = 1e-10);
    }

    #[test]
    fn plan_field_rejects_background_target() {
        assert!(plan_field(&li7(), -27.5, AmplitudeRule::ModulationDepth(0.5)).is_err());
    }

    #[test]
    fn plan_field_enforces_expansion_bound() {
        // Demanding a huge modulation depth needs a ripple beyond 20% of the
        // pole distance.
        let err = plan_field(&li7(), 27.5 / 7.0, AmplitudeRule::ModulationDepth(5.0)).unwrap_err();
        assert!(err.to_string().contains("expansion bound"));
    }

    #[test]
    fn coupling_plans_reproduce_closed_branch_algebra() {
        // With depth r and fraction f the bias branch with a0 > 0 satisfies
        // x = Delta/(B0-B_res) = r/(r + sign(a_nr) f); for r = 0.8, f = 0.1
        // that is 8/7 (attractive background) or 8/9 (repulsive). All the
        // frozen numbers below follow from that by hand.
        let reg = SpeciesRegistry::builtin();
        let omega_r = units::angular_from_hz(120.0);
        let cases = [
            // (name, b0, b, a0_bohr, n_atoms)
            ("rb85", 164.3625, -0.93625, 443.0 / 7.0, 1656.8),
            ("rb87", 1007.53125, 0.019125, 100.0 / 9.0, 9322.4),
            ("li7", 636.125, 9.8875, 27.5 / 7.0, 92947.0),
            ("k39", 357.9, 4.55, 23.0 / 7.0, 47083.0),
        ];
        for (name, b0, b, a0, n) in cases {
            let entry = reg.get(name).unwrap();
            let mp = plan_for_coupling(name, entry, 70.0, omega_r, 0.8, 0.1).unwrap();
            assert_relative_eq!(mp.plan.b0_gauss, b0, max_relative = 1e-10);
            assert_relative_eq!(mp.plan.b_gauss, b, max_relative = 1e-10);
            assert_relative_eq!(mp.plan.a0_bohr, a0, max_relative = 1e-10);
            assert_relative_eq!(mp.plan.ratio, 0.8, max_relative = 1e-10);
            assert_relative_eq!(mp.n_atoms, n, max_relative = 1e-3);
        }
    }

    #[test]
    fn atom_number_plan_for_li7() {
        // 1e5 atoms at g0 = 70 in a 120 Hz trap: a0 = 3.6514 Bohr radii,
        // bias 635.245 G, ripple 11.693 G per unit modulation depth.
        let reg = SpeciesRegistry::builtin();
        let entry = reg.get("li7").unwrap();
        let mp =
            plan_for_atom_number("li7", entry, 70.0, units::angular_from_hz(120.0), 1e5, 1.0)
                .unwrap();
        assert_relative_eq!(mp.plan.a0_bohr, 3.6514, max_relative = 1e-4);
        assert_relative_eq!(mp.plan.b0_gauss, 635.245, max_relative = 1e-5);
        assert_relative_eq!(mp.plan.b_gauss, 11.693, max_relative = 1e-4);
    }

    #[test]
    fn registry_toml_round_trip() {
        let reg = SpeciesRegistry::builtin();
        let text = reg.to_toml_string().unwrap();
        let back = SpeciesRegistry::from_toml_str(&text).unwrap();
        assert_eq!(reg, back);
        assert!(SpeciesRegistry::from_toml_str("[x]\nbad = 1").is_err());
    }

    #[test]
    fn unknown_species_lists_alternatives() {
        let err = SpeciesRegistry::builtin().get("he3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("he3") && msg.contains("li7"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // plan_field followed by linearize_modulation is self-consistent:
            // the planned bias reproduces the requested a0 and depth.
            #[test]
            fn plan_round_trip(
                target in 0.5_f64..80.0,
                depth in 0.01_f64..1.2,
            ) {
                let p = li7();
                if let Ok(plan) = plan_field(&p, target, AmplitudeRule::ModulationDepth(depth)) {
                    let lin = linearize_modulation(&p, plan.b0_gauss, plan.b_gauss).unwrap();
                    prop_assert!((lin.a0_bohr - target).abs() < 1e-9 * target);
                    prop_assert!((lin.a_bohr / lin.a0_bohr - depth).abs() < 1e-9);
                }
            }
        }
    }
}
