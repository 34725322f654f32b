//! Cycle-averaged population imbalance and its jump across the drive
//! strength.
//!
//! The scalar tracked across parameter sweeps is
//!
//! ```text
//! eta = < n_0 - n_p >,
//! ```
//!
//! the time average of the population imbalance over a whole number of
//! beat cycles. An undriven condensate keeps `eta = 1`; strong enough
//! modulation drags it down and, past a threshold, the drop becomes a
//! discontinuous step. Averaging over full cycles matters: a partial cycle
//! biases the mean by an amount comparable to the oscillation amplitude,
//! which is exactly the signal the sweep is trying to resolve.
//!
//! The cycle length is estimated from the autocorrelation of the ground
//! occupation series: first zero crossing, then the strongest revival
//! beyond it, refined by a parabolic fit. Trajectories without a clear
//! revival fall back to a full-horizon average and say so in their flag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlaps::OverlapTable;
use crate::parallel::map_slice;
use crate::twomode::{integrate, DriveParams, IntegrationParams, TwoModeState, TwoModeTrajectory};

/// How trustworthy one imbalance estimate is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateFlag {
    /// Clear periodicity; averaged over whole cycles.
    Clean,
    /// No reliable revival in the autocorrelation; full-horizon average.
    WeakPeriodicity,
    /// The series never moved; the instantaneous imbalance is exact.
    Degenerate,
}

impl EstimateFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateFlag::Clean => "clean",
            EstimateFlag::WeakPeriodicity => "weak_periodicity",
            EstimateFlag::Degenerate => "degenerate",
        }
    }
}

/// Cycle-averaged imbalance extracted from one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub eta: f64,
    /// Beat period in trap units, when one was detected.
    pub period_estimate: Option<f64>,
    /// Whole cycles entering the average (0 for fallback paths).
    pub cycles_used: u32,
    pub flag: EstimateFlag,
}

/// Largest prefix of the sample grid with uniform spacing; the integrator
/// appends an off-stride endpoint when the horizon is not a stride multiple.
fn uniform_prefix(tau: &[f64]) -> usize {
    if tau.len() < 2 {
        return tau.len();
    }
    let h = tau[1] - tau[0];
    let mut len = 2;
    while len < tau.len() {
        let expected = tau[len - 1] + h;
        if (tau[len] - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            break;
        }
        len += 1;
    }
    len
}

/// Extract the cycle-averaged imbalance from a sampled trajectory.
pub fn eta_from_trajectory(traj: &TwoModeTrajectory) -> Result<EtaEstimate> {
    let n0 = traj.occupation_ground();
    let np = traj.occupation_excited();
    let len = uniform_prefix(&traj.tau);
    if len < 8 {
        return Err(Error::parameter(
            "trajectory too short for a cycle average; need at least 8 uniform samples",
        ));
    }
    let h = traj.tau[1] - traj.tau[0];

    let moved = n0[..len]
        .iter()
        .map(|&x| (x - n0[0]).abs())
        .fold(0.0_f64, f64::max);
    if moved < 1e-12 {
        return Ok(EtaEstimate {
            eta: n0[0] - np[0],
            period_estimate: None,
            cycles_used: 0,
            flag: EstimateFlag::Degenerate,
        });
    }

    let mean = n0[..len].iter().sum::<f64>() / len as f64;
    let x: Vec<f64> = n0[..len].iter().map(|v| v - mean).collect();
    let half = len / 2;
    let autocorr: Vec<f64> = (0..=half)
        .map(|k| (0..len - k).map(|i| x[i] * x[i + k]).sum::<f64>())
        .collect();
    let c0 = autocorr[0];

    let full_horizon = || {
        let eta = (0..len).map(|i| n0[i] - np[i]).sum::<f64>() / len as f64;
        EtaEstimate {
            eta,
            period_estimate: None,
            cycles_used: 0,
            flag: EstimateFlag::WeakPeriodicity,
        }
    };

    let Some(zero) = autocorr.iter().position(|&c| c <= 0.0) else {
        return Ok(full_horizon());
    };
    let revival = (zero + 1..=half)
        .max_by(|&a, &b| autocorr[a].total_cmp(&autocorr[b]))
        .unwrap_or(zero);
    if revival + 1 > half || autocorr[revival] / c0 < 0.5 {
        return Ok(full_horizon());
    }

    // Parabolic refinement of the revival peak.
    let (cm, cc, cp) = (
        autocorr[revival - 1],
        autocorr[revival],
        autocorr[revival + 1],
    );
    let denom = cm - 2.0 * cc + cp;
    let shift = if denom.abs() > 1e-300 {
        (0.5 * (cm - cp) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let period = (revival as f64 + shift) * h;

    let span = traj.tau[len - 1] - traj.tau[0];
    let cycles = (span / period).floor();
    if cycles < 1.0 {
        return Ok(full_horizon());
    }
    let window = ((cycles * period / h).round() as usize).clamp(1, len);
    let eta = (0..window).map(|i| n0[i] - np[i]).sum::<f64>() / window as f64;

    Ok(EtaEstimate {
        eta,
        period_estimate: Some(period),
        cycles_used: cycles as u32,
        flag: EstimateFlag::Clean,
    })
}

/// One sweep sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaPoint {
    pub ratio: f64,
    pub eta: f64,
    pub period_estimate: Option<f64>,
    pub cycles_used: u32,
    pub flag: EstimateFlag,
}

/// A ratio the sweep could not evaluate, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub ratio: f64,
    pub message: String,
}

/// Imbalance across a grid of drive strengths at fixed detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub delta: f64,
    pub points: Vec<EtaPoint>,
    pub failures: Vec<SweepFailure>,
}

/// Evaluate the imbalance over a grid of modulation ratios. Each grid point
/// integrates an independent trajectory from a pure ground state, so the
/// work parallelizes over the grid; per-point failures are collected rather
/// than aborting the sweep.
pub fn sweep_ratios(
    table: &OverlapTable,
    delta: f64,
    ratios: &[f64],
    params: &IntegrationParams,
) -> SweepResult {
    let outcomes = map_slice(ratios, |&ratio| {
        let drive = DriveParams { ratio, delta };
        integrate(table, &drive, &TwoModeState::ground_only(), params)
            .and_then(|traj| eta_from_trajectory(&traj))
            .map(|est| EtaPoint {
                ratio,
                eta: est.eta,
                period_estimate: est.period_estimate,
                cycles_used: est.cycles_used,
                flag: est.flag,
            })
            .map_err(|e| (ratio, e.to_string()))
    });
    let mut points = Vec::with_capacity(ratios.len());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(point) => points.push(point),
            Err((ratio, message)) => failures.push(SweepFailure { ratio, message }),
        }
    }
    SweepResult {
        delta,
        points,
        failures,
    }
}

/// Uniform ratio grid, endpoints included.
pub fn ratio_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && stop >= start && start.is_finite()) {
        return Err(Error::parameter("ratio grid needs start <= stop, step > 0"));
    }
    let count = ((stop - start) / step).round() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Smooth crossover or discontinuous step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionClass {
    Smooth,
    Step,
}

impl TransitionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionClass::Smooth => "smooth",
            TransitionClass::Step => "step",
        }
    }
}

/// Classified sweep: where the imbalance changes sign and how abruptly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCurve {
    pub delta: f64,
    /// Midpoint of the first adjacent pair bracketing a sign change.
    pub critical_ratio: Option<f64>,
    /// Largest imbalance change between adjacent grid points.
    pub max_jump: f64,
    pub class: TransitionClass,
    /// Jump size above which the transition counts as a step.
    pub threshold: f64,
}

/// Default step-detection threshold on the adjacent-point jump.
pub const DEFAULT_STEP_THRESHOLD: f64 = 0.3;

/// Classify a sweep. Requires at least 20 evaluated points so a single
/// noisy pair cannot masquerade as a transition.
pub fn classify_transition(sweep: &SweepResult, threshold: f64) -> Result<EtaCurve> {
    if sweep.points.len() < 20 {
        return Err(Error::parameter(format!(
            "classification needs at least 20 sweep points, got {}",
            sweep.points.len()
        )));
    }
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::parameter("step threshold must be positive"));
    }
    let mut max_jump = 0.0_f64;
    let mut critical_ratio = None;
    for pair in sweep.points.windows(2) {
        let jump = (pair[1].eta - pair[0].eta).abs();
        max_jump = max_jump.max(jump);
        if critical_ratio.is_none() && pair[0].eta > 0.0 && pair[1].eta <= 0.0 {
            critical_ratio = Some(0.5 * (pair[0].ratio + pair[1].ratio));
        }
    }
    let class = if max_jump > threshold {
        TransitionClass::Step
    } else {
        TransitionClass::Smooth
    };
    Ok(EtaCurve {
        delta: sweep.delta,
        critical_ratio,
        max_jump,
        class,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{solve_mode, ModeIndex, SolveOptions};
    use crate::overlaps::build_table;
    use crate::twomode::phase_shifts;
    use approx::assert_relative_eq;

    fn table() -> OverlapTable {
        let g = solve_mode(70.0, 0.2, ModeIndex::GROUND, SolveOptions::default()).unwrap();
        let p = solve_mode(70.0, 0.2, ModeIndex::RADIAL_DIPOLE, SolveOptions::default()).unwrap();
        build_table(&g, &p).unwrap()
    }

    fn run(ratio: f64, delta: f64, params: &IntegrationParams) -> EtaEstimate {
        let t = table();
        let traj = integrate(
            &t,
            &DriveParams { ratio, delta },
            &TwoModeState::ground_only(),
            params,
        )
        .unwrap();
        eta_from_trajectory(&traj).unwrap()
    }

    #[test]
    fn undriven_imbalance_is_exactly_one() {
        let est = run(0.0, 0.0, &IntegrationParams::default());
        assert_eq!(est.eta, 1.0);
        assert_eq!(est.flag, EstimateFlag::Degenerate);
        assert_eq!(est.cycles_used, 0);
    }

    #[test]
    fn weak_drive_matches_linear_average() {
        // Averaged over whole beats, <n_p> = 2 alpha^2 in the linear
        // regime, so eta = 1 - 4 alpha^2.
        let t = table();
        let (_, chi_p) = phase_shifts(&t);
        let ratio = 0.01;
        let alpha = 0.5 * t.g0 * ratio * t.i_p00 / (0.0 - chi_p);
        let est = run(ratio, 0.0, &IntegrationParams::default());
        assert_eq!(est.flag, EstimateFlag::Clean);
        let period = est.period_estimate.unwrap();
        assert_relative_eq!(
            period,
            2.0 * std::f64::consts::PI / chi_p.abs(),
            max_relative = 0.05
        );
        assert!(est.cycles_used >= 5);
        assert_relative_eq!(1.0 - est.eta, 4.0 * alpha * alpha, max_relative = 0.2);
    }

    #[test]
    fn moderate_drive_is_periodic_and_bounded() {
        let est = run(0.7, 0.0, &IntegrationParams::default());
        assert_eq!(est.flag, EstimateFlag::Clean);
        assert!(est.eta < 1.0);
        assert!(est.eta > -1.0);
        assert!(est.cycles_used >= 3);
    }

    #[test]
    fn stride_choice_does_not_move_the_average() {
        let coarse = run(
            0.7,
            0.0,
            &IntegrationParams {
                stride: 100,
                ..Default::default()
            },
        );
        let fine = run(
            0.7,
            0.0,
            &IntegrationParams {
                stride: 50,
                ..Default::default()
            },
        );
        assert!(
            (coarse.eta - fine.eta).abs() < 1e-3,
            "{} vs {}",
            coarse.eta,
            fine.eta
        );
    }

    #[test]
    fn doubling_the_horizon_does_not_move_the_average() {
        let short = run(0.7, 0.0, &IntegrationParams::default());
        let long = run(
            0.7,
            0.0,
            &IntegrationParams {
                tau_max: 400.0,
                ..Default::default()
            },
        );
        assert!(
            (short.eta - long.eta).abs() < 1e-2,
            "{} vs {}",
            short.eta,
            long.eta
        );
    }

    #[test]
    fn weak_drive_average_decreases_with_strength() {
        let mut last = f64::INFINITY;
        for ratio in [0.05, 0.1, 0.2, 0.3] {
            let est = run(ratio, 0.0, &IntegrationParams::default());
            assert!(
                est.eta < last,
                "eta not decreasing at ratio {ratio}: {} vs {last}",
                est.eta
            );
            last = est.eta;
        }
    }

    #[test]
    fn short_series_is_rejected() {
        let t = table();
        let traj = integrate(
            &t,
            &DriveParams {
                ratio: 0.5,
                delta: 0.0,
            },
            &TwoModeState::ground_only(),
            &IntegrationParams {
                dtau: 1e-3,
                tau_max: 0.2,
                stride: 100,
            },
        )
        .unwrap();
        assert!(eta_from_trajectory(&traj).is_err());
    }

    fn synthetic_sweep(etas: &[f64]) -> SweepResult {
        SweepResult {
            delta: 0.0,
            points: etas
                .iter()
                .enumerate()
                .map(|(i, &eta)| EtaPoint {
                    ratio: 0.5 + 0.01 * i as f64,
                    eta,
                    period_estimate: Some(10.0),
                    cycles_used: 10,
                    flag: EstimateFlag::Clean,
                })
                .collect(),
            failures: Vec::new(),
        }
    }

    #[test]
    fn classification_separates_smooth_from_step() {
        let smooth: Vec<f64> = (0..40).map(|i| 1.0 - 0.04 * i as f64).collect();
        let curve = classify_transition(&synthetic_sweep(&smooth), 0.3).unwrap();
        assert_eq!(curve.class, TransitionClass::Smooth);
        // eta touches zero exactly at index 25, so the bracketing pair is
        // (24, 25) and the reported crossing is its midpoint.
        let critical = curve.critical_ratio.unwrap();
        assert_relative_eq!(critical, 0.5 + 0.01 * 24.5, max_relative = 1e-9);
        assert!(curve.max_jump < 0.05);

        let step: Vec<f64> = (0..40)
            .map(|i| if i < 20 { 0.95 } else { -0.6 })
            .collect();
        let curve = classify_transition(&synthetic_sweep(&step), 0.3).unwrap();
        assert_eq!(curve.class, TransitionClass::Step);
        assert!(curve.max_jump > 1.0);
        assert_relative_eq!(
            curve.critical_ratio.unwrap(),
            0.5 + 0.01 * 19.5,
            max_relative = 1e-9
        );

        let no_crossing: Vec<f64> = (0..25).map(|i| 1.0 - 0.001 * i as f64).collect();
        let curve = classify_transition(&synthetic_sweep(&no_crossing), 0.3).unwrap();
        assert!(curve.critical_ratio.is_none());
    }

    #[test]
    fn classification_needs_enough_points() {
        let few: Vec<f64> = (0..10).map(|i| 1.0 - 0.1 * i as f64).collect();
        assert!(classify_transition(&synthetic_sweep(&few), 0.3).is_err());
    }

    #[test]
    fn sweep_collects_points_in_grid_order() {
        let t = table();
        let ratios = ratio_grid(0.0, 0.2, 0.05).unwrap();
        let result = sweep_ratios(
            &t,
            0.0,
            &ratios,
            &IntegrationParams {
                dtau: 1e-3,
                tau_max: 50.0,
                stride: 100,
            },
        );
        assert!(result.failures.is_empty());
        assert_eq!(result.points.len(), ratios.len());
        for (point, ratio) in result.points.iter().zip(&ratios) {
            assert_eq!(point.ratio, *ratio);
        }
        assert_eq!(result.points[0].eta, 1.0);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let grid = ratio_grid(0.5, 1.2, 0.005).unwrap();
        assert_eq!(grid.len(), 141);
        assert_eq!(grid[0], 0.5);
        assert!((grid[140] - 1.2).abs() < 1e-12);
        assert!(ratio_grid(1.0, 0.5, 0.1).is_err());
    }
}
