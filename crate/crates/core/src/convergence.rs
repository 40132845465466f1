//! Truncation-refinement studies and the fixed-step oracle comparison.
//!
//! A finite system loses mass only through its upper boundary, so mass loss
//! at fixed `n` mixes truncation effects with genuine transfer to infinitely
//! large clusters. Running the same problem for increasing `n` separates the
//! two: conserving kernels show losses that vanish as `n` grows, gelling
//! kernels show a loss time that stabilizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{estimate_gelation_time, moment_of, CheckError};
use crate::integrator::{integrate, uniform_grid, IntegrationError, IntegratorConfig, Trajectory};
use crate::kernel::KernelSpec;
use crate::system::{make_initial_state, InitialData, State, SystemError};

/// Components smaller than this fraction of `max ω(0)` are compared absolutely.
pub const DISCREPANCY_FLOOR: f64 = 1e-9;
/// Largest truncation size accepted by [`oracle_compare`].
pub const ORACLE_MAX_N: usize = 64;
/// Required agreement of the oracle with itself under step halving.
pub const ORACLE_SELF_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("oracle not converged: halving h changed it by {change:e} (limit {ORACLE_SELF_TOL:e})")]
    OracleInvalid { change: f64 },
    #[error("oracle comparison limited to n <= {ORACLE_MAX_N}, got {0}")]
    OracleTooLarge(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConservingTrend,
    GellingTrend,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest relative change of the last two gel-time estimates for a gelling trend.
    pub gel_time_rel_change: f64,
    /// Loss at the largest `n` must be below this fraction of the loss at the smallest.
    pub loss_ratio: f64,
    /// Slack on "retention nondecreasing in n".
    pub retention_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { gel_time_rel_change: 0.1, loss_ratio: 0.5, retention_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub t_end: f64,
    pub samples: usize,
    pub delta: f64,
    pub thresholds: Thresholds,
    /// Fixed RK4 step for the oracle; `None` skips the comparison.
    pub oracle_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<usize>,
    /// `M₁(T)/M₁(0)` per `n` (1 when `M₁(0) = 0`).
    pub mass_retention: Vec<f64>,
    /// Mass that left through the truncation boundary, relative to `M₁(0)`.
    pub boundary_loss: Vec<f64>,
    pub gel_times: Vec<Option<f64>>,
    pub classification: Classification,
    /// Adaptive vs fixed-step discrepancy, for `n ≤ 64` when requested.
    pub oracle_errors: Vec<Option<f64>>,
    pub delta: f64,
    pub thresholds: Thresholds,
    /// Integration failures, as `(n, message)`.
    pub failures: Vec<(usize, String)>,
}

struct RunSummary {
    retention: f64,
    boundary_loss: f64,
    gel_time: Option<f64>,
    oracle_error: Option<f64>,
}

fn summarize(traj: &Trajectory, delta: f64) -> Result<(f64, f64, Option<f64>), CheckError> {
    let initial = moment_of(&traj.first().omega, 1.0);
    let (retention, loss) = if initial > 0.0 {
        (moment_of(&traj.last().omega, 1.0) / initial, traj.last().acc.mass_outflux / initial)
    } else {
        (1.0, 0.0)
    };
    Ok((retention, loss, estimate_gelation_time(traj, delta)?))
}

fn classify(report: &ConvergenceReport) -> Classification {
    if !report.failures.is_empty() || report.n_list.len() < 2 {
        return Classification::Inconclusive;
    }
    let th = &report.thresholds;
    let gel: Option<Vec<f64>> = report.gel_times.iter().copied().collect();
    if let Some(gel) = gel {
        let (a, b) = (gel[gel.len() - 2], gel[gel.len() - 1]);
        if (b - a).abs() < th.gel_time_rel_change * a.abs().max(b.abs()) {
            return Classification::GellingTrend;
        }
    }
    let retention_up = report.mass_retention.windows(2).all(|w| w[1] >= w[0] - th.retention_tol);
    let first = report.boundary_loss[0];
    let last = *report.boundary_loss.last().unwrap();
    // No measurable loss at any size is the degenerate conserving case.
    let loss_shrinks = last < th.loss_ratio * first || (first == 0.0 && last == 0.0);
    if retention_up && loss_shrinks {
        Classification::ConservingTrend
    } else {
        Classification::Inconclusive
    }
}

/// Independent integrations of `family` truncated at each `n` in `sweep.n_list`.
///
/// The family is re-instantiated per `n`, so tails of power-law data gain
/// mass as `n` grows.
pub fn refine_in_n(
    spec: &KernelSpec,
    family: &InitialData,
    sweep: &SweepConfig,
    cfg: &IntegratorConfig,
) -> Result<ConvergenceReport, ConvergenceError> {
    if sweep.n_list.len() < 3 {
        return Err(ConvergenceError::InvalidSweep("n_list needs at least 3 entries".into()));
    }
    if sweep.n_list.windows(2).any(|w| w[1] <= w[0]) || sweep.n_list[0] == 0 {
        return Err(ConvergenceError::InvalidSweep("n_list must be strictly ascending and positive".into()));
    }
    if !(sweep.delta > 0.0 && sweep.delta < 1.0) {
        return Err(ConvergenceError::InvalidSweep(format!("delta must lie in (0, 1), got {}", sweep.delta)));
    }
    cfg.validate()?;
    family.validate()?;
    let grid = uniform_grid(sweep.t_end, sweep.samples);

    let runs: Vec<Result<RunSummary, ConvergenceError>> = sweep
        .n_list
        .par_iter()
        .map(|&n| {
            let init = make_initial_state(family, n)?;
            let traj = integrate(spec, &init, sweep.t_end, &grid, cfg, &[])?;
            let (retention, boundary_loss, gel_time) = summarize(&traj, sweep.delta)?;
            let oracle_error = match sweep.oracle_h {
                Some(h) if n <= ORACLE_MAX_N => Some(compare_with(&traj, spec, &init, sweep.t_end, &grid, h)?),
                _ => None,
            };
            Ok(RunSummary { retention, boundary_loss, gel_time, oracle_error })
        })
        .collect();

    let mut report = ConvergenceReport {
        n_list: Vec::new(),
        mass_retention: Vec::new(),
        boundary_loss: Vec::new(),
        gel_times: Vec::new(),
        classification: Classification::Inconclusive,
        oracle_errors: Vec::new(),
        delta: sweep.delta,
        thresholds: sweep.thresholds.clone(),
        failures: Vec::new(),
    };
    for (&n, run) in sweep.n_list.iter().zip(runs) {
        match run {
            Ok(r) => {
                report.n_list.push(n);
                report.mass_retention.push(r.retention);
                report.boundary_loss.push(r.boundary_loss);
                report.gel_times.push(r.gel_time);
                report.oracle_errors.push(r.oracle_error);
            }
            Err(e) => report.failures.push((n, e.to_string())),
        }
    }
    report.classification = classify(&report);
    Ok(report)
}

/// Max over samples and components of `|a − b| / max(|b|, floor)`, with
/// `floor = DISCREPANCY_FLOOR · max ω(0)`.
pub fn max_relative_discrepancy(a: &Trajectory, b: &Trajectory) -> f64 {
    let scale = a.first().omega.iter().copied().fold(0.0, f64::max);
    let floor = DISCREPANCY_FLOOR * scale;
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        for (x, y) in sa.omega.iter().zip(&sb.omega) {
            let den = y.abs().max(floor);
            if den > 0.0 {
                worst = worst.max((x - y).abs() / den);
            }
        }
    }
    worst
}

fn compare_with(
    adaptive: &Trajectory,
    spec: &KernelSpec,
    init: &State,
    t_end: f64,
    grid: &[f64],
    h: f64,
) -> Result<f64, ConvergenceError> {
    if init.n() > ORACLE_MAX_N {
        return Err(ConvergenceError::OracleTooLarge(init.n()));
    }
    let (coarse, fine) = rayon::join(
        || integrate(spec, init, t_end, grid, &IntegratorConfig::fixed_rk4(h), &[]),
        || integrate(spec, init, t_end, grid, &IntegratorConfig::fixed_rk4(h / 2.0), &[]),
    );
    let (coarse, fine) = (coarse?, fine?);
    let change = max_relative_discrepancy(&coarse, &fine);
    if change >= ORACLE_SELF_TOL {
        return Err(ConvergenceError::OracleInvalid { change });
    }
    Ok(max_relative_discrepancy(adaptive, &fine))
}

/// Discrepancy between an adaptive run and a classical RK4 run with step `h_oracle`.
pub fn oracle_compare(
    spec: &KernelSpec,
    init: &State,
    t_end: f64,
    grid: &[f64],
    cfg: &IntegratorConfig,
    h_oracle: f64,
) -> Result<f64, ConvergenceError> {
    if init.n() > ORACLE_MAX_N {
        return Err(ConvergenceError::OracleTooLarge(init.n()));
    }
    let adaptive = integrate(spec, init, t_end, grid, cfg, &[])?;
    compare_with(&adaptive, spec, init, t_end, grid, h_oracle)
}
