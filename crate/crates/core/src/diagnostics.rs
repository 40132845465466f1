//! Moments, weak-form functionals and certificates for the moment inequalities
//! satisfied by every solution of the truncated system.
//!
//! Each `check_*` function instantiates one inequality on a trajectory and
//! returns a [`BoundReport`] with both sides, the margin and the tolerance
//! that decided the verdict. Integrals come from the integrator's
//! accumulators; only the residual checks use grid quadrature.
//!
//! Weak form used by [`weak_form_residual`], for nonnegative `ψ`:
//!
//! ```text
//! Σ ψ_i ω_i |_{t1}^{t2} = ∫ Σ_{i<n} (ψ_{i+1} − ψ_i) ω_i S_i
//!                        − ∫ ψ_n ω_n S_n
//!                        − ∫ Σ_i ψ_i ω_i F_i
//! ```
//!
//! where `S_i = Σ_{j≤i} jΛ(i,j)ω_j` and `F_i = Σ_{j≥i} Λ(i,j)ω_j`. This is the
//! system summed against `ψ`; note the boundary term carries the full sum over
//! `j ≤ n` and the weight `ψ_n ω_n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{trapezoid, IntegrationError, Sample, Trajectory};
use crate::kernel::{classify_kernel, KernelError};
use crate::system::{Rhs, State, Sums, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("check not applicable: {0}")]
    Inapplicable(String),
    #[error("tail cutoff r = {0} was not registered before integration")]
    CutoffNotRegistered(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `Σ i^m ω_i`.
pub fn moment(state: &State, m: f64) -> f64 {
    moment_of(&state.omega, m)
}

pub fn moment_of(omega: &[f64], m: f64) -> f64 {
    if m == 0.0 {
        omega.iter().sum()
    } else if m == 1.0 {
        omega.iter().enumerate().map(|(k, w)| (k + 1) as f64 * w).sum()
    } else {
        omega.iter().enumerate().map(|(k, w)| ((k + 1) as f64).powf(m) * w).sum()
    }
}

fn m0(s: &Sample) -> f64 {
    moment_of(&s.omega, 0.0)
}

fn m1(s: &Sample) -> f64 {
    moment_of(&s.omega, 1.0)
}

/// Weights `ψ_i` for the weak form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestSequence {
    ConstantOne,
    Identity,
    /// `min(i, r)`
    Capped(usize),
    /// `i^η`
    Power(f64),
    Custom(Vec<f64>),
}

impl TestSequence {
    pub fn values(&self, n: usize) -> Result<Vec<f64>, CheckError> {
        let v: Vec<f64> = match self {
            TestSequence::ConstantOne => vec![1.0; n],
            TestSequence::Identity => (1..=n).map(|i| i as f64).collect(),
            TestSequence::Capped(r) => (1..=n).map(|i| i.min(*r) as f64).collect(),
            TestSequence::Power(eta) => (1..=n).map(|i| (i as f64).powf(*eta)).collect(),
            TestSequence::Custom(values) => {
                if values.len() < n {
                    return Err(CheckError::InvalidParameter(format!(
                        "custom test sequence has {} entries, need {n}",
                        values.len()
                    )));
                }
                values[..n].to_vec()
            }
        };
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(CheckError::InvalidParameter("test sequence must be nonnegative".into()));
        }
        Ok(v)
    }
}

/// Right-hand side of the weak form at one instant.
fn weak_form_integrand(rhs: &Rhs, sums: &mut Sums, psi: &[f64], omega: &[f64]) -> f64 {
    let n = omega.len();
    rhs.fill_sums(omega, sums);
    let mut transfer = 0.0;
    for i in 0..n - 1 {
        transfer += (psi[i + 1] - psi[i]) * omega[i] * sums.gain[i];
    }
    let boundary = psi[n - 1] * omega[n - 1] * sums.gain[n - 1];
    let mut breakup = 0.0;
    for i in 0..n {
        breakup += psi[i] * omega[i] * sums.loss[i];
    }
    transfer - boundary - breakup
}

/// `Σψω(t2) − Σψω(t1) − ∫ (weak-form right-hand side)`, trapezoid on the grid.
pub fn weak_form_residual(traj: &Trajectory, psi: &TestSequence, t1: f64, t2: f64) -> Result<f64, CheckError> {
    let n = traj.n;
    let psi = psi.values(n)?;
    let rhs = Rhs::new(&traj.spec, n)?;
    let mut sums = Sums::new(n);
    let integral = trapezoid(traj, t1, t2, |s| weak_form_integrand(&rhs, &mut sums, &psi, &s.omega))?;
    let pair = |s: &Sample| -> f64 { psi.iter().zip(&s.omega).map(|(p, w)| p * w).sum() };
    let a = traj.sample_index(t1)?;
    let b = traj.sample_index(t2)?;
    Ok(pair(&traj.samples[b]) - pair(&traj.samples[a]) - integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundId {
    /// Mass is nonincreasing.
    #[serde(rename = "EST1")]
    Est1,
    /// Number decay plus the integral of `(Σθω)²`.
    #[serde(rename = "EST2")]
    Est2,
    /// Tail of `(Σθω)²` controlled by the `η`-moment.
    #[serde(rename = "EST3")]
    Est3,
    /// Tail coagulation integral controlled by mass.
    #[serde(rename = "TAILEST")]
    TailEst,
    /// `M₁(t) ≤ (2/B) M₀(0)^{1/2} t^{-1/2}`.
    #[serde(rename = "MASSRBND")]
    MassRBnd,
    /// `∫ M₁² ≤ D M₁(0)`.
    #[serde(rename = "GEL_M1INT")]
    GelM1Int,
    /// `M₁(t) ≤ (2 M₁(0)/(ζ t))^{1/2}`.
    #[serde(rename = "GEL_PRODUCT")]
    GelProduct,
    /// The mass bound read as independent of `M₁(0)`.
    #[serde(rename = "GEL_INFMASS")]
    GelInfMass,
    /// `M₀` nonincreasing and `∫ M₀² ≤ (2/C) M₀(0)`.
    #[serde(rename = "APPENDIX_M0")]
    AppendixM0,
    /// `M₁(t) ≤ M₁(0)`.
    #[serde(rename = "AMC")]
    Amc,
    /// `M₁(t)` finite for `t > 0`.
    #[serde(rename = "FM")]
    Fm,
}

impl BoundId {
    pub const ALL: [BoundId; 11] = [
        BoundId::Est1,
        BoundId::Est2,
        BoundId::Est3,
        BoundId::TailEst,
        BoundId::MassRBnd,
        BoundId::GelM1Int,
        BoundId::GelProduct,
        BoundId::GelInfMass,
        BoundId::AppendixM0,
        BoundId::Amc,
        BoundId::Fm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundId::Est1 => "EST1",
            BoundId::Est2 => "EST2",
            BoundId::Est3 => "EST3",
            BoundId::TailEst => "TAILEST",
            BoundId::MassRBnd => "MASSRBND",
            BoundId::GelM1Int => "GEL_M1INT",
            BoundId::GelProduct => "GEL_PRODUCT",
            BoundId::GelInfMass => "GEL_INFMASS",
            BoundId::AppendixM0 => "APPENDIX_M0",
            BoundId::Amc => "AMC",
            BoundId::Fm => "FM",
        }
    }

    pub fn parse(s: &str) -> Option<BoundId> {
        BoundId::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

impl std::fmt::Display for BoundId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub params: BTreeMap<String, f64>,
    pub tolerance_used: f64,
}

impl BoundReport {
    fn new(bound_id: BoundId, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        BoundReport {
            bound_id,
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs + tolerance,
            params: BTreeMap::new(),
            tolerance_used: tolerance,
        }
    }

    fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// `rhs + tolerance − lhs`; negative means failure.
    pub fn slack(&self) -> f64 {
        self.rhs + self.tolerance_used - self.lhs
    }

    /// The clause with the least slack.
    fn worst(clauses: Vec<BoundReport>) -> BoundReport {
        clauses
            .into_iter()
            .min_by(|a, b| a.slack().total_cmp(&b.slack()))
            .expect("at least one clause")
    }
}

/// `1e-7·|rhs| + 10·(abs_tol + rel_tol·|rhs|)`.
pub fn default_tolerance(traj: &Trajectory, rhs: f64) -> f64 {
    let (rel, abs) = traj.config.tolerance_scale();
    let scale = if rhs.is_finite() { rhs.abs() } else { 0.0 };
    1e-7 * scale + 10.0 * (abs + rel * scale)
}

fn report(traj: &Trajectory, id: BoundId, lhs: f64, rhs: f64) -> BoundReport {
    BoundReport::new(id, lhs, rhs, default_tolerance(traj, rhs))
}

fn pair(traj: &Trajectory, t1: f64, t2: f64) -> Result<(usize, usize), CheckError> {
    if !(t1 <= t2) {
        return Err(CheckError::InvalidParameter(format!("need t1 <= t2, got {t1} > {t2}")));
    }
    Ok((traj.sample_index(t1)?, traj.sample_index(t2)?))
}

/// `M₁(t2) ≤ M₁(t1) ≤ M₁(0)`.
pub fn check_est1(traj: &Trajectory, t1: f64, t2: f64) -> Result<BoundReport, CheckError> {
    let (a, b) = pair(traj, t1, t2)?;
    let s = &traj.samples;
    let step = report(traj, BoundId::Est1, m1(&s[b]), m1(&s[a])).param("clause", 1.0);
    let from_initial = report(traj, BoundId::Est1, m1(&s[a]), m1(&s[0])).param("clause", 2.0);
    Ok(BoundReport::worst(vec![step, from_initial]).param("t1", t1).param("t2", t2))
}

/// `M₀(t2) + ½∫_{t1}^{t2} (Σθω)² ≤ M₀(t1)`, and `≤ M₀(0)`.
pub fn check_est2(traj: &Trajectory, t1: f64, t2: f64) -> Result<BoundReport, CheckError> {
    let (a, b) = pair(traj, t1, t2)?;
    let s = &traj.samples;
    let lhs = m0(&s[b]) + 0.5 * (s[b].acc.theta_sq - s[a].acc.theta_sq);
    let step = report(traj, BoundId::Est2, lhs, m0(&s[a])).param("clause", 1.0);
    let from_initial = report(traj, BoundId::Est2, lhs, m0(&s[0])).param("clause", 2.0);
    Ok(BoundReport::worst(vec![step, from_initial]).param("t1", t1).param("t2", t2))
}

/// `∫_{t1}^{t2} (Σ_{i≥r} θω)² ≤ 2 (Σ i^η ω_i(t1)) r^{-η}`.
pub fn check_est3(traj: &Trajectory, r: usize, eta: f64, t1: f64, t2: f64) -> Result<BoundReport, CheckError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(CheckError::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    let slot = traj.cutoff_slot(r).ok_or(CheckError::CutoffNotRegistered(r))?;
    let (a, b) = pair(traj, t1, t2)?;
    let s = &traj.samples;
    let lhs = s[b].acc.tail_theta_sq[slot] - s[a].acc.tail_theta_sq[slot];
    let rhs = 2.0 * moment_of(&s[a].omega, eta) * (r as f64).powf(-eta);
    Ok(report(traj, BoundId::Est3, lhs, rhs)
        .param("r", r as f64)
        .param("eta", eta)
        .param("t1", t1)
        .param("t2", t2))
}

/// `∫_{t1}^{t2} Σ_{i≥r} Σ_{j≥r} Λωω ≤ (2/r) M₁(t1)`.
pub fn check_tailest(traj: &Trajectory, r: usize, t1: f64, t2: f64) -> Result<BoundReport, CheckError> {
    let slot = traj.cutoff_slot(r).ok_or(CheckError::CutoffNotRegistered(r))?;
    let (a, b) = pair(traj, t1, t2)?;
    let s = &traj.samples;
    let lhs = s[b].acc.tail_coag[slot] - s[a].acc.tail_coag[slot];
    let rhs = 2.0 / r as f64 * m1(&s[a]);
    Ok(report(traj, BoundId::TailEst, lhs, rhs).param("r", r as f64).param("t1", t1).param("t2", t2))
}

/// `θ_i ≥ B·i` constant over the trajectory's truncation range, if certified.
pub fn linear_growth_constant(traj: &Trajectory) -> Result<f64, CheckError> {
    let class = classify_kernel(&traj.spec, traj.n.max(8))?;
    class.linear_lower_bound().ok_or_else(|| {
        CheckError::Inapplicable(format!(
            "theta(i)/i has no certified positive lower bound (probe min {}, decaying: {})",
            class.b, class.sublinear_trend
        ))
    })
}

fn positive_time(t: f64) -> Result<(), CheckError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(CheckError::InvalidParameter(format!("t must be positive, got {t}")))
    }
}

/// `M₁(t) ≤ (2/B) M₀(0)^{1/2} t^{-1/2}`.
pub fn check_massrbnd(traj: &Trajectory, t: f64) -> Result<BoundReport, CheckError> {
    positive_time(t)?;
    let b = linear_growth_constant(traj)?;
    let k = traj.sample_index(t)?;
    let lhs = m1(&traj.samples[k]);
    let rhs = 2.0 / b * m0(traj.first()).sqrt() / t.sqrt();
    Ok(report(traj, BoundId::MassRBnd, lhs, rhs).param("B", b).param("t", t))
}

/// Same inequality as [`check_massrbnd`], reported with the initial mass to
/// show the bound does not depend on it.
pub fn check_gel_infmass(traj: &Trajectory, t: f64) -> Result<BoundReport, CheckError> {
    let mut r = check_massrbnd(traj, t)?;
    r.bound_id = BoundId::GelInfMass;
    Ok(r.param("initial_mass", m1(traj.first())).param("initial_number", m0(traj.first())))
}

/// `M₁(t) ≤ (2 M₁(0) / (ζ t))^{1/2}`.
pub fn check_gel_product(traj: &Trajectory, zeta: f64, t: f64) -> Result<BoundReport, CheckError> {
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(CheckError::InvalidParameter(format!("zeta must be positive, got {zeta}")));
    }
    positive_time(t)?;
    let k = traj.sample_index(t)?;
    let lhs = m1(&traj.samples[k]);
    let rhs = (2.0 * m1(traj.first()) / (zeta * t)).sqrt();
    Ok(report(traj, BoundId::GelProduct, lhs, rhs).param("zeta", zeta).param("t", t))
}

/// `Σ_{i≥1} i^{-s}` for `s > 1`, by Euler–Maclaurin after 64 explicit terms.
pub fn zeta_series(s: f64) -> f64 {
    assert!(s > 1.0, "series diverges for s <= 1");
    const N: usize = 64;
    let head: f64 = (1..N).map(|i| (i as f64).powf(-s)).sum();
    let nf = N as f64;
    let ns = nf.powf(-s);
    let tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * ns + s / 12.0 * ns / nf
        - s * (s + 1.0) * (s + 2.0) / 720.0 * ns / nf.powi(3)
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * ns / nf.powi(5);
    head + tail
}

/// `D = 2ȷ²/C` with `ȷ = Σ i^{-(κ₀+1)/2}`.
pub fn m1_integral_constant(c: f64, kappa0: f64) -> f64 {
    let j = zeta_series((kappa0 + 1.0) / 2.0);
    2.0 * j * j / c
}

/// `∫_0^T M₁² ≤ D·M₁(0)`.
pub fn check_m1_square_integral(traj: &Trajectory, c: f64, kappa0: f64) -> Result<BoundReport, CheckError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(CheckError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if !(kappa0 > 1.0 && kappa0 < 2.0) {
        return Err(CheckError::InvalidParameter(format!("kappa0 must lie in (1, 2), got {kappa0}")));
    }
    let d = m1_integral_constant(c, kappa0);
    let lhs = traj.last().acc.m1_sq;
    let rhs = d * m1(traj.first());
    Ok(report(traj, BoundId::GelM1Int, lhs, rhs)
        .param("C", c)
        .param("kappa0", kappa0)
        .param("D", d)
        .param("T", traj.last().t))
}

/// `M₀` nonincreasing on the samples up to `t_end` and `∫_0^{t_end} M₀² ≤ (2/C) M₀(0)`,
/// where `Λ ≥ C` uniformly.
pub fn check_appendix_m0(traj: &Trajectory, c: f64, t_end: f64) -> Result<BoundReport, CheckError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(CheckError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let b = traj.sample_index(t_end)?;
    let s = &traj.samples;
    let m0_init = m0(&s[0]);
    let rise = s[..=b].windows(2).map(|w| m0(&w[1]) - m0(&w[0])).fold(f64::NEG_INFINITY, f64::max);
    let rise = if rise.is_finite() { rise } else { 0.0 };
    let monotone = BoundReport::new(BoundId::AppendixM0, rise, 0.0, 1e-9 * m0_init).param("clause", 1.0);
    let integral = report(traj, BoundId::AppendixM0, s[b].acc.m0_sq, 2.0 / c * m0_init).param("clause", 2.0);
    Ok(BoundReport::worst(vec![monotone, integral]).param("C", c).param("T", t_end))
}

/// `max_t M₁(t) ≤ M₁(0)`.
pub fn check_amc(traj: &Trajectory) -> Result<BoundReport, CheckError> {
    let lhs = traj.samples.iter().map(m1).fold(f64::NEG_INFINITY, f64::max);
    Ok(report(traj, BoundId::Amc, lhs, m1(traj.first())))
}

/// `sup_{t ≥ t_1} M₁(t)` is finite, certified by the explicit mass bound at
/// the first positive sample time `t_1`.
pub fn check_fm(traj: &Trajectory) -> Result<BoundReport, CheckError> {
    let t1 = traj.samples.get(1).map(|s| s.t).ok_or_else(|| {
        CheckError::InvalidParameter("trajectory has no positive sample time".into())
    })?;
    let b = linear_growth_constant(traj)?;
    let lhs = traj.samples[1..].iter().map(m1).fold(f64::NEG_INFINITY, f64::max);
    let rhs = 2.0 / b * m0(traj.first()).sqrt() / t1.sqrt();
    Ok(report(traj, BoundId::Fm, lhs, rhs).param("B", b).param("t1", t1))
}

/// First time `M₁` drops below `(1 − δ) M₁(0)`, interpolated linearly between samples.
pub fn estimate_gelation_time(traj: &Trajectory, delta: f64) -> Result<Option<f64>, CheckError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CheckError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let masses: Vec<f64> = traj.samples.iter().map(m1).collect();
    let threshold = (1.0 - delta) * masses[0];
    if masses[0] <= 0.0 {
        return Ok(None);
    }
    for k in 1..masses.len() {
        if masses[k] < threshold {
            let (t0, t1) = (traj.samples[k - 1].t, traj.samples[k].t);
            let frac = (masses[k - 1] - threshold) / (masses[k - 1] - masses[k]);
            return Ok(Some(t0 + frac * (t1 - t0)));
        }
    }
    Ok(None)
}
