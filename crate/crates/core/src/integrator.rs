//! Time integration of the truncated system.
//!
//! The concentrations are integrated together with a set of running
//! time integrals (the accumulators). Each accumulator is an extra state
//! component whose derivative is a squared or bilinear functional of the
//! current concentrations, so the integrals are obtained with the same order
//! and error control as the solution itself.
//!
//! Two schemes are available: the Dormand–Prince 5(4) embedded pair with
//! mixed absolute/relative error control, and classical fixed-step RK4, used
//! as a brute-force reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelSpec;
use crate::system::{check_finite, Rhs, State, Sums, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid sample grid: {0}")]
    InvalidGrid(String),
    #[error("step size fell below h_min = {h_min:e} at t = {t} ({reason})")]
    StepUnderflow { t: f64, h_min: f64, reason: String, last_good: State },
    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64, last_good: State },
    #[error("need at least 4 samples in [{t1}, {t2}], found {found}")]
    InsufficientResolution { t1: f64, t2: f64, found: usize },
    #[error("time {0} is not a sample time of the trajectory")]
    NotASampleTime(f64),
    #[error("component index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
}

impl IntegrationError {
    /// Last accepted state for failures that happen mid-run.
    pub fn last_good(&self) -> Option<&State> {
        match self {
            IntegrationError::StepUnderflow { last_good, .. } | IntegrationError::NonFinite { last_good, .. } => {
                Some(last_good)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Dormand–Prince 5(4).
    AdaptiveEmbedded45,
    FixedRk4 { h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Negative excursions up to this size are clamped to zero.
    /// Defaults to `1e-12 · max ω(0)`.
    pub clamp_tol: Option<f64>,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: 1.0,
            clamp_tol: None,
            method: Method::AdaptiveEmbedded45,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(h: f64) -> Self {
        IntegratorConfig { method: Method::FixedRk4 { h }, ..Self::default() }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(IntegrationError::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("h_init", self.h_init)?;
        positive("h_min", self.h_min)?;
        positive("h_max", self.h_max)?;
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(IntegrationError::InvalidConfig(format!(
                "need h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if let Some(c) = self.clamp_tol {
            positive("clamp_tol", c)?;
        }
        if let Method::FixedRk4 { h } = self.method {
            positive("h", h)?;
        }
        Ok(())
    }

    /// Error scale of the run, used to size bound-check tolerances.
    pub fn tolerance_scale(&self) -> (f64, f64) {
        match self.method {
            Method::AdaptiveEmbedded45 => (self.rel_tol, self.abs_tol),
            // A fixed-step run carries no error estimate; use the configured tolerances.
            Method::FixedRk4 { .. } => (self.rel_tol, self.abs_tol),
        }
    }
}

/// Running time integrals from `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Accumulators {
    /// `∫ (Σ θ_i ω_i)² ds`
    pub theta_sq: f64,
    /// `∫ M₁² ds`
    pub m1_sq: f64,
    /// `∫ M₀² ds`
    pub m0_sq: f64,
    /// `∫ Σ_i Σ_{j≥i} Λ(i,j) ω_i ω_j ds`
    pub total_coag: f64,
    /// `∫ (n+1) ω_n Σ_j jΛ(n,j)ω_j ds`, the mass that leaves through the truncation.
    pub mass_outflux: f64,
    /// `∫ (Σ_{i≥r} θ_i ω_i)² ds`, aligned with the trajectory's cutoffs.
    pub tail_theta_sq: Vec<f64>,
    /// `∫ Σ_{i≥r} Σ_{j≥r} Λ(i,j) ω_i ω_j ds`, aligned with the trajectory's cutoffs.
    pub tail_coag: Vec<f64>,
}

const FIXED_SLOTS: usize = 5;

impl Accumulators {
    fn len(cutoffs: usize) -> usize {
        FIXED_SLOTS + 2 * cutoffs
    }

    fn from_slice(y: &[f64], cutoffs: usize) -> Self {
        Accumulators {
            theta_sq: y[0],
            m1_sq: y[1],
            m0_sq: y[2],
            total_coag: y[3],
            mass_outflux: y[4],
            tail_theta_sq: y[FIXED_SLOTS..FIXED_SLOTS + cutoffs].to_vec(),
            tail_coag: y[FIXED_SLOTS + cutoffs..FIXED_SLOTS + 2 * cutoffs].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub omega: Vec<f64>,
    pub acc: Accumulators,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
    /// Accepted steps on which at least one component was clamped to zero.
    pub clamped_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: KernelSpec,
    pub n: usize,
    pub cutoffs: Vec<usize>,
    pub config: IntegratorConfig,
    pub samples: Vec<Sample>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn state(&self, k: usize) -> State {
        State::new(self.samples[k].t, self.samples[k].omega.clone())
    }

    pub fn cutoff_slot(&self, r: usize) -> Option<usize> {
        self.cutoffs.iter().position(|c| *c == r)
    }

    /// Index of the sample at time `t` (matched to a relative `1e-12`).
    pub fn sample_index(&self, t: f64) -> Result<usize, IntegrationError> {
        let span = self.last().t.abs().max(1.0);
        let k = self.samples.partition_point(|s| s.t < t - 1e-12 * span);
        match self.samples.get(k) {
            Some(s) if (s.t - t).abs() <= 1e-12 * span => Ok(k),
            _ => Err(IntegrationError::NotASampleTime(t)),
        }
    }

    /// Sample index range covering `[t1, t2]`, with at least 4 samples.
    pub(crate) fn quadrature_range(&self, t1: f64, t2: f64) -> Result<(usize, usize), IntegrationError> {
        if !(t1 < t2) {
            return Err(IntegrationError::InsufficientResolution { t1, t2, found: 0 });
        }
        let a = self.sample_index(t1)?;
        let b = self.sample_index(t2)?;
        let found = b + 1 - a;
        if found < 4 {
            return Err(IntegrationError::InsufficientResolution { t1, t2, found });
        }
        Ok((a, b))
    }
}

/// `samples` equally spaced times covering `[0, t_end]`.
pub fn uniform_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let last = samples - 1;
    (0..samples)
        .map(|k| if k == last { t_end } else { t_end * k as f64 / last as f64 })
        .collect()
}

/// The truncated system augmented with its accumulators.
struct Augmented {
    rhs: Rhs,
    cutoffs: Vec<usize>,
    sums: Sums,
}

impl Augmented {
    fn dim(&self) -> usize {
        self.rhs.n() + Accumulators::len(self.cutoffs.len())
    }

    fn deriv(&mut self, y: &[f64], dy: &mut [f64]) {
        let n = self.rhs.n();
        let (omega, _) = y.split_at(n);
        let (domega, dacc) = dy.split_at_mut(n);
        self.rhs.fill_sums(omega, &mut self.sums);
        Rhs::assemble(omega, &self.sums, domega);

        let theta = self.rhs.theta();
        let mut theta_sum = 0.0;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut coag = 0.0;
        for i in 0..n {
            theta_sum += theta[i] * omega[i];
            m0 += omega[i];
            m1 += (i + 1) as f64 * omega[i];
            coag += omega[i] * self.sums.loss[i];
        }
        dacc[0] = theta_sum * theta_sum;
        dacc[1] = m1 * m1;
        dacc[2] = m0 * m0;
        dacc[3] = coag;
        dacc[4] = (n + 1) as f64 * omega[n - 1] * self.sums.gain[n - 1];

        let m = self.cutoffs.len();
        for (slot, &r) in self.cutoffs.iter().enumerate() {
            let mut tail_theta = 0.0;
            let mut upper = 0.0;
            let mut diag = 0.0;
            for i in (r - 1).min(n)..n {
                tail_theta += theta[i] * omega[i];
                upper += omega[i] * self.sums.loss[i];
                diag += self.rhs.diagonal(i + 1) * omega[i] * omega[i];
            }
            dacc[FIXED_SLOTS + slot] = tail_theta * tail_theta;
            dacc[FIXED_SLOTS + m + slot] = 2.0 * upper - diag;
        }
    }
}

/// Dormand–Prince 5(4) coefficients.
mod dopri {
    pub const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    /// Difference between the 5th- and 4th-order weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

struct Stepper {
    sys: Augmented,
    n: usize,
    clamp_tol: f64,
    stats: StepStats,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    /// `k[0]` holds f(t, y) for the current y.
    fsal_valid: bool,
}

enum Attempt {
    Accepted { err: f64 },
    Rejected { err: f64, negative: bool },
}

impl Stepper {
    fn new(sys: Augmented, clamp_tol: f64) -> Self {
        let dim = sys.dim();
        let n = sys.rhs.n();
        Stepper {
            sys,
            n,
            clamp_tol,
            stats: StepStats::default(),
            k: vec![vec![0.0; dim]; 7],
            stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
            err: vec![0.0; dim],
            fsal_valid: false,
        }
    }

    fn eval(&mut self, slot: usize, t: f64, last_good: &[f64]) -> Result<(), IntegrationError> {
        self.stats.rhs_evals += 1;
        let y = if slot == usize::MAX { last_good } else { &self.stage };
        let idx = if slot == usize::MAX { 0 } else { slot };
        // Split borrows: k[idx] is written, y is read.
        let mut out = std::mem::take(&mut self.k[idx]);
        self.sys.deriv(y, &mut out);
        let finite = out.iter().all(|v| v.is_finite());
        self.k[idx] = out;
        if finite {
            Ok(())
        } else {
            Err(IntegrationError::NonFinite { t, last_good: State::new(t, last_good[..self.n].to_vec()) })
        }
    }

    /// Negative excursions beyond the clamp tolerance.
    fn too_negative(&self, y: &[f64]) -> bool {
        y[..self.n].iter().any(|v| *v < -self.clamp_tol)
    }

    fn clamp(&mut self) -> bool {
        let mut clamped = false;
        for v in &mut self.y_new[..self.n] {
            if *v < 0.0 {
                *v = 0.0;
                clamped = true;
            }
        }
        clamped
    }

    fn dopri_attempt(&mut self, t: f64, y: &[f64], h: f64, cfg: &IntegratorConfig) -> Result<Attempt, IntegrationError> {
        if !self.fsal_valid {
            self.eval(usize::MAX, t, y)?;
        }
        let dim = y.len();
        for s in 1..7 {
            for d in 0..dim {
                let mut acc = 0.0;
                for (j, a) in dopri::A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * self.k[j][d];
                    }
                }
                self.stage[d] = y[d] + h * acc;
            }
            self.eval(s, t + dopri::C[s] * h, y)?;
        }
        // Stage 7 is evaluated at the 5th-order solution.
        self.y_new.copy_from_slice(&self.stage);
        let mut sq = 0.0;
        for d in 0..dim {
            let mut e = 0.0;
            for (j, w) in dopri::E.iter().enumerate() {
                e += w * self.k[j][d];
            }
            e *= h;
            self.err[d] = e;
            let sc = cfg.abs_tol + cfg.rel_tol * y[d].abs().max(self.y_new[d].abs());
            sq += (e / sc) * (e / sc);
        }
        let err = (sq / dim as f64).sqrt();
        if !err.is_finite() {
            return Err(IntegrationError::NonFinite { t, last_good: State::new(t, y[..self.n].to_vec()) });
        }
        if err > 1.0 {
            self.fsal_valid = true;
            return Ok(Attempt::Rejected { err, negative: false });
        }
        if self.too_negative(&self.y_new) {
            self.fsal_valid = true;
            return Ok(Attempt::Rejected { err, negative: true });
        }
        Ok(Attempt::Accepted { err })
    }

    fn rk4_step(&mut self, t: f64, y: &[f64], h: f64) -> Result<(), IntegrationError> {
        let dim = y.len();
        self.eval(usize::MAX, t, y)?;
        for d in 0..dim {
            self.stage[d] = y[d] + 0.5 * h * self.k[0][d];
        }
        self.eval(1, t + 0.5 * h, y)?;
        for d in 0..dim {
            self.stage[d] = y[d] + 0.5 * h * self.k[1][d];
        }
        self.eval(2, t + 0.5 * h, y)?;
        for d in 0..dim {
            self.stage[d] = y[d] + h * self.k[2][d];
        }
        self.eval(3, t + h, y)?;
        for d in 0..dim {
            self.y_new[d] = y[d] + h / 6.0 * (self.k[0][d] + 2.0 * self.k[1][d] + 2.0 * self.k[2][d] + self.k[3][d]);
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64], t_end: f64) -> Result<Vec<f64>, IntegrationError> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(IntegrationError::InvalidGrid(format!("T must be positive, got {t_end}")));
    }
    let mut out = Vec::with_capacity(grid.len() + 1);
    if grid.first().is_none_or(|t| *t != 0.0) {
        out.push(0.0);
    }
    for &t in grid {
        if !(t.is_finite() && (0.0..=t_end).contains(&t)) {
            return Err(IntegrationError::InvalidGrid(format!("sample time {t} outside [0, {t_end}]")));
        }
        if let Some(prev) = out.last() {
            if t <= *prev && !(out.len() == 1 && t == 0.0) {
                return Err(IntegrationError::InvalidGrid("sample times must be strictly increasing".into()));
            }
        }
        if !(out.len() == 1 && t == 0.0 && out[0] == 0.0) {
            out.push(t);
        }
    }
    if out.len() < 2 {
        return Err(IntegrationError::InvalidGrid("need at least one positive sample time".into()));
    }
    Ok(out)
}

/// Integrates the truncated system from `init` to `t_end`, recording samples on `grid`.
///
/// `cutoffs` registers the tail indices `r` whose tail integrals are
/// accumulated; they cannot be added after the run.
pub fn integrate(
    spec: &KernelSpec,
    init: &State,
    t_end: f64,
    grid: &[f64],
    cfg: &IntegratorConfig,
    cutoffs: &[usize],
) -> Result<Trajectory, IntegrationError> {
    cfg.validate()?;
    init.validate()?;
    let n = init.n();
    if n == 0 {
        return Err(SystemError::InvalidInitialData("empty state".into()).into());
    }
    if let Some(r) = cutoffs.iter().find(|r| **r == 0) {
        return Err(IntegrationError::InvalidConfig(format!("tail cutoff must be at least 1, got {r}")));
    }
    let grid = validate_grid(grid, t_end)?;
    let rhs = Rhs::new(spec, n)?;
    let max_init = init.omega.iter().copied().fold(0.0, f64::max);
    let clamp_tol = cfg.clamp_tol.unwrap_or(1e-12 * max_init);

    let sys = Augmented { rhs, cutoffs: cutoffs.to_vec(), sums: Sums::new(n) };
    let dim = sys.dim();
    let mut stepper = Stepper::new(sys, clamp_tol);

    let mut y = vec![0.0; dim];
    y[..n].copy_from_slice(&init.omega);
    let m = cutoffs.len();
    let mut samples = Vec::with_capacity(grid.len());
    samples.push(Sample { t: 0.0, omega: y[..n].to_vec(), acc: Accumulators::from_slice(&y[n..], m) });

    let mut t = 0.0;
    let mut h = cfg.h_init.min(cfg.h_max);
    for &target in &grid[1..] {
        match cfg.method {
            Method::AdaptiveEmbedded45 => {
                while t < target {
                    let remaining = target - t;
                    let lands = h >= remaining * (1.0 - 1e-12);
                    let step = if lands { remaining } else { h };
                    match stepper.dopri_attempt(t, &y, step, cfg)? {
                        Attempt::Accepted { err } => {
                            stepper.stats.accepted += 1;
                            let clamped = stepper.clamp();
                            if clamped {
                                stepper.stats.clamped_steps += 1;
                            }
                            y.copy_from_slice(&stepper.y_new);
                            // FSAL: k[6] is f at the unclamped new point.
                            if clamped {
                                stepper.fsal_valid = false;
                            } else {
                                stepper.k.swap(0, 6);
                                stepper.fsal_valid = true;
                            }
                            t = if lands { target } else { t + step };
                            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                            let proposal = (step * fac).min(cfg.h_max);
                            h = if lands { proposal.max(h.min(cfg.h_max)) } else { proposal };
                        }
                        Attempt::Rejected { err, negative } => {
                            stepper.stats.rejected += 1;
                            // Stage values were computed from y; k[0] is still f(t, y).
                            stepper.fsal_valid = true;
                            let shrink = if negative { 0.5 } else { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) };
                            h = step * shrink;
                            if h < cfg.h_min {
                                let reason = if negative {
                                    "negative concentrations beyond clamp tolerance"
                                } else {
                                    "error tolerance not met"
                                };
                                return Err(IntegrationError::StepUnderflow {
                                    t,
                                    h_min: cfg.h_min,
                                    reason: reason.into(),
                                    last_good: State::new(t, y[..n].to_vec()),
                                });
                            }
                        }
                    }
                }
            }
            Method::FixedRk4 { h: h_fixed } => {
                let span = target - t;
                let pieces = ((span / h_fixed) - 1e-9).ceil().max(1.0) as u64;
                let step = span / pieces as f64;
                for p in 0..pieces {
                    let t_end_piece = if p + 1 == pieces { target } else { t + step };
                    rk4_advance(&mut stepper, &mut t, &mut y, t_end_piece, cfg.h_min)?;
                }
                t = target;
            }
        }
        check_finite(&y[..n]).map_err(|_| IntegrationError::NonFinite {
            t,
            last_good: State::new(t, y[..n].to_vec()),
        })?;
        samples.push(Sample { t: target, omega: y[..n].to_vec(), acc: Accumulators::from_slice(&y[n..], m) });
    }

    Ok(Trajectory {
        spec: spec.clone(),
        n,
        cutoffs: cutoffs.to_vec(),
        config: cfg.clone(),
        samples,
        stats: stepper.stats,
    })
}

/// One RK4 step to `t_end`, halved recursively while the result is too negative.
fn rk4_advance(
    stepper: &mut Stepper,
    t: &mut f64,
    y: &mut Vec<f64>,
    t_end: f64,
    h_min: f64,
) -> Result<(), IntegrationError> {
    let h = t_end - *t;
    stepper.rk4_step(*t, y, h)?;
    if stepper.too_negative(&stepper.y_new) {
        stepper.stats.rejected += 1;
        if h / 2.0 < h_min {
            return Err(IntegrationError::StepUnderflow {
                t: *t,
                h_min,
                reason: "negative concentrations beyond clamp tolerance".into(),
                last_good: State::new(*t, y[..stepper.n].to_vec()),
            });
        }
        let mid = *t + h / 2.0;
        rk4_advance(stepper, t, y, mid, h_min)?;
        return rk4_advance(stepper, t, y, t_end, h_min);
    }
    stepper.stats.accepted += 1;
    if stepper.clamp() {
        stepper.stats.clamped_steps += 1;
    }
    y.copy_from_slice(&stepper.y_new);
    *t = t_end;
    Ok(())
}

/// Composite trapezoid of `f(sample)` over the samples in `[t1, t2]`.
pub(crate) fn trapezoid(
    traj: &Trajectory,
    t1: f64,
    t2: f64,
    mut f: impl FnMut(&Sample) -> f64,
) -> Result<f64, IntegrationError> {
    let (a, b) = traj.quadrature_range(t1, t2)?;
    let mut total = 0.0;
    let mut prev = f(&traj.samples[a]);
    for k in a + 1..=b {
        let cur = f(&traj.samples[k]);
        total += 0.5 * (traj.samples[k].t - traj.samples[k - 1].t) * (prev + cur);
        prev = cur;
    }
    Ok(total)
}

/// `ω_i(t2) − ω_i(t1) − ∫_{t1}^{t2} rhs_i ds`, with the integral taken by the
/// trapezoid rule on the sample grid.
pub fn solution_residual(traj: &Trajectory, i: usize, t1: f64, t2: f64) -> Result<f64, IntegrationError> {
    let n = traj.n;
    if i == 0 || i > n {
        return Err(IntegrationError::IndexOutOfRange { index: i, n });
    }
    let rhs = Rhs::new(&traj.spec, n)?;
    let mut sums = Sums::new(n);
    let mut out = vec![0.0; n];
    let integral = trapezoid(traj, t1, t2, |s| {
        rhs.eval(&s.omega, &mut sums, &mut out);
        out[i - 1]
    })?;
    let a = traj.sample_index(t1)?;
    let b = traj.sample_index(t2)?;
    Ok(traj.samples[b].omega[i - 1] - traj.samples[a].omega[i - 1] - integral)
}
