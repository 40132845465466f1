//! Right-hand side of the truncated Safronov–Dubovskiĭ system.
//!
//! For `1 ≤ i ≤ n`:
//!
//! ```text
//! dω_i/dt = ω_{i-1} Σ_{j=1}^{i-1} j Λ(i-1,j) ω_j
//!         − ω_i     Σ_{j=1}^{i}   j Λ(i,j)   ω_j
//!         − ω_i     Σ_{j=i}^{n}     Λ(i,j)   ω_j
//! ```
//!
//! with an empty production term for `i = 1`. Writing
//! `S_i = Σ_{j≤i} jΛ(i,j)ω_j` and `F_i = Σ_{j≥i} Λ(i,j)ω_j`, every component is
//! `ω_{i-1}S_{i-1} − ω_i S_i − ω_i F_i`. The general path builds `S` and `F`
//! with `O(n²)` kernel products. When `Λ(i,j) = (1+c)θ(i)θ(j)` both reduce to
//! prefix and suffix sums, `S_i = (1+c)θ_i Σ_{j≤i} jθ_jω_j` and
//! `F_i = (1+c)θ_i Σ_{j≥i} θ_jω_j`, which is the `O(n)` fast path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_matrix, KernelError, KernelSpec};
use crate::summation::{sum_by, Accumulator};

/// Below this size the general path runs on one thread.
const PARALLEL_THRESHOLD: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("non-finite concentration at index {index}")]
    NonFinite { index: usize },
    #[error("negative concentration {value} at index {index}")]
    Negative { index: usize, value: f64 },
    #[error("state has {got} components, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("the fast path needs a separable kernel (kappa zero or scaled_product)")]
    UnsupportedKernel,
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub omega: Vec<f64>,
}

impl State {
    pub fn new(t: f64, omega: Vec<f64>) -> Self {
        State { t, omega }
    }

    pub fn zeros(n: usize) -> Self {
        State { t: 0.0, omega: vec![0.0; n] }
    }

    /// Truncation size.
    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn check_finite(&self) -> Result<(), SystemError> {
        check_finite(&self.omega)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        self.check_finite()?;
        if let Some((k, v)) = self.omega.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(SystemError::Negative { index: k + 1, value: *v });
        }
        Ok(())
    }
}

pub(crate) fn check_finite(omega: &[f64]) -> Result<(), SystemError> {
    match omega.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(SystemError::NonFinite { index: k + 1 }),
        None => Ok(()),
    }
}

/// Initial concentration profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialData {
    /// `ω_1 = a`, all others zero.
    Monodisperse { a: f64 },
    /// `ω_i = a·r^i`.
    Geometric { a: f64, r: f64 },
    /// `ω_i = a·i^{-q}`, `q > 1`. For `q ≤ 2` the first moment diverges with `n`.
    PowerTail { a: f64, q: f64 },
    Table(Vec<f64>),
}

impl InitialData {
    pub fn validate(&self) -> Result<(), SystemError> {
        let bad = |msg: String| Err(SystemError::InvalidInitialData(msg));
        let nonneg = |name: &str, v: f64| -> Result<(), SystemError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SystemError::InvalidInitialData(format!("{name} must be nonnegative, got {v}")))
            }
        };
        match self {
            InitialData::Monodisperse { a } => nonneg("init.a", *a),
            InitialData::Geometric { a, r } => {
                nonneg("init.a", *a)?;
                if !(*r > 0.0 && *r < 1.0) {
                    return bad(format!("init.r must lie in (0, 1), got {r}"));
                }
                Ok(())
            }
            InitialData::PowerTail { a, q } => {
                nonneg("init.a", *a)?;
                if !(q.is_finite() && *q > 1.0) {
                    return bad(format!("init.q must exceed 1, got {q}"));
                }
                Ok(())
            }
            InitialData::Table(values) => {
                for v in values {
                    nonneg("init table entry", *v)?;
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            InitialData::Monodisperse { a } => {
                if i == 1 {
                    *a
                } else {
                    0.0
                }
            }
            InitialData::Geometric { a, r } => a * r.powi(i as i32),
            InitialData::PowerTail { a, q } => a * (i as f64).powf(-q),
            InitialData::Table(values) => values.get(i - 1).copied().unwrap_or(0.0),
        }
    }
}

pub fn make_initial_state(family: &InitialData, n: usize) -> Result<State, SystemError> {
    if n == 0 {
        return Err(SystemError::InvalidInitialData("n must be at least 1".into()));
    }
    family.validate()?;
    Ok(State::new(0.0, (1..=n).map(|i| family.value(i)).collect()))
}

#[derive(Debug, Clone)]
enum Coupling {
    /// `Λ = factor·θθ`.
    Separable { factor: f64 },
    /// Dense row-major `Λ(i,j)`.
    General { lambda: Vec<f64> },
}

/// Reusable buffers for the gain and loss sums.
#[derive(Debug, Clone, Default)]
pub struct Sums {
    /// `S_i = Σ_{j≤i} jΛ(i,j)ω_j`.
    pub gain: Vec<f64>,
    /// `F_i = Σ_{j≥i} Λ(i,j)ω_j`.
    pub loss: Vec<f64>,
    scratch: Vec<f64>,
}

impl Sums {
    pub fn new(n: usize) -> Self {
        Sums { gain: vec![0.0; n], loss: vec![0.0; n], scratch: vec![0.0; n] }
    }
}

/// Precomputed right-hand side for a fixed kernel and truncation size.
#[derive(Debug, Clone)]
pub struct Rhs {
    n: usize,
    theta: Vec<f64>,
    coupling: Coupling,
}

impl Rhs {
    /// Picks the fast path whenever the kernel is separable.
    pub fn new(spec: &KernelSpec, n: usize) -> Result<Self, SystemError> {
        if spec.separable_factor().is_some() {
            Self::separable(spec, n)
        } else {
            Self::general(spec, n)
        }
    }

    pub fn general(spec: &KernelSpec, n: usize) -> Result<Self, SystemError> {
        spec.validate()?;
        let theta = spec.theta.values(n)?;
        let lambda = kernel_matrix(spec, n)?;
        Ok(Rhs { n, theta, coupling: Coupling::General { lambda } })
    }

    pub fn separable(spec: &KernelSpec, n: usize) -> Result<Self, SystemError> {
        spec.validate()?;
        let factor = spec.separable_factor().ok_or(SystemError::UnsupportedKernel)?;
        spec.ensure_range(n)?;
        let theta = spec.theta.values(n)?;
        Ok(Rhs { n, theta, coupling: Coupling::Separable { factor } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.coupling, Coupling::Separable { .. })
    }

    /// `Λ(i,i)`, 1-based.
    pub fn diagonal(&self, i: usize) -> f64 {
        match &self.coupling {
            Coupling::Separable { factor } => factor * self.theta[i - 1] * self.theta[i - 1],
            Coupling::General { lambda } => lambda[(i - 1) * self.n + (i - 1)],
        }
    }

    /// `Λ(i,j)`, 1-based.
    pub fn lambda(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        match &self.coupling {
            Coupling::Separable { factor } => factor * self.theta[i - 1] * self.theta[j - 1],
            Coupling::General { lambda } => lambda[(i - 1) * self.n + (j - 1)],
        }
    }

    /// Fills `sums.gain` and `sums.loss` for the given concentrations.
    pub fn fill_sums(&self, omega: &[f64], sums: &mut Sums) {
        let n = self.n;
        debug_assert_eq!(omega.len(), n);
        if sums.gain.len() != n {
            *sums = Sums::new(n);
        }
        match &self.coupling {
            Coupling::Separable { factor } => {
                let theta = &self.theta;
                let mut prefix = Accumulator::for_size(n);
                for i in 0..n {
                    prefix.add((i + 1) as f64 * theta[i] * omega[i]);
                    sums.gain[i] = factor * theta[i] * prefix.value();
                }
                let mut suffix = Accumulator::for_size(n);
                for i in (0..n).rev() {
                    suffix.add(theta[i] * omega[i]);
                    sums.scratch[i] = suffix.value();
                }
                for i in 0..n {
                    sums.loss[i] = factor * theta[i] * sums.scratch[i];
                }
            }
            Coupling::General { lambda } => {
                let row = |i: usize| -> (f64, f64) {
                    let r = &lambda[i * n..(i + 1) * n];
                    let gain = sum_by(n, 0..=i, |j| (j + 1) as f64 * r[j] * omega[j]);
                    let loss = sum_by(n, i..n, |j| r[j] * omega[j]);
                    (gain, loss)
                };
                if n >= PARALLEL_THRESHOLD {
                    sums.gain
                        .par_iter_mut()
                        .zip(sums.loss.par_iter_mut())
                        .enumerate()
                        .for_each(|(i, (g, l))| {
                            let (gi, li) = row(i);
                            *g = gi;
                            *l = li;
                        });
                } else {
                    for i in 0..n {
                        let (gi, li) = row(i);
                        sums.gain[i] = gi;
                        sums.loss[i] = li;
                    }
                }
            }
        }
    }

    /// Assembles `dω/dt` from filled sums.
    pub fn assemble(omega: &[f64], sums: &Sums, out: &mut [f64]) {
        let n = omega.len();
        for i in 0..n {
            let production = if i == 0 { 0.0 } else { omega[i - 1] * sums.gain[i - 1] };
            out[i] = production - omega[i] * sums.gain[i] - omega[i] * sums.loss[i];
        }
    }

    pub fn eval(&self, omega: &[f64], sums: &mut Sums, out: &mut [f64]) {
        self.fill_sums(omega, sums);
        Self::assemble(omega, sums, out);
    }

    pub fn eval_vec(&self, omega: &[f64]) -> Vec<f64> {
        let mut sums = Sums::new(self.n);
        let mut out = vec![0.0; self.n];
        self.eval(omega, &mut sums, &mut out);
        out
    }
}

fn check_state(state: &State) -> Result<(), SystemError> {
    state.check_finite()
}

/// General `O(n²)` right-hand side.
pub fn rhs_general(spec: &KernelSpec, state: &State) -> Result<Vec<f64>, SystemError> {
    check_state(state)?;
    Ok(Rhs::general(spec, state.n())?.eval_vec(&state.omega))
}

/// `O(n)` right-hand side for separable kernels.
pub fn rhs_separable_fast(spec: &KernelSpec, state: &State) -> Result<Vec<f64>, SystemError> {
    check_state(state)?;
    Ok(Rhs::separable(spec, state.n())?.eval_vec(&state.omega))
}
