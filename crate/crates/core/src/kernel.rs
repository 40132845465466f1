//! Coagulation kernels of the form `Λ(i,j) = θ(i)·θ(j) + κ(i,j)`.
//!
//! A kernel is built from a rate sequence `θ` and a correction `κ`. The
//! families supported here are power sequences `θ(i) = a·i^p` (or an explicit
//! table) combined with `κ = 0`, `κ = c·θ(i)θ(j)` or a symmetric table.
//!
//! Growth conditions at infinity cannot be decided from finitely many values,
//! so [`classify_kernel`] and [`lower_bound_constants`] work on a probe range
//! `[1, n_probe]²` and report what holds pointwise there, together with a
//! trend test that flags quantities still decaying at the edge of the probe.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack used when comparing probe minima for a decay trend.
const TREND_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("index {index} is outside the table range 1..={len}")]
    OutOfRange { index: usize, len: usize },
    #[error("kernel indices are 1-based, got 0")]
    ZeroIndex,
    #[error("invalid kernel parameter: {0}")]
    Invalid(String),
    #[error("cannot classify: theta({index}) = 0 while kappa is nonzero there")]
    Unclassifiable { index: usize },
}

/// Rate sequence `θ(i)`, `i ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThetaSequence {
    /// `θ(i) = a·i^p`.
    Power { a: f64, p: f64 },
    /// Explicit values `θ(1), θ(2), ...`.
    Table(Vec<f64>),
}

impl ThetaSequence {
    pub fn power(a: f64, p: f64) -> Self {
        ThetaSequence::Power { a, p }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            ThetaSequence::Power { a, p } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(KernelError::Invalid(format!("theta.a must be positive, got {a}")));
                }
                if !(p.is_finite() && *p >= 0.0) {
                    return Err(KernelError::Invalid(format!("theta.p must be nonnegative, got {p}")));
                }
            }
            ThetaSequence::Table(values) => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(KernelError::Invalid(format!("theta table entry {v} is not a nonnegative number")));
                }
            }
        }
        Ok(())
    }

    /// Largest representable index, `None` if unbounded.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            ThetaSequence::Power { .. } => None,
            ThetaSequence::Table(values) => Some(values.len()),
        }
    }

    pub fn value(&self, i: usize) -> Result<f64, KernelError> {
        if i == 0 {
            return Err(KernelError::ZeroIndex);
        }
        match self {
            ThetaSequence::Power { a, p } => Ok(a * (i as f64).powf(*p)),
            ThetaSequence::Table(values) => values
                .get(i - 1)
                .copied()
                .ok_or(KernelError::OutOfRange { index: i, len: values.len() }),
        }
    }

    /// `θ(1), ..., θ(n)`.
    pub fn values(&self, n: usize) -> Result<Vec<f64>, KernelError> {
        (1..=n).map(|i| self.value(i)).collect()
    }
}

/// Correction term `κ(i,j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KappaModel {
    Zero,
    /// `κ(i,j) = c·θ(i)·θ(j)`.
    ScaledProduct { c: f64 },
    /// Symmetric matrix, row-major, `N×N`.
    Table { size: usize, values: Vec<f64> },
}

impl KappaModel {
    pub fn table(rows: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let size = rows.len();
        let mut values = Vec::with_capacity(size * size);
        for row in &rows {
            if row.len() != size {
                return Err(KernelError::Invalid("kappa table must be square".into()));
            }
            values.extend_from_slice(row);
        }
        let model = KappaModel::Table { size, values };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            KappaModel::Zero => Ok(()),
            KappaModel::ScaledProduct { c } => {
                if c.is_finite() && *c >= 0.0 {
                    Ok(())
                } else {
                    Err(KernelError::Invalid(format!("kappa.c must be nonnegative, got {c}")))
                }
            }
            KappaModel::Table { size, values } => {
                if values.len() != size * size {
                    return Err(KernelError::Invalid("kappa table must be square".into()));
                }
                for i in 0..*size {
                    for j in 0..*size {
                        let v = values[i * size + j];
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(KernelError::Invalid(format!(
                                "kappa({},{}) = {v} is not a nonnegative number",
                                i + 1,
                                j + 1
                            )));
                        }
                        if v != values[j * size + i] {
                            return Err(KernelError::Invalid(format!(
                                "kappa table is not symmetric at ({},{})",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Multiplier `c` when `κ = c·θθ` (zero counts as `c = 0`).
    pub fn separable_factor(&self) -> Option<f64> {
        match self {
            KappaModel::Zero => Some(0.0),
            KappaModel::ScaledProduct { c } => Some(*c),
            KappaModel::Table { .. } => None,
        }
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            KappaModel::Table { size, .. } => Some(*size),
            _ => None,
        }
    }

    fn value(&self, i: usize, j: usize, theta_i: f64, theta_j: f64) -> Result<f64, KernelError> {
        match self {
            KappaModel::Zero => Ok(0.0),
            KappaModel::ScaledProduct { c } => Ok(c * theta_i * theta_j),
            KappaModel::Table { size, values } => {
                let worst = i.max(j);
                if worst > *size {
                    return Err(KernelError::OutOfRange { index: worst, len: *size });
                }
                Ok(values[(i - 1) * size + (j - 1)])
            }
        }
    }
}

/// Growth class asserted by the user; probing can only falsify it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredClass {
    Sublinear,
    AtLeastLinear,
    #[default]
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub theta: ThetaSequence,
    pub kappa: KappaModel,
    pub declared_class: DeclaredClass,
}

impl KernelSpec {
    pub fn new(theta: ThetaSequence, kappa: KappaModel) -> Self {
        KernelSpec { theta, kappa, declared_class: DeclaredClass::Unclassified }
    }

    /// `Λ(i,j) = i^p · j^p` scaled by `a²`, no correction.
    pub fn power(a: f64, p: f64) -> Self {
        Self::new(ThetaSequence::power(a, p), KappaModel::Zero)
    }

    pub fn with_class(mut self, class: DeclaredClass) -> Self {
        self.declared_class = class;
        self
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        self.theta.validate()?;
        self.kappa.validate()
    }

    /// Largest index at which the kernel can be evaluated.
    pub fn max_index(&self) -> Option<usize> {
        match (self.theta.max_index(), self.kappa.max_index()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn ensure_range(&self, n: usize) -> Result<(), KernelError> {
        match self.max_index() {
            Some(len) if n > len => Err(KernelError::OutOfRange { index: n, len }),
            _ => Ok(()),
        }
    }

    /// `1 + c` when the kernel factors as `(1 + c)·θ(i)θ(j)`.
    pub fn separable_factor(&self) -> Option<f64> {
        self.kappa.separable_factor().map(|c| 1.0 + c)
    }

    pub fn kappa(&self, i: usize, j: usize) -> Result<f64, KernelError> {
        let ti = self.theta.value(i)?;
        let tj = self.theta.value(j)?;
        self.kappa.value(i, j, ti, tj)
    }
}

/// Evaluates `Λ(i,j) = θ(i)θ(j) + κ(i,j)`.
pub fn eval_kernel(spec: &KernelSpec, i: usize, j: usize) -> Result<f64, KernelError> {
    // Fixed argument order keeps the value bitwise symmetric.
    let (i, j) = (i.min(j), i.max(j));
    let ti = spec.theta.value(i)?;
    let tj = spec.theta.value(j)?;
    Ok(ti * tj + spec.kappa.value(i, j, ti, tj)?)
}

/// Kernel values `Λ(i,j)` for `1 ≤ i,j ≤ n`, stored row-major.
pub(crate) fn kernel_matrix(spec: &KernelSpec, n: usize) -> Result<Vec<f64>, KernelError> {
    spec.ensure_range(n)?;
    let theta = spec.theta.values(n)?;
    let mut out = vec![0.0; n * n];
    for i in 1..=n {
        for j in i..=n {
            let v = theta[i - 1] * theta[j - 1] + spec.kappa.value(i, j, theta[i - 1], theta[j - 1])?;
            out[(i - 1) * n + (j - 1)] = v;
            out[(j - 1) * n + (i - 1)] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `min θ(i)/i` over the probe.
    #[serde(rename = "B")]
    pub b: f64,
    /// Smallest `A` with `κ ≤ A·θθ` over the probe.
    #[serde(rename = "A")]
    pub a: Option<f64>,
    /// `θ(i)/i` strictly decreasing over the upper half of the probe.
    pub sublinear_trend: bool,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub kappa0: Option<f64>,
    pub zeta: Option<f64>,
}

impl ClassReport {
    /// `θ(i) ≥ B·i` with `B > 0` and no decay of `θ(i)/i` over the probe.
    pub fn linear_lower_bound(&self) -> Option<f64> {
        (self.b > 0.0 && !self.sublinear_trend).then_some(self.b)
    }
}

pub fn classify_kernel(spec: &KernelSpec, n_probe: usize) -> Result<ClassReport, KernelError> {
    if n_probe < 8 {
        return Err(KernelError::Invalid(format!("n_probe must be at least 8, got {n_probe}")));
    }
    spec.validate()?;
    spec.ensure_range(n_probe)?;
    let theta = spec.theta.values(n_probe)?;
    let ratios: Vec<f64> = theta.iter().enumerate().map(|(k, t)| t / (k + 1) as f64).collect();
    let b = ratios.iter().copied().fold(f64::INFINITY, f64::min);

    let tail = &ratios[n_probe / 2 - 1..];
    let sublinear_trend = tail.windows(2).all(|w| w[1] < w[0]);

    let a = match &spec.kappa {
        KappaModel::Zero => Some(0.0),
        KappaModel::ScaledProduct { c } => Some(*c),
        KappaModel::Table { .. } => {
            let mut worst: f64 = 0.0;
            for i in 1..=n_probe {
                for j in i..=n_probe {
                    let kappa = spec.kappa(i, j)?;
                    let tt = theta[i - 1] * theta[j - 1];
                    if tt == 0.0 {
                        if kappa > 0.0 {
                            let index = if theta[i - 1] == 0.0 { i } else { j };
                            return Err(KernelError::Unclassifiable { index });
                        }
                        continue;
                    }
                    worst = worst.max(kappa / tt);
                }
            }
            Some(worst)
        }
    };

    Ok(ClassReport { b, a, sublinear_trend, c: None, kappa0: None, zeta: None })
}

/// Probe minimum of `Λ(i,j)/weight(i,j)` and whether it keeps decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbedMinimum {
    pub min: f64,
    /// The minimum over `[1,n]²` is strictly below the minimum over `[1,n/2]²`.
    pub decaying: bool,
}

impl ProbedMinimum {
    /// The constant, if it is positive and not an artefact of the probe size.
    pub fn certified(&self) -> Option<f64> {
        (self.min > 0.0 && !self.decaying).then_some(self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    pub kappa0: f64,
    /// `Λ ≥ C·(ij)^{κ₀/2}`.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// `Λ ≥ ζ·ij`.
    pub zeta: Option<f64>,
    /// `Λ ≥ C` uniformly.
    pub uniform: Option<f64>,
    pub c_probe: ProbedMinimum,
    pub zeta_probe: ProbedMinimum,
    pub uniform_probe: ProbedMinimum,
}

fn probe_min(
    lambda: &[f64],
    n: usize,
    weight: impl Fn(usize, usize) -> f64,
) -> ProbedMinimum {
    let half = (n / 2).max(1);
    let mut full = f64::INFINITY;
    let mut inner = f64::INFINITY;
    for i in 1..=n {
        for j in i..=n {
            let v = lambda[(i - 1) * n + (j - 1)] / weight(i, j);
            full = full.min(v);
            if j <= half {
                inner = inner.min(v);
            }
        }
    }
    ProbedMinimum { min: full, decaying: full < inner * (1.0 - TREND_RTOL) }
}

pub fn lower_bound_constants(
    spec: &KernelSpec,
    n_probe: usize,
    kappa0: f64,
) -> Result<LowerBounds, KernelError> {
    if n_probe < 8 {
        return Err(KernelError::Invalid(format!("n_probe must be at least 8, got {n_probe}")));
    }
    if !(kappa0 > 1.0 && kappa0 <= 2.0) {
        return Err(KernelError::Invalid(format!("kappa0 must lie in (1, 2], got {kappa0}")));
    }
    spec.validate()?;
    let lambda = kernel_matrix(spec, n_probe)?;
    let half_k = kappa0 / 2.0;
    let c_probe = probe_min(&lambda, n_probe, |i, j| ((i * j) as f64).powf(half_k));
    let zeta_probe = probe_min(&lambda, n_probe, |i, j| (i * j) as f64);
    let uniform_probe = probe_min(&lambda, n_probe, |_, _| 1.0);
    Ok(LowerBounds {
        kappa0,
        c: c_probe.certified(),
        zeta: zeta_probe.certified(),
        uniform: uniform_probe.certified(),
        c_probe,
        zeta_probe,
        uniform_probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let k = KernelSpec::power(1.0, 1.0);
        assert_eq!(eval_kernel(&k, 2, 3).unwrap(), 6.0);
        let k = KernelSpec::power(1.0, 0.75);
        assert!((eval_kernel(&k, 4, 4).unwrap() - 8.0).abs() < 1e-12);
        let k = KernelSpec::new(ThetaSequence::power(1.0, 1.0), KappaModel::ScaledProduct { c: 0.5 });
        assert_eq!(eval_kernel(&k, 2, 3).unwrap(), 9.0);
    }

    #[test]
    fn table_range_error() {
        let k = KernelSpec::new(ThetaSequence::Table(vec![1.0, 2.0]), KappaModel::Zero);
        assert_eq!(eval_kernel(&k, 2, 2).unwrap(), 4.0);
        assert_eq!(eval_kernel(&k, 3, 1), Err(KernelError::OutOfRange { index: 3, len: 2 }));
        let kappa = KappaModel::table(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let k = KernelSpec::new(ThetaSequence::power(1.0, 1.0), kappa);
        assert_eq!(eval_kernel(&k, 1, 2).unwrap(), 3.0);
        assert!(matches!(eval_kernel(&k, 1, 3), Err(KernelError::OutOfRange { .. })));
    }

    #[test]
    fn asymmetric_table_rejected() {
        assert!(KappaModel::table(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(KappaModel::table(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
    }

    #[test]
    fn classify_examples() {
        let r = classify_kernel(&KernelSpec::power(1.0, 1.0), 64).unwrap();
        assert_eq!(r.b, 1.0);
        assert_eq!(r.a, Some(0.0));
        assert!(!r.sublinear_trend);
        assert_eq!(r.linear_lower_bound(), Some(1.0));

        let r = classify_kernel(&KernelSpec::power(1.0, 0.5), 64).unwrap();
        assert!(r.sublinear_trend);
        assert!((r.b - 64f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(r.linear_lower_bound(), None);

        let k = KernelSpec::new(ThetaSequence::power(1.0, 1.0), KappaModel::ScaledProduct { c: 0.5 });
        assert_eq!(classify_kernel(&k, 64).unwrap().a, Some(0.5));
    }

    #[test]
    fn classify_table_kappa() {
        let n = 8;
        let rows: Vec<Vec<f64>> = (1..=n)
            .map(|i| (1..=n).map(|j| 0.25 * (i * j) as f64).collect())
            .collect();
        let k = KernelSpec::new(ThetaSequence::power(1.0, 1.0), KappaModel::table(rows).unwrap());
        let r = classify_kernel(&k, n).unwrap();
        assert!((r.a.unwrap() - 0.25).abs() < 1e-15);

        let mut theta = vec![1.0; n];
        theta[2] = 0.0;
        let k = KernelSpec::new(ThetaSequence::Table(theta), KappaModel::table(vec![vec![1.0; n]; n]).unwrap());
        assert_eq!(classify_kernel(&k, n), Err(KernelError::Unclassifiable { index: 3 }));
    }

    #[test]
    fn classify_rejects_small_probe() {
        assert!(classify_kernel(&KernelSpec::power(1.0, 1.0), 7).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let lb = lower_bound_constants(&KernelSpec::power(1.0, 0.75), 64, 1.5).unwrap();
        assert!((lb.c.unwrap() - 1.0).abs() < 1e-12);

        let lb = lower_bound_constants(&KernelSpec::power(1.0, 1.0), 64, 1.5).unwrap();
        assert_eq!(lb.zeta, Some(1.0));
        assert_eq!(lb.c, Some(1.0));
        assert_eq!(lb.uniform, Some(1.0));

        let lb = lower_bound_constants(&KernelSpec::power(1.0, 0.5), 64, 1.5).unwrap();
        assert_eq!(lb.zeta, None);
        assert!(lb.zeta_probe.decaying);
        assert!((lb.zeta_probe.min - 1.0 / 64.0).abs() < 1e-15);

        let lb = lower_bound_constants(&KernelSpec::power(1.0, 0.0), 64, 1.5).unwrap();
        assert_eq!(lb.uniform, Some(1.0));
        assert_eq!(lb.c, None);
    }

    #[test]
    fn separable_factor() {
        assert_eq!(KernelSpec::power(1.0, 1.0).separable_factor(), Some(1.0));
        let k = KernelSpec::new(ThetaSequence::power(1.0, 1.0), KappaModel::ScaledProduct { c: 0.5 });
        assert_eq!(k.separable_factor(), Some(1.5));
    }
}
