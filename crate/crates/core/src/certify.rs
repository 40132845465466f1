//! Evaluation of a list of bounds over the sample times of a trajectory.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_amc, check_appendix_m0, check_est1, check_est2, check_est3, check_fm, check_gel_infmass,
    check_gel_product, check_m1_square_integral, check_massrbnd, check_tailest, BoundId, BoundReport,
    CheckError,
};
use crate::integrator::Trajectory;
use crate::kernel::{lower_bound_constants, LowerBounds};

/// Which `(t1, t2)` sample pairs the two-time bounds are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    /// `(0, t_k)`, `(t_k, t_{k+1})` and `(t_k, T)` for every sample `t_k`.
    #[default]
    Anchored,
    /// Every `t1 ≤ t2`. Quadratic in the number of samples.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckPlan {
    pub bounds: Vec<BoundId>,
    pub eta: f64,
    pub kappa0: f64,
    pub c: Option<f64>,
    pub zeta: Option<f64>,
    pub c_uniform: Option<f64>,
    pub pairs: PairPolicy,
}

impl Default for CheckPlan {
    fn default() -> Self {
        CheckPlan {
            bounds: BoundId::ALL.to_vec(),
            eta: 0.5,
            kappa0: 1.5,
            c: None,
            zeta: None,
            c_uniform: None,
            pairs: PairPolicy::Anchored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inapplicable {
    pub bound_id: BoundId,
    pub inapplicable: String,
}

/// Result of one requested bound: the worst evaluated instance, or the
/// reason it does not apply to this kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckOutcome {
    Report(BoundReport),
    Inapplicable(Inapplicable),
}

impl CheckOutcome {
    pub fn bound_id(&self) -> BoundId {
        match self {
            CheckOutcome::Report(r) => r.bound_id,
            CheckOutcome::Inapplicable(i) => i.bound_id,
        }
    }

    /// `Some(pass)` for evaluated bounds.
    pub fn passed(&self) -> Option<bool> {
        match self {
            CheckOutcome::Report(r) => Some(r.pass),
            CheckOutcome::Inapplicable(_) => None,
        }
    }
}

fn pairs(times: &[f64], policy: PairPolicy) -> Vec<(f64, f64)> {
    let last = times.len() - 1;
    let mut out = Vec::new();
    match policy {
        PairPolicy::All => {
            for a in 0..=last {
                for b in a + 1..=last {
                    out.push((times[a], times[b]));
                }
            }
        }
        PairPolicy::Anchored => {
            for k in 1..=last {
                out.push((times[0], times[k]));
            }
            for k in 1..last {
                out.push((times[k], times[k + 1]));
                if k + 1 < last {
                    out.push((times[k], times[last]));
                }
            }
        }
    }
    out
}

fn worst(reports: impl IntoIterator<Item = Result<BoundReport, CheckError>>) -> Result<BoundReport, CheckError> {
    let mut best: Option<BoundReport> = None;
    for r in reports {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.slack() < b.slack()) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| CheckError::InvalidParameter("no sample pairs to evaluate".into()))
}

struct Constants<'a> {
    traj: &'a Trajectory,
    kappa0: f64,
    cached: Option<Result<LowerBounds, String>>,
}

impl Constants<'_> {
    fn get(&mut self) -> Result<&LowerBounds, CheckError> {
        let (traj, kappa0) = (self.traj, self.kappa0);
        let cached = self.cached.get_or_insert_with(|| {
            lower_bound_constants(&traj.spec, traj.n.max(8), kappa0).map_err(|e| e.to_string())
        });
        cached
            .as_ref()
            .map_err(|e| CheckError::Inapplicable(format!("kernel lower bounds unavailable: {e}")))
    }
}

fn evaluate(
    traj: &Trajectory,
    plan: &CheckPlan,
    id: BoundId,
    consts: &mut Constants<'_>,
) -> Result<BoundReport, CheckError> {
    let times: Vec<f64> = traj.times().collect();
    let t_end = *times.last().unwrap();
    let positive: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
    match id {
        BoundId::Est1 => worst(pairs(&times, plan.pairs).into_iter().map(|(a, b)| check_est1(traj, a, b))),
        BoundId::Est2 => worst(pairs(&times, plan.pairs).into_iter().map(|(a, b)| check_est2(traj, a, b))),
        BoundId::Est3 | BoundId::TailEst => {
            if traj.cutoffs.is_empty() {
                return Err(CheckError::Inapplicable("no tail cutoffs registered".into()));
            }
            let pp = pairs(&times, plan.pairs);
            worst(traj.cutoffs.iter().flat_map(|&r| {
                pp.iter().map(move |&(a, b)| {
                    if id == BoundId::Est3 {
                        check_est3(traj, r, plan.eta, a, b)
                    } else {
                        check_tailest(traj, r, a, b)
                    }
                })
            }))
        }
        BoundId::MassRBnd => worst(positive.iter().map(|&t| check_massrbnd(traj, t))),
        BoundId::GelInfMass => worst(positive.iter().map(|&t| check_gel_infmass(traj, t))),
        BoundId::GelProduct => {
            let zeta = match plan.zeta {
                Some(z) => z,
                None => consts.get()?.zeta.ok_or_else(|| {
                    CheckError::Inapplicable("no certified constant zeta with Lambda >= zeta*i*j".into())
                })?,
            };
            worst(positive.iter().map(|&t| check_gel_product(traj, zeta, t)))
        }
        BoundId::GelM1Int => {
            let c = match plan.c {
                Some(c) => c,
                None => consts.get()?.c.ok_or_else(|| {
                    CheckError::Inapplicable(format!(
                        "no certified constant C with Lambda >= C*(ij)^(kappa0/2), kappa0 = {}",
                        plan.kappa0
                    ))
                })?,
            };
            check_m1_square_integral(traj, c, plan.kappa0)
        }
        BoundId::AppendixM0 => {
            let c = match plan.c_uniform {
                Some(c) => c,
                None => consts.get()?.uniform.ok_or_else(|| {
                    CheckError::Inapplicable("no certified uniform lower bound Lambda >= C > 0".into())
                })?,
            };
            check_appendix_m0(traj, c, t_end)
        }
        BoundId::Amc => check_amc(traj),
        BoundId::Fm => check_fm(traj),
    }
}

/// Evaluates every bound in `plan`, in order.
///
/// Inapplicable bounds become [`CheckOutcome::Inapplicable`]; any other
/// error is returned.
pub fn certify(traj: &Trajectory, plan: &CheckPlan) -> Result<Vec<CheckOutcome>, CheckError> {
    let mut consts = Constants { traj, kappa0: plan.kappa0, cached: None };
    let mut out = Vec::with_capacity(plan.bounds.len());
    for &id in &plan.bounds {
        match evaluate(traj, plan, id, &mut consts) {
            Ok(r) => out.push(CheckOutcome::Report(r)),
            Err(CheckError::Inapplicable(reason)) => {
                out.push(CheckOutcome::Inapplicable(Inapplicable { bound_id: id, inapplicable: reason }))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, uniform_grid, IntegratorConfig};
    use crate::kernel::KernelSpec;
    use crate::system::{make_initial_state, InitialData};

    fn run(spec: KernelSpec, n: usize) -> Trajectory {
        let init = make_initial_state(&InitialData::Monodisperse { a: 1.0 }, n).unwrap();
        integrate(&spec, &init, 2.0, &uniform_grid(2.0, 21), &IntegratorConfig::default(), &[1, 2, 4]).unwrap()
    }

    #[test]
    fn anchored_pairs() {
        let p = pairs(&[0.0, 1.0, 2.0, 3.0], PairPolicy::Anchored);
        assert_eq!(
            p,
            vec![(0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (1.0, 2.0), (1.0, 3.0), (2.0, 3.0)]
        );
        assert_eq!(pairs(&[0.0, 1.0, 2.0, 3.0], PairPolicy::All).len(), 6);
    }

    #[test]
    fn product_kernel_all_pass() {
        let traj = run(KernelSpec::power(1.0, 1.0), 32);
        let out = certify(&traj, &CheckPlan::default()).unwrap();
        assert_eq!(out.len(), BoundId::ALL.len());
        for o in &out {
            assert_ne!(o.passed(), Some(false), "{o:?}");
        }
        assert!(out.iter().filter(|o| o.passed().is_some()).count() >= 9);
    }

    #[test]
    fn sublinear_kernel_marks_inapplicable() {
        let traj = run(KernelSpec::power(1.0, 0.5), 32);
        let out = certify(&traj, &CheckPlan::default()).unwrap();
        for o in &out {
            match o.bound_id() {
                BoundId::MassRBnd | BoundId::Fm | BoundId::GelInfMass | BoundId::GelProduct => {
                    assert_eq!(o.passed(), None, "{o:?}")
                }
                _ => assert_ne!(o.passed(), Some(false), "{o:?}"),
            }
        }
    }

    #[test]
    fn oversized_zeta_fails() {
        let traj = run(KernelSpec::power(1.0, 1.0), 16);
        let plan = CheckPlan { bounds: vec![BoundId::GelProduct], zeta: Some(1e6), ..CheckPlan::default() };
        let out = certify(&traj, &plan).unwrap();
        assert_eq!(out[0].passed(), Some(false));
    }

    #[test]
    fn inapplicable_serializes_with_reason() {
        let o = CheckOutcome::Inapplicable(Inapplicable { bound_id: BoundId::Fm, inapplicable: "x".into() });
        assert_eq!(serde_json::to_string(&o).unwrap(), r#"{"bound_id":"FM","inapplicable":"x"}"#);
    }
}
