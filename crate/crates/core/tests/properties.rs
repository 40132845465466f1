use proptest::prelude::*;
use sdcoag::diagnostics::{moment_of, weak_form_residual, TestSequence};
use sdcoag::integrator::{integrate, uniform_grid, IntegratorConfig};
use sdcoag::kernel::{eval_kernel, KappaModel, KernelSpec, ThetaSequence};
use sdcoag::system::{rhs_general, rhs_separable_fast, Rhs, State, Sums};

/// Term-by-term transcription of the balance law, straight from `eval_kernel`.
///
/// Returns the right-hand side and, per component, the sum of the absolute
/// values of its three terms (the scale rounding errors are measured against).
fn brute_force_rhs(spec: &KernelSpec, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let lam = |i: usize, j: usize| eval_kernel(spec, i, j).unwrap();
    let gain = |i: usize| -> f64 { (1..=i).map(|j| j as f64 * lam(i, j) * w[j - 1]).sum() };
    (1..=n)
        .map(|i| {
            let produced = if i > 1 { w[i - 2] * gain(i - 1) } else { 0.0 };
            let grown = w[i - 1] * gain(i);
            let broken: f64 = (i..=n).map(|j| lam(i, j) * w[j - 1]).sum::<f64>() * w[i - 1];
            (produced - grown - broken, produced + grown + broken)
        })
        .unzip()
}

fn separable_kernel() -> impl Strategy<Value = KernelSpec> {
    (0.1f64..3.0, 0.0f64..=1.0, prop_oneof![Just(0.0), 0.0f64..2.0]).prop_map(|(a, p, c)| {
        KernelSpec::new(ThetaSequence::power(a, p), KappaModel::ScaledProduct { c })
    })
}

fn table_kernel(n: usize) -> impl Strategy<Value = KernelSpec> {
    (
        proptest::collection::vec(0.0f64..2.0, n),
        proptest::collection::vec(0.0f64..1.0, n * n),
    )
        .prop_map(move |(theta, raw)| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| raw[i.min(j) * n + i.max(j)]).collect())
                .collect();
            KernelSpec::new(ThetaSequence::Table(theta), KappaModel::table(rows).unwrap())
        })
}

/// Nonnegative data with a share of exact zeros.
fn omega(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..1.0], n)
}

/// `|a_k − b_k| ≤ tol·scale_k` componentwise.
fn close(a: &[f64], b: &[f64], scale: &[f64], tol: f64) -> Result<(), TestCaseError> {
    for (k, ((x, y), s)) in a.iter().zip(b).zip(scale).enumerate() {
        prop_assert!((x - y).abs() <= tol * s, "component {}: {} vs {} (scale {})", k + 1, x, y, s);
    }
    Ok(())
}

proptest! {
    #[test]
    fn general_path_matches_brute_force(spec in separable_kernel(), w in omega(1..=24)) {
        let got = rhs_general(&spec, &State::new(0.0, w.clone())).unwrap();
        let (expect, scale) = brute_force_rhs(&spec, &w);
        close(&got, &expect, &scale, 1e-12)?;
    }

    #[test]
    fn table_kernel_matches_brute_force((spec, w) in (1usize..=12).prop_flat_map(|n| (table_kernel(n), omega(n..=n)))) {
        let got = rhs_general(&spec, &State::new(0.0, w.clone())).unwrap();
        let (expect, scale) = brute_force_rhs(&spec, &w);
        close(&got, &expect, &scale, 1e-12)?;
    }

    #[test]
    fn fast_path_matches_general(spec in separable_kernel(), w in omega(1..=256)) {
        let s = State::new(0.0, w);
        let fast = rhs_separable_fast(&spec, &s).unwrap();
        let general = rhs_general(&spec, &s).unwrap();
        let (_, scale) = brute_force_rhs(&spec, &s.omega);
        close(&fast, &general, &scale, 1e-12)?;
    }

    #[test]
    fn rhs_is_quadratic(spec in separable_kernel(), w in omega(1..=64), s in 0.01f64..10.0) {
        let rhs = Rhs::new(&spec, w.len()).unwrap();
        let base = rhs.eval_vec(&w);
        let scaled: Vec<f64> = w.iter().map(|x| s * x).collect();
        let expect: Vec<f64> = base.iter().map(|x| s * s * x).collect();
        let (_, scale) = brute_force_rhs(&spec, &scaled);
        close(&rhs.eval_vec(&scaled), &expect, &scale, 1e-12)?;
    }

    #[test]
    fn empty_classes_only_gain(spec in separable_kernel(), w in omega(1..=64)) {
        let out = Rhs::new(&spec, w.len()).unwrap().eval_vec(&w);
        for (x, f) in w.iter().zip(&out) {
            if *x == 0.0 {
                prop_assert!(*f >= 0.0);
            }
        }
    }

    #[test]
    fn mass_and_number_dissipate(spec in separable_kernel(), w in omega(1..=128)) {
        let n = w.len();
        let rhs = Rhs::new(&spec, n).unwrap();
        let out = rhs.eval_vec(&w);
        let mass_rate: f64 = out.iter().enumerate().map(|(k, f)| (k + 1) as f64 * f).sum();
        let gain_n: f64 = (1..=n).map(|j| j as f64 * rhs.lambda(n, j) * w[j - 1]).sum();
        let outflux = (n + 1) as f64 * w[n - 1] * gain_n;
        let (_, scale) = brute_force_rhs(&spec, &w);
        let mass_scale: f64 = scale.iter().enumerate().map(|(k, s)| (k + 1) as f64 * s).sum();
        prop_assert!(mass_rate <= 1e-12 * mass_scale);
        prop_assert!((mass_rate + outflux).abs() <= 1e-12 * mass_scale);
        let number_rate: f64 = out.iter().sum();
        let number_scale: f64 = scale.iter().sum();
        let theta_sum: f64 = rhs.theta().iter().zip(&w).map(|(t, x)| t * x).sum();
        prop_assert!(number_rate <= -0.5 * theta_sum * theta_sum + 1e-12 * number_scale);
    }

    #[test]
    fn kernel_symmetric_nonnegative(spec in separable_kernel(), i in 1usize..500, j in 1usize..500) {
        let a = eval_kernel(&spec, i, j).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, eval_kernel(&spec, j, i).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_rescaling_covariance(spec in separable_kernel(), w in omega(2..=12), s in 0.25f64..4.0) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let n = w.len();
        let cfg = IntegratorConfig::default();
        let t_end = 1.0;
        let base = integrate(&spec, &State::new(0.0, w.clone()), t_end, &uniform_grid(t_end, 3), &cfg, &[]).unwrap();
        let scaled_init: Vec<f64> = w.iter().map(|x| s * x).collect();
        let scaled = integrate(&spec, &State::new(0.0, scaled_init), t_end / s, &uniform_grid(t_end / s, 3), &cfg, &[]).unwrap();
        let expect: Vec<f64> = base.last().omega.iter().map(|x| s * x).collect();
        let scale = s * w.iter().cloned().fold(0.0, f64::max);
        for k in 0..n {
            prop_assert!((scaled.last().omega[k] - expect[k]).abs() <= 1e-7 * scale);
        }
    }

    #[test]
    fn weak_form_holds_along_trajectories(
        spec in separable_kernel(),
        w in omega(2..=12),
        psi in proptest::collection::vec(0.0f64..4.0, 12),
    ) {
        // Trapezoid error scales with (h·rate)², so resolve the fastest initial rate.
        let n = w.len();
        let rhs = Rhs::new(&spec, n).unwrap();
        let mut sums = Sums::new(n);
        rhs.fill_sums(&w, &mut sums);
        let rate = (0..n).map(|k| sums.gain[k] + sums.loss[k]).fold(1.0, f64::max);
        let t_end = (100.0 / rate).min(1.0);
        let samples = (400.0 * rate * t_end).ceil() as usize + 1;
        let traj = integrate(&spec, &State::new(0.0, w.clone()), t_end, &uniform_grid(t_end, samples), &IntegratorConfig::default(), &[]).unwrap();
        let psi_scale: f64 = psi.iter().cloned().fold(1.0, f64::max);
        let r = weak_form_residual(&traj, &TestSequence::Custom(psi), 0.0, t_end).unwrap();
        prop_assert!(r.abs() <= 1e-5 * psi_scale * (1.0 + moment_of(&w, 1.0)), "residual {}", r);
    }
}
