use sdcoag::diagnostics::{estimate_gelation_time, moment_of, zeta_series};
use sdcoag::integrator::{integrate, solution_residual, uniform_grid, IntegrationError, IntegratorConfig, Trajectory};
use sdcoag::kernel::{KappaModel, KernelSpec, ThetaSequence};
use sdcoag::system::{make_initial_state, InitialData, State};

fn run(spec: &KernelSpec, init: &InitialData, n: usize, t_end: f64, samples: usize, cfg: &IntegratorConfig) -> Trajectory {
    let state = make_initial_state(init, n).unwrap();
    integrate(spec, &state, t_end, &uniform_grid(t_end, samples), cfg, &[1, 4]).unwrap()
}

fn mono() -> InitialData {
    InitialData::Monodisperse { a: 1.0 }
}

#[test]
fn moments_decrease_and_accumulators_agree() {
    let spec = KernelSpec::new(ThetaSequence::power(1.0, 0.75), KappaModel::ScaledProduct { c: 0.5 });
    let init = InitialData::Geometric { a: 1.0, r: 0.6 };
    let traj = run(&spec, &init, 48, 5.0, 201, &IntegratorConfig::default());
    let m1_0 = moment_of(&traj.first().omega, 1.0);
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(moment_of(&b.omega, 1.0) <= moment_of(&a.omega, 1.0) + 1e-13);
        assert!(moment_of(&b.omega, 0.0) <= moment_of(&a.omega, 0.0) + 1e-13);
        // Σ ω_i F_i ≥ ½ (Σ θω)² pointwise, hence for the increments.
        let coag = b.acc.total_coag - a.acc.total_coag;
        let theta = b.acc.theta_sq - a.acc.theta_sq;
        assert!(coag >= 0.5 * theta - 1e-12);
        assert!(b.omega.iter().all(|x| *x >= 0.0));
    }
    for s in &traj.samples {
        // Mass lost from the system is exactly what crossed the boundary.
        let lost = m1_0 - moment_of(&s.omega, 1.0);
        assert!((lost - s.acc.mass_outflux).abs() <= 1e-9 * m1_0, "t = {}", s.t);
    }
}

#[test]
fn tighter_tolerance_converges() {
    let spec = KernelSpec::power(1.0, 1.0);
    let coarse = run(&spec, &mono(), 32, 2.0, 11, &IntegratorConfig::default().with_tolerances(1e-8, 1e-12));
    let fine = run(&spec, &mono(), 32, 2.0, 11, &IntegratorConfig::default().with_tolerances(5e-9, 5e-13));
    let finest = run(&spec, &mono(), 32, 2.0, 11, &IntegratorConfig::default().with_tolerances(1e-12, 1e-16));
    let err = |t: &Trajectory| {
        t.last().omega.iter().zip(&finest.last().omega).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    assert!(err(&coarse) < 1e-6);
    assert!(err(&fine) <= err(&coarse) * 1.01 + 1e-14);
}

#[test]
fn sampling_grid_does_not_change_solution() {
    let spec = KernelSpec::power(1.0, 0.5);
    let sparse = run(&spec, &mono(), 32, 3.0, 4, &IntegratorConfig::default());
    let dense = run(&spec, &mono(), 32, 3.0, 301, &IntegratorConfig::default());
    for (a, b) in sparse.last().omega.iter().zip(&dense.last().omega) {
        assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
    }
}

#[test]
fn discrete_residual_small() {
    let scalar = run(&KernelSpec::power(1.0, 0.0), &mono(), 1, 1.0, 2001, &IntegratorConfig::default());
    assert!(solution_residual(&scalar, 1, 0.0, 1.0).unwrap().abs() <= 1e-6);
    let traj = run(&KernelSpec::power(1.0, 1.0), &mono(), 16, 2.0, 2001, &IntegratorConfig::default());
    for i in [1, 2, 8, 16] {
        assert!(solution_residual(&traj, i, 0.0, 2.0).unwrap().abs() <= 1e-5, "component {i}");
    }
}

#[test]
fn scalar_closed_form_under_rk4() {
    let traj = run(&KernelSpec::power(1.0, 0.0), &mono(), 1, 3.0, 31, &IntegratorConfig::fixed_rk4(1e-3));
    for s in &traj.samples {
        let exact = 1.0 / (1.0 + 2.0 * s.t);
        assert!((s.omega[0] - exact).abs() <= 1e-11 * exact);
    }
}

/// Partial sum to 10⁶ plus the integral tail, bracketed by the Euler–Maclaurin end correction.
fn zeta_oracle(s: f64) -> f64 {
    let n = 1_000_000u64;
    let mut sum = 0.0f64;
    for i in (1..n).rev() {
        sum += (i as f64).powf(-s);
    }
    let nf = n as f64;
    sum + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s)
}

#[test]
fn zeta_matches_partial_sum_oracle() {
    for s in [1.1, 1.25, 1.5, 2.0, 3.0] {
        let got = zeta_series(s);
        let oracle = zeta_oracle(s);
        assert!((got - oracle).abs() <= 1e-6, "s = {s}: {got} vs {oracle}");
    }
    assert!((zeta_series(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    assert!((zeta_series(1.25) - 4.595_1).abs() < 1e-4);
}

#[test]
fn product_kernel_gel_time_regression() {
    let spec = KernelSpec::power(1.0, 1.0);
    // Same 0.01 sample spacing as a T = 10, 1001-sample run, cut at T = 2.
    let adaptive = run(&spec, &mono(), 256, 2.0, 201, &IntegratorConfig::default());
    let oracle = run(&spec, &mono(), 256, 2.0, 201, &IntegratorConfig::fixed_rk4(1e-4));
    let halved = run(&spec, &mono(), 256, 2.0, 201, &IntegratorConfig::fixed_rk4(5e-5));
    let t_adaptive = estimate_gelation_time(&adaptive, 0.5).unwrap().unwrap();
    let t_oracle = estimate_gelation_time(&oracle, 0.5).unwrap().unwrap();
    let t_halved = estimate_gelation_time(&halved, 0.5).unwrap().unwrap();
    assert!((t_oracle - t_halved).abs() <= 1e-10 * t_oracle);
    assert!((t_adaptive - t_oracle).abs() <= 1e-8 * t_oracle, "{t_adaptive} vs {t_oracle}");
    assert!((t_oracle - GEL_TIME_N256).abs() <= 1e-10 * GEL_TIME_N256, "{t_oracle}");
}

/// δ = 0.5 crossing for the product kernel at n = 256, frozen from the fixed-step run.
const GEL_TIME_N256: f64 = 1.553137692010138;

#[test]
fn constant_kernel_does_not_gel() {
    let traj = run(&KernelSpec::power(1.0, 0.0), &mono(), 512, 1.0, 101, &IntegratorConfig::default());
    assert_eq!(estimate_gelation_time(&traj, 0.01).unwrap(), None);
}

#[test]
fn step_underflow_reports_last_good_state() {
    let init = make_initial_state(&mono(), 64).unwrap();
    let cfg = IntegratorConfig { h_min: 0.5, h_init: 0.5, h_max: 1.0, ..IntegratorConfig::default() };
    let err = integrate(&KernelSpec::power(1.0, 1.0), &init, 2.0, &uniform_grid(2.0, 3), &cfg, &[]).unwrap_err();
    assert!(matches!(err, IntegrationError::StepUnderflow { .. }));
    let last: &State = err.last_good().unwrap();
    assert_eq!(last.t, 0.0);
    assert_eq!(last.omega, init.omega);
}
