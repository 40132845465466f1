//! Config-driven runs: simulate, check bounds, sweep in `n`.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::certify::{certify, CheckOutcome, CheckPlan, PairPolicy};
use crate::config::{ConfigError, RunConfig};
use crate::convergence::{refine_in_n, ConvergenceError};
use crate::integrator::{integrate, uniform_grid, IntegrationError, StepStats, Trajectory};
use crate::output::{emit_csv, to_json, write_file};
use crate::system::{make_initial_state, SystemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Check,
    Sweep,
}

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    ConfigError = 1,
    BoundFailed = 2,
    NumericalFailure = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Serialize)]
struct BoundsFile<'a> {
    n: usize,
    #[serde(rename = "T")]
    t_end: f64,
    all_pass: bool,
    stats: StepStats,
    bounds: &'a [CheckOutcome],
}

impl RunConfig {
    pub fn check_plan(&self) -> CheckPlan {
        CheckPlan {
            bounds: self.checks.bounds.clone(),
            eta: self.run.eta,
            kappa0: self.checks.kappa0,
            c: self.checks.c,
            zeta: self.checks.zeta,
            c_uniform: self.checks.c_uniform,
            pairs: PairPolicy::Anchored,
        }
    }
}

struct Runner<'a, W: Write> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    out: W,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

fn integration_failure(e: IntegrationError) -> Failure {
    match &e {
        IntegrationError::InvalidConfig(_) | IntegrationError::InvalidGrid(_) => Failure::Config(e.to_string()),
        IntegrationError::System(SystemError::InvalidInitialData(_) | SystemError::Kernel(_)) => {
            Failure::Config(e.to_string())
        }
        _ => match e.last_good() {
            Some(s) => Failure::Numerical(format!("{e}; last good state at t = {}", s.t)),
            None => Failure::Numerical(e.to_string()),
        },
    }
}

impl<W: Write> Runner<'_, W> {
    fn say(&mut self, line: &str) {
        if !self.opts.quiet {
            let _ = writeln!(self.out, "{line}");
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.opts.out_dir.clone().unwrap_or_else(|| self.cfg.output.dir.clone())
    }

    fn simulate(&mut self) -> Result<Trajectory, Failure> {
        let cfg = self.cfg;
        let spec = cfg.kernel_spec()?;
        spec.ensure_range(cfg.run.n).map_err(|e| Failure::Config(e.to_string()))?;
        let init = make_initial_state(&cfg.initial_data()?, cfg.run.n).map_err(|e| Failure::Config(e.to_string()))?;
        let grid = uniform_grid(cfg.run.t_end, cfg.run.samples);
        let traj = integrate(&spec, &init, cfg.run.t_end, &grid, &cfg.integrator_config()?, &cfg.run.tail_cutoffs)
            .map_err(integration_failure)?;
        let dir = self.out_dir();
        write_file(&dir, &cfg.output.csv, &emit_csv(&traj, cfg.output.head_size))?;
        let s = traj.stats;
        self.say(&format!(
            "integrated n = {} to T = {}: {} accepted, {} rejected steps; wrote {}",
            traj.n,
            cfg.run.t_end,
            s.accepted,
            s.rejected,
            dir.join(&cfg.output.csv).display()
        ));
        Ok(traj)
    }

    fn check(&mut self) -> Result<Status, Failure> {
        let traj = self.simulate()?;
        let outcomes = certify(&traj, &self.cfg.check_plan()).map_err(|e| Failure::Config(e.to_string()))?;
        let all_pass = outcomes.iter().all(|o| o.passed() != Some(false));
        for o in &outcomes {
            let line = match o {
                CheckOutcome::Report(r) => format!(
                    "{:<12} {} lhs = {:.6e} rhs = {:.6e} margin = {:.3e}",
                    r.bound_id.as_str(),
                    if r.pass { "pass" } else { "FAIL" },
                    r.lhs,
                    r.rhs,
                    r.margin
                ),
                CheckOutcome::Inapplicable(i) => {
                    format!("{:<12} inapplicable: {}", i.bound_id.as_str(), i.inapplicable)
                }
            };
            self.say(&line);
        }
        let file = BoundsFile {
            n: traj.n,
            t_end: self.cfg.run.t_end,
            all_pass,
            stats: traj.stats,
            bounds: &outcomes,
        };
        write_file(&self.out_dir(), &self.cfg.output.report, &to_json(&file))?;
        Ok(if all_pass { Status::Success } else { Status::BoundFailed })
    }

    fn sweep(&mut self) -> Result<Status, Failure> {
        let cfg = self.cfg;
        let sweep = cfg.sweep_config()?.ok_or_else(|| Failure::Config("sweep mode needs a [sweep] section".into()))?;
        let spec = cfg.kernel_spec()?;
        let family = cfg.initial_data()?;
        let report = refine_in_n(&spec, &family, &sweep, &cfg.integrator_config()?).map_err(|e| match e {
            ConvergenceError::InvalidSweep(_) | ConvergenceError::OracleTooLarge(_) => Failure::Config(e.to_string()),
            ConvergenceError::System(SystemError::InvalidInitialData(_) | SystemError::Kernel(_)) => {
                Failure::Config(e.to_string())
            }
            ConvergenceError::Integration(e) => integration_failure(e),
            e => Failure::Numerical(e.to_string()),
        })?;
        for (k, n) in report.n_list.iter().enumerate() {
            let gel = report.gel_times[k].map_or("none".to_string(), |t| format!("{t:.6}"));
            self.say(&format!(
                "n = {n:>6}  retention = {:.12}  boundary loss = {:.3e}  gel time = {gel}",
                report.mass_retention[k], report.boundary_loss[k]
            ));
        }
        for (n, msg) in &report.failures {
            self.say(&format!("n = {n:>6}  failed: {msg}"));
        }
        self.say(&format!("classification: {}", serde_json::to_string(&report.classification).unwrap()));
        write_file(&self.out_dir(), &cfg.output.sweep, &to_json(&report))?;
        Ok(if report.failures.is_empty() { Status::Success } else { Status::NumericalFailure })
    }
}

/// Runs `mode` for `cfg`, writing output files and a human-readable summary to `out`.
pub fn run<W: Write>(cfg: &RunConfig, mode: Mode, opts: &RunOptions, out: W) -> Status {
    let mut runner = Runner { cfg, opts, out };
    let result = cfg.validate().map_err(Failure::from).and_then(|_| match mode {
        Mode::Simulate => runner.simulate().map(|_| Status::Success),
        Mode::Check => runner.check(),
        Mode::Sweep => runner.sweep(),
    });
    match result {
        Ok(status) => status,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            Status::ConfigError
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            Status::NumericalFailure
        }
    }
}
