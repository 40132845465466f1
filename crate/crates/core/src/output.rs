//! CSV and JSON writers.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::moment_of;
use crate::integrator::Trajectory;

fn push_value(line: &mut String, v: f64) {
    line.push(',');
    write!(line, "{v:.16e}").unwrap();
}

/// Trajectory table, one row per sample.
///
/// Columns: `t, M0, M1, M2, I_theta_sq, I_M1_sq, I_M0_sq, I_total_coag`,
/// then `omega_1 … omega_k` with `k = min(n, head_size)`.
pub fn emit_csv(traj: &Trajectory, head_size: usize) -> String {
    let k = traj.n.min(head_size);
    let mut out = String::from("t,M0,M1,M2,I_theta_sq,I_M1_sq,I_M0_sq,I_total_coag");
    for i in 1..=k {
        write!(out, ",omega_{i}").unwrap();
    }
    out.push('\n');
    for s in &traj.samples {
        let mut line = format!("{:.16e}", s.t);
        for v in [
            moment_of(&s.omega, 0.0),
            moment_of(&s.omega, 1.0),
            moment_of(&s.omega, 2.0),
            s.acc.theta_sq,
            s.acc.m1_sq,
            s.acc.m0_sq,
            s.acc.total_coag,
        ] {
            push_value(&mut line, v);
        }
        for w in &s.omega[..k] {
            push_value(&mut line, *w);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, uniform_grid, IntegratorConfig};
    use crate::kernel::KernelSpec;
    use crate::system::{make_initial_state, InitialData};

    #[test]
    fn csv_shape() {
        let init = make_initial_state(&InitialData::Monodisperse { a: 1.0 }, 4).unwrap();
        let traj = integrate(
            &KernelSpec::power(1.0, 1.0),
            &init,
            1.0,
            &uniform_grid(1.0, 5),
            &IntegratorConfig::default(),
            &[],
        )
        .unwrap();
        let csv = emit_csv(&traj, 8);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "t,M0,M1,M2,I_theta_sq,I_M1_sq,I_M0_sq,I_total_coag,omega_1,omega_2,omega_3,omega_4");
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 12));
        assert!(!csv.contains('\r'));
        let csv = emit_csv(&traj, 2);
        assert!(csv.lines().next().unwrap().ends_with("omega_1,omega_2"));
        for field in csv.lines().nth(3).unwrap().split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}
