//! Simulation and moment-bound certification for the truncated discrete
//! Safronov–Dubovskiĭ coagulation system.

pub mod app;
pub mod certify;
pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod integrator;
pub mod kernel;
pub mod output;
pub mod summation;
pub mod system;
