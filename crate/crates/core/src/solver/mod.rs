//! Complementarity solver, planner oracle and verification.
//!
//! [`solve_mcp`] runs a semismooth Newton method on the Fischer–Burmeister
//! reformulation of `F(z) ⊥ z`, with free rows kept as equations and an
//! Armijo backtracking search on the squared merit. Stalls are handled by
//! projected Gauss–Seidel polishing and seeded restarts.

mod initial;
mod lu;
mod newton;
mod planner;
mod polish;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use initial::{initial_iterate, minimum_emissions};
pub use newton::{solve_mcp, solve_mcp_traced};
pub use planner::solve_planner;
pub use verify::{block_deviations, verify, VerifyReport};

use crate::mcp::RowError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest accepted complementarity error, in the system's units.
    pub tol: f64,
    pub max_iter: usize,
    /// Step shrink factor of the backtracking search.
    pub backtracking: f64,
    /// Sufficient-decrease constant.
    pub sigma: f64,
    /// Projected Gauss–Seidel sweeps per stall.
    pub fallback_sweeps: usize,
    /// Randomized restarts after a stall.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            backtracking: 0.5,
            sigma: 1e-4,
            fallback_sweeps: 50,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0) {
            return Err("tol must be positive".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be at least 1".into());
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err("backtracking must lie in (0, 1)".into());
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err("sigma must lie in (0, 0.5)".into());
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Newton phase: 0 for the first run, then one per fallback or restart.
    pub phase: usize,
    /// Smoothing level of the Fischer–Burmeister function, 0 once switched off.
    pub smoothing: f64,
    /// `0.5 * |Phi|^2` of the smoothed residual after the step; the line search
    /// makes it nonincreasing while `phase` and `smoothing` stay fixed.
    pub merit: f64,
    pub step: f64,
    /// Max complementarity error after the step.
    pub residual: f64,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.6e} {:.6e} {:.6e} {:.6e}",
            self.iteration, self.phase, self.smoothing, self.merit, self.step, self.residual
        )
    }
}

/// Formats a trace as one line per record under a header line.
pub fn format_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::from("iter phase smoothing merit step residual\n");
    for rec in trace {
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    out
}

/// The solver gave up; carries everything needed to diagnose why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonConvergence {
    pub iterations: usize,
    pub best_error: f64,
    pub best_iterate: Vec<f64>,
    /// Max complementarity error per accepted iteration.
    pub residual_history: Vec<f64>,
    /// Largest-error rows of the best iterate, worst first.
    pub worst_rows: Vec<RowError>,
    pub diagnosis: String,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no convergence after {} iterations (best error {:.3e}): {}",
            self.iterations, self.best_error, self.diagnosis
        )?;
        if let Some(row) = self.worst_rows.first() {
            write!(f, "; worst row {} [{}] error {:.3e}", row.var, row.role, row.error)?;
        }
        Ok(())
    }
}

impl std::error::Error for NonConvergence {}
