use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mcp::{assemble_with, check_solution, pack, AssembleOptions, SolutionCheck, VarKind};
use crate::model::{EquilibriumSolution, MarketInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub tol: f64,
    pub check: SolutionCheck,
    /// Largest clearing-row residual per clearing role.
    pub clearing: Vec<(String, f64)>,
    /// `theta` minus the issue bound, natural units.
    pub theta_excess: f64,
    pub failures: Vec<String>,
}

/// Re-assembles the system of `instance` and checks `sol` against it.
pub fn verify(
    instance: &MarketInstance,
    sol: &EquilibriumSolution,
    options: AssembleOptions,
    tol: f64,
) -> Result<VerifyReport> {
    let sys = assemble_with(instance, options)?;
    let z = pack(&sys, sol)?;
    let check = check_solution(&sys, &z, tol);
    let residual = sys.residual(&z)?;

    let mut clearing: Vec<(String, f64)> = Vec::new();
    for (j, var) in sys.index.iter().enumerate() {
        if sys.kinds[j] != VarKind::Free {
            continue;
        }
        let role = var.row_role();
        let r = residual[j].abs();
        match clearing.iter_mut().find(|(name, _)| name == role) {
            Some(entry) => entry.1 = entry.1.max(r),
            None => clearing.push((role.to_string(), r)),
        }
    }

    let theta_excess = sol.theta - instance.policy.cap_bound()?;
    let mut failures = Vec::new();
    for row in &check.violated {
        failures.push(format!("{} [{}] error {:.3e}", row.var, row.role, row.error));
    }
    for (role, r) in &clearing {
        if *r > tol {
            failures.push(format!("{role} residual {r:.3e}"));
        }
    }
    let slack = tol * sys.units().emissions();
    if theta_excess > slack {
        failures.push(format!("issued allowances exceed the bound by {theta_excess:.3e} tCO2e"));
    }
    Ok(VerifyReport {
        passed: failures.is_empty(),
        tol,
        check,
        clearing,
        theta_excess,
        failures,
    })
}

/// `|a - b|_inf / (1 + |b|_inf)`
fn relative_gap<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut gap, mut scale) = (0.0f64, 0.0f64);
    for (x, y) in a.into_iter().zip(b) {
        gap = gap.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    gap / (1.0 + scale)
}

/// Relative deviation of `candidate` from `reference` per primal and price
/// block, the quantities that are unique at an equilibrium.
pub fn block_deviations(
    candidate: &EquilibriumSolution,
    reference: &EquilibriumSolution,
) -> Vec<(&'static str, f64)> {
    let (a, b) = (candidate, reference);
    vec![
        ("q0", relative_gap(&a.q0, &b.q0)),
        ("q", relative_gap(&a.q, &b.q)),
        ("x0", relative_gap(&a.x0, &b.x0)),
        ("x", relative_gap(&a.x, &b.x)),
        ("theta", relative_gap([&a.theta], [&b.theta])),
        ("price0", relative_gap([&a.price0], [&b.price0])),
        ("price", relative_gap(&a.price, &b.price)),
        ("allowance_price", relative_gap([&a.allowance_price], [&b.allowance_price])),
        ("trade_price", relative_gap(&a.trade_price, &b.trade_price)),
    ]
}
