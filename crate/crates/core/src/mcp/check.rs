use serde::{Deserialize, Serialize};

use super::{ComplementaritySystem, Var, VarKind};

/// One row whose complementarity error exceeds the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub position: usize,
    pub var: Var,
    pub role: String,
    pub value: f64,
    pub residual: f64,
    pub error: f64,
}

/// How many rows of one constraint family bind for a producer and scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingConstraint {
    pub role: String,
    pub tech: usize,
    /// `None` for scenario-independent rows.
    pub scenario: Option<usize>,
    pub binding: usize,
    pub rows: usize,
}

/// Diagnostic report of a candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub max_error: f64,
    pub tol: f64,
    /// Ordered by position.
    pub violated: Vec<RowError>,
    /// Ordered by tech, role, scenario.
    pub binding: Vec<BindingConstraint>,
}

impl SolutionCheck {
    pub fn passed(&self) -> bool {
        self.violated.is_empty()
    }

    pub fn violates(&self, role: &str) -> bool {
        self.violated.iter().any(|r| r.role == role)
    }
}

/// Evaluates `z` against the system. A dimension mismatch is reported as a
/// single violation with infinite error rather than as an error.
pub fn check_solution(sys: &ComplementaritySystem, z: &[f64], tol: f64) -> SolutionCheck {
    let Ok(residual) = sys.residual(z) else {
        return SolutionCheck {
            max_error: f64::INFINITY,
            tol,
            violated: vec![RowError {
                position: z.len(),
                var: Var::DemandPrice0,
                role: "dimension".into(),
                value: f64::NAN,
                residual: f64::NAN,
                error: f64::INFINITY,
            }],
            binding: Vec::new(),
        };
    };
    let errors = sys.errors_from(z, &residual);
    let max_error = errors.iter().cloned().fold(0.0, f64::max);

    let violated = errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > tol || e.is_nan())
        .map(|(j, &error)| {
            let var = sys.index.var(j);
            RowError {
                position: j,
                var,
                role: var.row_role().to_string(),
                value: z[j],
                residual: residual[j],
                error,
            }
        })
        .collect();

    let mut binding: std::collections::BTreeMap<(usize, &'static str, Option<usize>), (usize, usize)> =
        Default::default();
    for (j, var) in sys.index.iter().enumerate() {
        let is_constraint = matches!(
            var,
            Var::CapacityDual { .. }
                | Var::FirstStageCapacityDual { .. }
                | Var::ResourceDual { .. }
                | Var::SaleLimitDual { .. }
                | Var::EmissionDual { .. }
                | Var::TradeCapDual { .. }
        );
        if !is_constraint || sys.kinds[j] != VarKind::Nonneg {
            continue;
        }
        let tech = var.tech().expect("producer row");
        let entry = binding
            .entry((tech, var.row_role(), var.scenario()))
            .or_default();
        entry.1 += 1;
        if residual[j].abs() <= tol {
            entry.0 += 1;
        }
    }
    let binding = binding
        .into_iter()
        .map(|((tech, role, scenario), (binding, rows))| BindingConstraint {
            role: role.to_string(),
            tech,
            scenario,
            binding,
            rows,
        })
        .collect();

    SolutionCheck {
        max_error,
        tol,
        violated,
        binding,
    }
}
