//! Conversion between `z` vectors and [`EquilibriumSolution`]s.

use ndarray::{Array2, Array3};

use super::{ComplementaritySystem, Var};
use crate::error::{Error, Result};
use crate::model::{EquilibriumSolution, Multipliers, SolverStats};

/// Writes a solution into a `z` vector of `sys`, in the system's units.
pub fn pack(sys: &ComplementaritySystem, sol: &EquilibriumSolution) -> Result<Vec<f64>> {
    let idx = &sys.index;
    let (n, horizon, k) = (idx.n_tech(), idx.horizon(), idx.n_scenarios());
    if [sol.n_tech(), sol.horizon(), sol.n_scenarios()] != [n, horizon, k] {
        return Err(Error::DimensionMismatch {
            expected: n * horizon * k,
            actual: sol.q.len(),
        });
    }
    let mut z = vec![0.0; sys.len()];
    let m = &sol.multipliers;
    for i in 0..n {
        sys.set_natural(&mut z, Var::Build0 { tech: i }, sol.x0[i]);
        sys.set_natural(&mut z, Var::Output0 { tech: i }, sol.q0[i]);
        sys.set_natural(&mut z, Var::Allowance { tech: i }, sol.allowances[i]);
        sys.set_natural(&mut z, Var::FirstStageCapacityDual { tech: i }, m.kappa[i]);
        for w in 0..k {
            sys.set_natural(&mut z, Var::Purchase { tech: i, scenario: w }, sol.purchases[[i, w]]);
            sys.set_natural(&mut z, Var::Sale { tech: i, scenario: w }, sol.sales[[i, w]]);
            sys.set_natural(&mut z, Var::ResourceDual { tech: i, scenario: w }, m.psi[[i, w]]);
            sys.set_natural(&mut z, Var::SaleLimitDual { tech: i, scenario: w }, m.beta[[i, w]]);
            sys.set_natural(&mut z, Var::EmissionDual { tech: i, scenario: w }, m.gamma[[i, w]]);
            if idx.capped().contains(&i) {
                let nu = m.trade_cap.as_ref().map_or(0.0, |a| a[[i, w]]);
                sys.set_natural(&mut z, Var::TradeCapDual { tech: i, scenario: w }, nu);
            }
            for t in 1..=horizon {
                sys.set_natural(&mut z, Var::Build { tech: i, t, scenario: w }, sol.x[[i, t - 1, w]]);
                sys.set_natural(&mut z, Var::Output { tech: i, t, scenario: w }, sol.q[[i, t - 1, w]]);
                sys.set_natural(
                    &mut z,
                    Var::CapacityDual { tech: i, t, scenario: w },
                    m.alpha[[i, t - 1, w]],
                );
            }
        }
    }
    sys.set_natural(&mut z, Var::DemandPrice0, sol.price0);
    for w in 0..k {
        sys.set_natural(&mut z, Var::TradePrice { scenario: w }, sol.trade_price[w]);
        for t in 1..=horizon {
            sys.set_natural(&mut z, Var::DemandPrice { t, scenario: w }, sol.price[[t - 1, w]]);
        }
    }
    sys.set_natural(&mut z, Var::AllowancePrice, sol.allowance_price);
    sys.set_natural(&mut z, Var::Issued, sol.theta);
    sys.set_natural(&mut z, Var::IssueBoundDual, m.eta);
    Ok(z)
}

/// Reads a `z` vector of `sys` back into natural units.
pub fn unpack(sys: &ComplementaritySystem, z: &[f64], stats: SolverStats) -> Result<EquilibriumSolution> {
    if z.len() != sys.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.len(),
            actual: z.len(),
        });
    }
    let idx = &sys.index;
    let (n, horizon, k) = (idx.n_tech(), idx.horizon(), idx.n_scenarios());
    let get = |v: Var| sys.natural(z, v);

    let per_tech = |f: &dyn Fn(usize) -> Var| (0..n).map(|i| get(f(i))).collect::<Vec<_>>();
    let per_tech_scenario =
        |f: &dyn Fn(usize, usize) -> Var| Array2::from_shape_fn((n, k), |(i, w)| get(f(i, w)));
    let per_tech_year = |f: &dyn Fn(usize, usize, usize) -> Var| {
        Array3::from_shape_fn((n, horizon, k), |(i, t, w)| get(f(i, t + 1, w)))
    };

    let trade_cap = if idx.capped().is_empty() {
        None
    } else {
        Some(Array2::from_shape_fn((n, k), |(i, w)| {
            if idx.capped().contains(&i) {
                get(Var::TradeCapDual { tech: i, scenario: w })
            } else {
                0.0
            }
        }))
    };

    let multipliers = Multipliers {
        alpha: per_tech_year(&|tech, t, scenario| Var::CapacityDual { tech, t, scenario }),
        kappa: per_tech(&|tech| Var::FirstStageCapacityDual { tech }),
        psi: per_tech_scenario(&|tech, scenario| Var::ResourceDual { tech, scenario }),
        beta: per_tech_scenario(&|tech, scenario| Var::SaleLimitDual { tech, scenario }),
        gamma: per_tech_scenario(&|tech, scenario| Var::EmissionDual { tech, scenario }),
        eta: get(Var::IssueBoundDual),
        trade_cap,
    };

    Ok(EquilibriumSolution {
        q0: per_tech(&|tech| Var::Output0 { tech }),
        q: per_tech_year(&|tech, t, scenario| Var::Output { tech, t, scenario }),
        x0: per_tech(&|tech| Var::Build0 { tech }),
        x: per_tech_year(&|tech, t, scenario| Var::Build { tech, t, scenario }),
        allowances: per_tech(&|tech| Var::Allowance { tech }),
        purchases: per_tech_scenario(&|tech, scenario| Var::Purchase { tech, scenario }),
        sales: per_tech_scenario(&|tech, scenario| Var::Sale { tech, scenario }),
        theta: get(Var::Issued),
        price0: get(Var::DemandPrice0),
        price: Array2::from_shape_fn((horizon, k), |(t, w)| {
            get(Var::DemandPrice { t: t + 1, scenario: w })
        }),
        allowance_price: get(Var::AllowancePrice),
        trade_price: (0..k).map(|w| get(Var::TradePrice { scenario: w })).collect(),
        multipliers,
        residual_norm: sys.max_error(z)?,
        stats,
    })
}
