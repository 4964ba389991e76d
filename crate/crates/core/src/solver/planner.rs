//! Welfare-maximizing planner problem, solved as one convex QP.
//!
//! Under perfect competition the equilibrium coincides with the cost-minimal
//! plan, so this serves as an oracle for the complementarity path. It shares
//! only the instance types with that path.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use ndarray::{Array2, Array3};

use super::polish::Qp;
use crate::error::{Error, Result};
use crate::units::InstanceScale as Scale;
use crate::model::{
    validate_instance, EquilibriumSolution, MarketInstance, Multipliers, SolverStats, ValidationReport,
    Violation,
};

struct Columns {
    n: usize,
    horizon: usize,
    k: usize,
}

impl Columns {
    fn block(&self) -> usize {
        2 + 2 * self.horizon * self.k
    }
    fn ts(&self, t: usize, w: usize) -> usize {
        (t - 1) * self.k + w
    }
    fn x0(&self, i: usize) -> usize {
        i * self.block()
    }
    fn x(&self, i: usize, t: usize, w: usize) -> usize {
        i * self.block() + 1 + self.ts(t, w)
    }
    fn q0(&self, i: usize) -> usize {
        i * self.block() + 1 + self.horizon * self.k
    }
    fn q(&self, i: usize, t: usize, w: usize) -> usize {
        i * self.block() + 2 + self.horizon * self.k + self.ts(t, w)
    }
    fn theta(&self) -> usize {
        self.n * self.block()
    }
    fn len(&self) -> usize {
        self.theta() + 1
    }
}

#[derive(Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn push(&mut self, entries: &[(usize, f64)], rhs: f64) -> usize {
        let r = self.b.len();
        for &(c, v) in entries {
            self.i.push(r);
            self.j.push(c);
            self.v.push(v);
        }
        self.b.push(rhs);
        r
    }
}

/// Solves the planner problem; results are in natural units.
pub fn solve_planner(instance: &MarketInstance) -> Result<EquilibriumSolution> {
    validate_instance(instance).into_result()?;
    if !instance.policy.trade_caps.is_empty() {
        return Err(Error::InvalidInstance(ValidationReport {
            violations: vec![Violation {
                field: "policy.trade_caps".into(),
                message: "the planner oracle does not model trade caps".into(),
            }],
        }));
    }
    let started = Instant::now();
    let u = Scale::for_instance(instance);
    let n = instance.n_tech();
    let horizon = instance.horizon;
    let k = instance.n_scenarios();
    let cols = Columns { n, horizon, k };
    let nv = cols.len();
    let tau = instance.hours_per_year;
    let probs = &instance.scenarios.probabilities;

    let mut p_diag = vec![0.0; nv];
    let mut q = vec![0.0; nv];
    for (i, tech) in instance.technologies.iter().enumerate() {
        let a = tech.linear_cost / u.energy_price();
        let b = tech.quadratic_cost * u.energy() * u.energy() / u.money();
        let capex = tech.capex / u.capacity_price();
        q[cols.x0(i)] = capex;
        q[cols.q0(i)] = a;
        p_diag[cols.q0(i)] = b;
        for w in 0..k {
            for t in 1..=horizon {
                let weight = probs[w] * instance.discount_factor(t);
                let tc = tech.op_cost_multiplier(t);
                q[cols.x(i, t, w)] = weight * tech.capex_multiplier(t) * capex;
                q[cols.q(i, t, w)] = weight * tc * a;
                p_diag[cols.q(i, t, w)] = weight * tc * b;
            }
        }
    }
    q[cols.theta()] = instance.policy.scc / u.emission_price();

    // Equalities first, then inequalities `A x <= b`.
    let mut eq = Rows::default();
    let demand0 = eq.push(
        &(0..n).map(|i| (cols.q0(i), 1.0)).collect::<Vec<_>>(),
        instance.scenarios.first_stage_demand / u.energy(),
    );
    let mut demand = Array2::zeros((horizon, k));
    for t in 1..=horizon {
        for w in 0..k {
            demand[[t - 1, w]] = eq.push(
                &(0..n).map(|i| (cols.q(i, t, w), 1.0)).collect::<Vec<_>>(),
                instance.scenarios.demand_at(t, w) / u.energy(),
            );
        }
    }

    let mut ineq = Rows::default();
    let mut cap0 = vec![0; n];
    let mut cap = Array3::zeros((n, horizon, k));
    let mut resource = Array2::zeros((n, k));
    for (i, tech) in instance.technologies.iter().enumerate() {
        let yield_ = tech.energy_per_mw(tau) * u.capacity() / u.energy();
        let installed = tech.installed_capacity / u.capacity();
        cap0[i] = ineq.push(&[(cols.q0(i), 1.0)], yield_ * installed);
        for w in 0..k {
            for t in 1..=horizon {
                let mut row = vec![(cols.q(i, t, w), 1.0), (cols.x0(i), -yield_)];
                for built in 1..t {
                    if tech.build_available(built, t) {
                        row.push((cols.x(i, built, w), -yield_));
                    }
                }
                cap[[i, t - 1, w]] = ineq.push(&row, yield_ * installed);
            }
            let mut row = vec![(cols.x0(i), 1.0)];
            row.extend((1..=horizon).map(|t| (cols.x(i, t, w), 1.0)));
            resource[[i, w]] = ineq.push(&row, (tech.resource_potential - tech.installed_capacity) / u.capacity());
        }
    }
    let mut emission = vec![0; k];
    for (w, slot) in emission.iter_mut().enumerate() {
        let mut row = vec![(cols.theta(), -1.0)];
        for (i, tech) in instance.technologies.iter().enumerate() {
            let eps = tech.emission_factor * u.energy() / u.emissions();
            if eps == 0.0 {
                continue;
            }
            row.push((cols.q0(i), eps));
            row.extend((1..=horizon).map(|t| (cols.q(i, t, w), eps)));
        }
        *slot = ineq.push(&row, 0.0);
    }
    let bound = ineq.push(&[(cols.theta(), 1.0)], instance.policy.cap_bound()? / u.emissions());
    for c in 0..nv {
        ineq.push(&[(c, -1.0)], 0.0);
    }

    let n_eq = eq.b.len();
    let n_rows = n_eq + ineq.b.len();
    let mut ai = eq.i;
    ai.extend(ineq.i.iter().map(|r| r + n_eq));
    let mut aj = eq.j;
    aj.extend(ineq.j);
    let mut av = eq.v;
    av.extend(ineq.v);
    let a = CscMatrix::new_from_triplets(n_rows, nv, ai.clone(), aj.clone(), av.clone());
    let mut b = eq.b;
    b.extend(ineq.b);
    let p = CscMatrix::new_from_triplets(nv, nv, (0..nv).collect(), (0..nv).collect(), p_diag.clone());
    let cones: [SupportedConeT<f64>; 2] = [ZeroConeT(n_eq), NonnegativeConeT(n_rows - n_eq)];

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .tol_ktratio(1e-10)
        .build()
        .map_err(|e| Error::LinearAlgebra(format!("planner settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::LinearAlgebra(format!("planner setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::Infeasible(
                "no plan meets demand, capacity and the issue bound".into(),
            ))
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            return Err(Error::Unbounded("planner cost is unbounded below".into()))
        }
        other => return Err(Error::LinearAlgebra(format!("planner QP stopped: {other:?}"))),
    }

    let qp = Qp {
        p_diag: &p_diag,
        q: &q,
        rows: &ai,
        cols: &aj,
        vals: &av,
        b: &b,
        n_eq,
    };
    let (x, z) = (&solver.solution.x, &solver.solution.z);
    let raw = qp.kkt_violation(x, z);
    let (x, z, violation) = match qp.polish(x, z) {
        Some((xp, zp)) if qp.kkt_violation(&xp, &zp) < raw => {
            let v = qp.kkt_violation(&xp, &zp);
            (xp, zp, v)
        }
        _ => (x.clone(), z.clone(), raw),
    };
    let zi = |r: usize| z[n_eq + r];

    let q0: Vec<f64> = (0..n).map(|i| x[cols.q0(i)] * u.energy()).collect();
    let qv = Array3::from_shape_fn((n, horizon, k), |(i, t, w)| x[cols.q(i, t + 1, w)] * u.energy());
    let x0: Vec<f64> = (0..n).map(|i| x[cols.x0(i)] * u.capacity()).collect();
    let xv = Array3::from_shape_fn((n, horizon, k), |(i, t, w)| x[cols.x(i, t + 1, w)] * u.capacity());
    let theta = x[cols.theta()] * u.emissions();

    let lambda: Vec<f64> = emission.iter().map(|&r| zi(r) * u.emission_price()).collect();
    let price0 = -z[demand0] * u.energy_price();
    let price = Array2::from_shape_fn((horizon, k), |(t, w)| {
        -z[demand[[t, w]]] / (probs[w] * instance.discount_factor(t + 1)) * u.energy_price()
    });
    let allowance_price: f64 = lambda.iter().sum();
    let trade_price: Vec<f64> = (0..k).map(|w| lambda[w] / probs[w]).collect();

    let multipliers = Multipliers {
        alpha: cap.mapv(|r: usize| zi(r) * u.energy_price()),
        kappa: cap0.iter().map(|&r| zi(r) * u.energy_price()).collect(),
        psi: resource.mapv(|r: usize| zi(r) * u.capacity_price()),
        beta: Array2::zeros((n, k)),
        gamma: Array2::from_shape_fn((n, k), |(_, w)| lambda[w]),
        eta: zi(bound) * u.emission_price(),
        trade_cap: None,
    };

    let (allowances, purchases, sales) = split_allowances(instance, &q0, &qv, theta);
    let info = &solver.info;
    Ok(EquilibriumSolution {
        q0,
        q: qv,
        x0,
        x: xv,
        allowances,
        purchases,
        sales,
        theta,
        price0,
        price,
        allowance_price,
        trade_price,
        multipliers,
        residual_norm: violation,
        stats: SolverStats {
            method: "planner-qp".into(),
            iterations: info.iterations as usize,
            wall_time: started.elapsed(),
        },
    })
}

/// One representative split of the issued allowances: `theta` shared in
/// proportion to each producer's worst-case own emissions, with every
/// scenario's shortfalls bought from the surpluses of the others.
fn split_allowances(
    instance: &MarketInstance,
    q0: &[f64],
    q: &Array3<f64>,
    theta: f64,
) -> (Vec<f64>, Array2<f64>, Array2<f64>) {
    let n = instance.n_tech();
    let k = instance.n_scenarios();
    let own = Array2::from_shape_fn((n, k), |(i, w)| {
        let second: f64 = (0..instance.horizon).map(|t| q[[i, t, w]]).sum();
        instance.technologies[i].emission_factor * (q0[i] + second)
    });
    let worst: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|w| own[[i, w]]).fold(0.0, f64::max))
        .collect();
    let total: f64 = worst.iter().sum();
    let allowances: Vec<f64> = if total > 0.0 {
        worst.iter().map(|w| theta * w / total).collect()
    } else {
        vec![theta / n as f64; n]
    };

    let mut purchases = Array2::zeros((n, k));
    let mut sales = Array2::zeros((n, k));
    for w in 0..k {
        let net: Vec<f64> = (0..n).map(|i| own[[i, w]] - allowances[i]).collect();
        let bought: f64 = net.iter().map(|v| v.max(0.0)).sum();
        let surplus: f64 = net.iter().map(|v| (-v).max(0.0)).sum();
        let share = if surplus > 0.0 { (bought / surplus).min(1.0) } else { 0.0 };
        for i in 0..n {
            purchases[[i, w]] = net[i].max(0.0);
            sales[[i, w]] = (-net[i]).max(0.0) * share;
        }
    }
    (allowances, purchases, sales)
}
