//! The one-producer instance has a KKT point that can be written down by hand.
//!
//! With ample capacity, a slack resource potential and a slack cap, the only
//! producer serves demand exactly, builds nothing and buys exactly its own
//! emissions as allowances. The auctioneer issues them at the point where the
//! allowance price equals the social cost of carbon, so every multiplier
//! follows from the stationarity rows.

use capmarket_core::fixtures::single_producer;
use capmarket_core::mcp::{pack, Var};
use capmarket_core::*;

struct ClosedForm {
    q0: f64,
    q1: f64,
    allowances: f64,
    price0: f64,
    price1: f64,
    allowance_price: f64,
    gamma: f64,
}

fn closed_form(inst: &MarketInstance) -> ClosedForm {
    let tech = &inst.technologies[0];
    let q0 = inst.scenarios.first_stage_demand;
    let q1 = inst.scenarios.demand[[0, 0]];
    let scc = inst.policy.scc;
    let eps = tech.emission_factor;
    let weight = inst.scenarios.probabilities[0] * inst.discount_factor(1);
    // theta interior and the bound slack: pi_a = scc; gamma carries it all
    // because A - V > 0 forces beta = 0
    let gamma = scc;
    ClosedForm {
        q0,
        q1,
        allowances: eps * (q0 + q1),
        price0: tech.linear_cost + tech.quadratic_cost * q0 + eps * gamma,
        price1: tech.op_cost_multiplier(1) * (tech.linear_cost + tech.quadratic_cost * q1)
            + eps * gamma / weight,
        allowance_price: scc,
        gamma,
    }
}

fn closed_form_point(sys: &ComplementaritySystem, cf: &ClosedForm) -> Vec<f64> {
    let mut z = vec![0.0; sys.len()];
    sys.set_natural(&mut z, Var::Output0 { tech: 0 }, cf.q0);
    sys.set_natural(&mut z, Var::Output { tech: 0, t: 1, scenario: 0 }, cf.q1);
    sys.set_natural(&mut z, Var::Allowance { tech: 0 }, cf.allowances);
    sys.set_natural(&mut z, Var::Issued, cf.allowances);
    sys.set_natural(&mut z, Var::DemandPrice0, cf.price0);
    sys.set_natural(&mut z, Var::DemandPrice { t: 1, scenario: 0 }, cf.price1);
    sys.set_natural(&mut z, Var::AllowancePrice, cf.allowance_price);
    sys.set_natural(&mut z, Var::TradePrice { scenario: 0 }, cf.gamma);
    sys.set_natural(&mut z, Var::EmissionDual { tech: 0, scenario: 0 }, cf.gamma);
    z
}

#[test]
fn closed_form_point_satisfies_every_row() {
    let inst = single_producer();
    let sys = assemble(&inst).unwrap();
    assert_eq!(sys.len(), 18);
    let z = closed_form_point(&sys, &closed_form(&inst));
    let report = check_solution(&sys, &z, 1e-10);
    assert!(report.max_error <= 1e-10, "max error {:e}", report.max_error);
    assert!(report.passed());
}

#[test]
fn closed_form_binding_summary() {
    let inst = single_producer();
    let sys = assemble(&inst).unwrap();
    let z = closed_form_point(&sys, &closed_form(&inst));
    let report = check_solution(&sys, &z, 1e-10);
    let binding: Vec<&str> = report
        .binding
        .iter()
        .filter(|b| b.binding > 0)
        .map(|b| b.role.as_str())
        .collect();
    assert!(binding.contains(&"constraint:emission-balance"), "{binding:?}");
    assert!(!binding.contains(&"constraint:capacity"), "{binding:?}");
    assert!(!binding.contains(&"auctioneer:issue-bound"), "{binding:?}");
}

#[test]
fn newton_reaches_the_closed_form() {
    let inst = single_producer();
    let sys = assemble(&inst).unwrap();
    let cf = closed_form(&inst);
    let sol = solve_mcp(&sys, &SolverOptions::default(), None).unwrap();
    assert!(sol.residual_norm <= 1e-8);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * (1.0 + b.abs());
    assert!(close(sol.q0[0], cf.q0));
    assert!(close(sol.q[[0, 0, 0]], cf.q1));
    assert!(close(sol.theta, cf.allowances));
    assert!(close(sol.price0, cf.price0), "{} vs {}", sol.price0, cf.price0);
    assert!(close(sol.price[[0, 0]], cf.price1), "{} vs {}", sol.price[[0, 0]], cf.price1);
    assert!(close(sol.allowance_price, cf.allowance_price));
    assert!(close(sol.trade_price[0], cf.gamma));
    assert_eq!(sol.x0[0], 0.0);
}

#[test]
fn planner_prices_match_the_closed_form() {
    let inst = single_producer();
    let cf = closed_form(&inst);
    let sol = solve_planner(&inst).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + b.abs());
    assert!(close(sol.price0, cf.price0), "{} vs {}", sol.price0, cf.price0);
    assert!(close(sol.price[[0, 0]], cf.price1));
    assert!(close(sol.allowance_price, cf.allowance_price));
    assert!(close(sol.trade_price[0], cf.gamma));
    let sys = assemble(&inst).unwrap();
    let z = pack(&sys, &sol).unwrap();
    assert!(check_solution(&sys, &z, 1e-6).passed());
}

#[test]
fn clean_producer_prices_at_marginal_cost() {
    // with no emissions the allowance chain decouples from electricity prices
    let mut inst = single_producer();
    inst.technologies[0].emission_factor = 0.0;
    let sol = solve_mcp(&assemble(&inst).unwrap(), &SolverOptions::default(), None).unwrap();
    let tech = &inst.technologies[0];
    let d0 = inst.scenarios.first_stage_demand;
    assert!((sol.q0[0] - d0).abs() <= 1e-8 * d0);
    let expect = tech.linear_cost + tech.quadratic_cost * d0;
    assert!((sol.price0 - expect).abs() <= 1e-8 * expect);
    // no allowance demand, so the auctioneer issues none
    assert!(sol.theta.abs() <= 1e-8);
}
