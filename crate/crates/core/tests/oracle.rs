//! The complementarity solver and the planner QP must describe the same
//! equilibrium on every generated instance.

use std::time::{Duration, Instant};

use capmarket_core::fixtures::{random_instance, two_producer};
use capmarket_core::mcp::pack;
use capmarket_core::*;

const INSTANCES: u64 = 200;

/// `|a - b|_inf / (1 + |b|_inf)`
fn rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// Largest relative deviation per compared block.
fn deviations(m: &EquilibriumSolution, p: &EquilibriumSolution) -> Vec<(&'static str, f64)> {
    vec![
        ("q0", rel(&m.q0, &p.q0)),
        ("q", rel(&flat(&m.q), &flat(&p.q))),
        ("x0", rel(&m.x0, &p.x0)),
        ("x", rel(&flat(&m.x), &flat(&p.x))),
        ("theta", rel(&[m.theta], &[p.theta])),
        ("price0", rel(&[m.price0], &[p.price0])),
        ("price", rel(&flat(&m.price), &flat(&p.price))),
        ("allowance_price", rel(&[m.allowance_price], &[p.allowance_price])),
        ("trade_price", rel(&m.trade_price, &p.trade_price)),
    ]
}

#[test]
fn mcp_matches_planner_on_generated_instances() {
    let started = Instant::now();
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let sys = assemble(&inst).unwrap();
        let m = solve_mcp(&sys, &opts, None).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let p = solve_planner(&inst).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(m.residual_norm <= 1e-8, "seed {seed}: residual {:e}", m.residual_norm);
        for (block, dev) in deviations(&m, &p) {
            if dev > 1e-6 {
                failures.push(format!("seed {seed} {block}: {dev:e}"));
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(elapsed <= Duration::from_secs(60), "took {elapsed:?}");
}

#[test]
fn generated_instances_cover_the_size_range() {
    let mut seen_n = [false; 4];
    let mut seen_k = [false; 3];
    let mut seen_t = [false; 5];
    let mut clean_and_dirty = 0;
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        assert!(validate_instance(&inst).is_ok());
        seen_n[inst.n_tech()] = true;
        seen_k[inst.n_scenarios()] = true;
        seen_t[inst.horizon] = true;
        let eps: Vec<f64> = inst.technologies.iter().map(|t| t.emission_factor).collect();
        if eps.iter().any(|&e| e == 0.0) && eps.iter().any(|&e| e > 0.0) {
            clean_and_dirty += 1;
        }
    }
    assert_eq!(seen_n, [false, true, true, true]);
    assert_eq!(seen_k, [false, true, true]);
    assert_eq!(seen_t, [false, true, true, true, true]);
    assert!(clean_and_dirty > INSTANCES / 2);
}

#[test]
fn converged_solutions_respect_the_cap() {
    let opts = SolverOptions::default();
    for seed in 0..50 {
        let inst = random_instance(seed);
        let sol = solve_mcp(&assemble(&inst).unwrap(), &opts, None).unwrap();
        let bound = inst.policy.cap_bound().unwrap();
        assert!(sol.theta <= bound + 1e-8, "seed {seed}");
        let issued: f64 = sol.allowances.iter().sum();
        assert!((issued - sol.theta).abs() <= 1e-8, "seed {seed}: {issued} vs {}", sol.theta);
    }
}

#[test]
fn planner_solution_passes_the_complementarity_check() {
    for seed in 0..50 {
        let inst = random_instance(seed);
        let sys = assemble(&inst).unwrap();
        let z = pack(&sys, &solve_planner(&inst).unwrap()).unwrap();
        let report = check_solution(&sys, &z, 1e-6);
        assert!(report.passed(), "seed {seed}: {:e}", report.max_error);
    }
}

#[test]
fn two_producer_quantities_match_planner() {
    let inst = two_producer();
    let m = solve_mcp(&assemble(&inst).unwrap(), &SolverOptions::default(), None).unwrap();
    let p = solve_planner(&inst).unwrap();
    for (block, dev) in deviations(&m, &p) {
        assert!(dev <= 1e-6, "{block}: {dev:e}");
    }
}

#[test]
fn grid_units_give_the_same_equilibrium() {
    let inst = two_producer();
    let natural = solve_mcp(&assemble(&inst).unwrap(), &SolverOptions::default(), None).unwrap();
    let options = AssembleOptions {
        units: UnitSystem::Grid,
        ..Default::default()
    };
    let grid = solve_mcp(&assemble_with(&inst, options).unwrap(), &SolverOptions::default(), None).unwrap();
    for (block, dev) in deviations(&grid, &natural) {
        assert!(dev <= 1e-6, "{block}: {dev:e}");
    }
}

#[test]
fn zero_demand_planner_is_empty() {
    let mut inst = two_producer();
    inst.scenarios.first_stage_demand = 0.0;
    inst.scenarios.demand.fill(0.0);
    let sol = solve_planner(&inst).unwrap();
    assert!(sol.q0.iter().chain(sol.q.iter()).all(|q| q.abs() <= 1e-6));
    assert!(sol.theta.abs() <= 1e-6);
}
