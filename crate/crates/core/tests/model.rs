use capmarket_core::fixtures::{single_producer, two_producer};
use capmarket_core::*;

fn solved(inst: &MarketInstance) -> EquilibriumSolution {
    solve_mcp(&assemble(inst).unwrap(), &SolverOptions::default(), None).unwrap()
}

#[test]
fn fixtures_validate() {
    assert!(validate_instance(&two_producer()).is_ok());
    assert!(validate_instance(&single_producer()).is_ok());
}

#[test]
fn probabilities_must_sum_to_one() {
    let mut inst = two_producer();
    inst.scenarios.probabilities = vec![0.5, 0.4];
    let report = validate_instance(&inst);
    assert!(report.has("probabilities"), "{report:?}");
    inst.scenarios.probabilities = vec![0.5, 0.3];
    assert!(validate_instance(&inst).has("probabilities"));
}

#[test]
fn first_stage_demand_beyond_the_fleet() {
    let mut inst = two_producer();
    inst.scenarios.first_stage_demand = 1e7;
    let report = validate_instance(&inst);
    assert!(report.has("first-stage infeasible"), "{report:?}");
    assert!(matches!(assemble(&inst), Err(Error::InvalidInstance(_))));
    assert!(matches!(solve_planner(&inst), Err(Error::InvalidInstance(_))));
}

#[test]
fn peak_demand_beyond_the_potential() {
    let mut inst = two_producer();
    inst.scenarios.demand[[2, 1]] = 1e7;
    assert!(validate_instance(&inst).has("second-stage infeasible"));
}

#[test]
fn path_lengths_follow_the_horizon() {
    let mut inst = two_producer();
    inst.technologies[1].capex_path.pop();
    assert!(!validate_instance(&inst).is_ok());
}

#[test]
fn trade_caps_must_name_known_technologies() {
    let mut inst = two_producer();
    inst.policy.trade_caps.insert("nuclear".into(), 0.5);
    assert!(validate_instance(&inst).has("policy.trade_caps.nuclear"));
    inst.policy.trade_caps.clear();
    inst.policy.trade_caps.insert("coal".into(), -1.0);
    assert!(validate_instance(&inst).has("policy.trade_caps.coal"));
}

#[test]
fn clean_fleet_emits_nothing() {
    let mut inst = two_producer();
    inst.technologies[0].emission_factor = 0.0;
    let sol = solved(&inst);
    for w in 0..2 {
        assert_eq!(scenario_emissions(&sol, &inst, w).unwrap(), 0.0);
    }
}

#[test]
fn emissions_sum_first_and_second_stage() {
    let mut inst = single_producer();
    inst.technologies[0].emission_factor = 0.9;
    inst.horizon = 3;
    inst.technologies[0].op_cost_path = vec![1.0; 3];
    inst.technologies[0].capex_path = vec![1.0; 3];
    inst.scenarios = ScenarioSet::deterministic(1000.0, vec![1000.0; 3]);
    let mut sol = solved(&inst);
    sol.q0[0] = 100.0;
    sol.q.fill(100.0);
    let e = scenario_emissions(&sol, &inst, 0).unwrap();
    assert!((e - 360.0).abs() < 1e-12, "{e}");
}

#[test]
fn emissions_reject_foreign_solutions() {
    let sol = solved(&single_producer());
    assert!(matches!(
        scenario_emissions(&sol, &two_producer(), 0),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(scenario_emissions(&sol, &single_producer(), 1).is_err());
}

#[test]
fn available_capacity_tracks_builds() {
    let inst = two_producer();
    let sol = solved(&inst);
    let wind = &inst.technologies[1];
    let tau = inst.hours_per_year;
    for w in 0..2 {
        for t in 1..=3 {
            let x = sol.x.index_axis(ndarray::Axis(0), 1).to_owned();
            let cap = available_capacity(wind, t, w, sol.x0[1], &x, tau);
            // never below what the producer actually runs
            assert!(sol.q[[1, t - 1, w]] <= cap * (1.0 + 1e-9));
        }
    }
}

#[test]
fn instances_round_trip_through_json() {
    let inst = two_producer();
    let text = serde_json::to_string(&inst).unwrap();
    let back: MarketInstance = serde_json::from_str(&text).unwrap();
    assert_eq!(inst, back);
}
