//! Small instances for tests, examples and benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CarbonPolicy, MarketInstance, ScenarioSet, TechnologySpec};
use crate::normal::inv_norm_cdf;

fn flat_tech(name: &str, horizon: usize) -> TechnologySpec {
    TechnologySpec {
        name: name.into(),
        linear_cost: 0.0,
        quadratic_cost: 0.0,
        capex: 0.0,
        installed_capacity: 0.0,
        capacity_factor: 1.0,
        resource_potential: 0.0,
        build_lag: 0,
        emission_factor: 0.0,
        op_cost_path: vec![1.0; horizon],
        capex_path: vec![1.0; horizon],
        ncre: false,
    }
}

/// One producer, one scenario, one second-stage year, ample capacity and a
/// slack cap.
pub fn single_producer() -> MarketInstance {
    let mut tech = flat_tech("thermal", 1);
    tech.linear_cost = 20.0;
    tech.quadratic_cost = 0.01;
    tech.capex = 5.0e4;
    tech.installed_capacity = 1.0;
    tech.resource_potential = 2.0;
    tech.capacity_factor = 0.5;
    tech.emission_factor = 0.4;
    MarketInstance {
        technologies: vec![tech],
        scenarios: ScenarioSet::deterministic(1000.0, vec![1500.0]),
        horizon: 1,
        discount: 0.05,
        hours_per_year: MarketInstance::HOURS_PER_YEAR,
        policy: CarbonPolicy::with_cap(1.0e6),
        base_year: 2019,
    }
}

/// A cheap emitter and a clean but capital-intensive entrant over three
/// years and two demand scenarios.
pub fn two_producer() -> MarketInstance {
    let horizon = 3;
    let mut coal = flat_tech("coal", horizon);
    coal.linear_cost = 15.0;
    coal.quadratic_cost = 1e-3;
    coal.capex = 1.5e5;
    coal.installed_capacity = 16.0;
    coal.resource_potential = 18.0;
    coal.capacity_factor = 0.8;
    coal.build_lag = 1;
    coal.emission_factor = 0.9;

    let mut wind = flat_tech("wind", horizon);
    wind.linear_cost = 2.0;
    wind.quadratic_cost = 1e-4;
    wind.capex = 2.5e5;
    wind.installed_capacity = 2.0;
    wind.resource_potential = 40.0;
    wind.capacity_factor = 0.35;
    wind.ncre = true;
    wind.capex_path = vec![0.95, 0.9, 0.85];

    let demand = Array2::from_shape_vec((horizon, 2), vec![70_000.0, 80_000.0, 75_000.0, 90_000.0, 80_000.0, 100_000.0])
        .expect("3x2 demand");
    MarketInstance {
        technologies: vec![coal, wind],
        scenarios: ScenarioSet {
            first_stage_demand: 65_000.0,
            demand,
            probabilities: vec![0.6, 0.4],
            names: vec!["low".into(), "high".into()],
        },
        horizon,
        discount: 0.07,
        hours_per_year: MarketInstance::HOURS_PER_YEAR,
        policy: CarbonPolicy::with_cap(200_000.0),
        base_year: 2019,
    }
}

/// Random convex instance with at most three producers, two scenarios and
/// four second-stage years. Producer 0 is a cheap emitter; the last producer
/// is clean with enough potential to keep every generated cap feasible.
pub fn random_instance(seed: u64) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3usize);
    let k = rng.gen_range(1..=2usize);
    let horizon = rng.gen_range(1..=4usize);
    let tau = MarketInstance::HOURS_PER_YEAR;

    let mut techs = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = flat_tech(&format!("tech{i}"), horizon);
        t.quadratic_cost = rng.gen_range(2e-3..1e-2);
        t.capex = rng.gen_range(1e4..2e5);
        t.capacity_factor = rng.gen_range(0.3..0.9);
        t.installed_capacity = rng.gen_range(1.0..10.0);
        t.build_lag = rng.gen_range(0..=2);
        t.op_cost_path = (0..horizon).map(|_| rng.gen_range(0.8..1.2)).collect();
        t.capex_path = (0..horizon).map(|_| rng.gen_range(0.8..1.2)).collect();
        if i == 0 {
            t.linear_cost = rng.gen_range(5.0..20.0);
            t.emission_factor = rng.gen_range(0.5..1.0);
            t.installed_capacity = rng.gen_range(5.0..10.0);
            t.resource_potential = t.installed_capacity + rng.gen_range(0.0..5.0);
        } else if i == n - 1 {
            t.linear_cost = rng.gen_range(20.0..60.0);
            t.emission_factor = 0.0;
            t.resource_potential = t.installed_capacity + rng.gen_range(20.0..40.0);
            t.ncre = true;
        } else {
            t.linear_cost = rng.gen_range(20.0..60.0);
            t.emission_factor = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..0.5) };
            t.resource_potential = t.installed_capacity + rng.gen_range(5.0..20.0);
        }
        techs.push(t);
    }

    let installed: f64 = techs.iter().map(|t| t.energy_per_mw(tau) * t.installed_capacity).sum();
    let potential: f64 = techs.iter().map(|t| t.energy_per_mw(tau) * t.resource_potential).sum();
    let first_stage_demand = installed * rng.gen_range(0.5..0.9);
    // strictly increasing demand that stays below the resource potential
    let headroom = (0.8 * potential / first_stage_demand).powf(1.0 / horizon as f64) - 1.0;
    let shrink = (0.9 * headroom / 0.3).min(1.0);
    let growth: Vec<f64> = (0..k).map(|_| shrink * rng.gen_range(0.05..0.3)).collect();
    let demand = Array2::from_shape_fn((horizon, k), |(t, w)| {
        first_stage_demand * (1.0 + growth[w]).powi(t as i32 + 1)
    });
    // Emitters get spare capacity so their output stays interior; otherwise
    // only the scenario sum of the emission-balance multipliers is pinned.
    let peak = demand.iter().fold(first_stage_demand, |m, &d| m.max(d));
    for t in techs.iter_mut().filter(|t| t.emission_factor > 0.0) {
        let needed = 1.5 * peak / t.energy_per_mw(tau);
        if t.installed_capacity < needed {
            let room = t.resource_potential - t.installed_capacity;
            t.installed_capacity = needed;
            t.resource_potential = needed + room;
        }
    }

    let probabilities = if k == 1 {
        vec![1.0]
    } else {
        let p = rng.gen_range(0.2..0.8);
        vec![p, 1.0 - p]
    };

    let mut instance = MarketInstance {
        technologies: techs,
        scenarios: ScenarioSet {
            first_stage_demand,
            demand,
            probabilities,
            names: (0..k).map(|w| format!("s{w}")).collect(),
        },
        horizon,
        discount: rng.gen_range(0.03..0.1),
        hours_per_year: tau,
        policy: CarbonPolicy::with_cap(0.0),
        base_year: 2019,
    };

    // Cap between the cleanest feasible dispatch and a loose multiple of it.
    let floor = crate::solver::minimum_emissions(&instance)
        .into_iter()
        .fold(0.0, f64::max);
    let dirty: f64 = instance.technologies[0].emission_factor
        * (instance.scenarios.first_stage_demand
            + instance.scenarios.demand.column(0).sum());
    let bound = floor * rng.gen_range(1.02..1.1) + rng.gen_range(0.1..1.5) * (dirty - floor).max(0.0) + 1.0;
    instance.policy.scc = rng.gen_range(5.0..40.0);
    if rng.gen_bool(0.3) {
        let std = 0.05 * bound;
        instance.policy.cap_std = std;
        instance.policy.cap_mean = bound - inv_norm_cdf(instance.policy.margin).expect("margin in (0,1)") * std;
    } else {
        instance.policy.cap_mean = bound;
    }
    instance
}
