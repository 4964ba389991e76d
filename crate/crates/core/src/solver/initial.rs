use crate::mcp::{ComplementaritySystem, Var};
use crate::model::MarketInstance;

/// Fills `demand` from the cheapest units first. Returns per-tech output and
/// the marginal cost of the last unit served.
fn merit_order(demand: f64, capacity: &[f64], cost: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..capacity.len()).collect();
    order.sort_by(|&a, &b| cost[a].0.total_cmp(&cost[b].0).then(a.cmp(&b)));
    let mut out = vec![0.0; capacity.len()];
    let mut left = demand;
    let mut price = order.first().map_or(0.0, |&i| cost[i].0);
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        let take = left.min(capacity[i]);
        out[i] = take;
        left -= take;
        price = cost[i].0 + cost[i].1 * take;
    }
    (out, price)
}

/// Starting point: merit-order dispatch on the installed fleet, prices at the
/// marginal cost, the allowance price at the social cost of carbon and all
/// multipliers at zero.
pub fn initial_iterate(sys: &ComplementaritySystem) -> Vec<f64> {
    let inst = &*sys.instance;
    let tau = inst.hours_per_year;
    let mut z = vec![0.0; sys.len()];
    let installed: Vec<f64> = inst
        .technologies
        .iter()
        .map(|t| t.energy_per_mw(tau) * t.installed_capacity)
        .collect();

    let cost0: Vec<(f64, f64)> = inst
        .technologies
        .iter()
        .map(|t| (t.linear_cost, t.quadratic_cost))
        .collect();
    let (q0, p0) = merit_order(inst.scenarios.first_stage_demand, &installed, &cost0);
    for (i, &q) in q0.iter().enumerate() {
        sys.set_natural(&mut z, Var::Output0 { tech: i }, q);
    }
    sys.set_natural(&mut z, Var::DemandPrice0, p0);

    for t in 1..=inst.horizon {
        let cost: Vec<(f64, f64)> = inst
            .technologies
            .iter()
            .map(|tech| {
                let m = tech.op_cost_multiplier(t);
                (m * tech.linear_cost, m * tech.quadratic_cost)
            })
            .collect();
        for w in 0..inst.n_scenarios() {
            let (q, p) = merit_order(inst.scenarios.demand_at(t, w), &installed, &cost);
            for (i, qi) in q.into_iter().enumerate() {
                sys.set_natural(&mut z, Var::Output { tech: i, t, scenario: w }, qi);
            }
            sys.set_natural(&mut z, Var::DemandPrice { t, scenario: w }, p);
        }
    }
    sys.set_natural(&mut z, Var::AllowancePrice, inst.policy.scc);
    z
}

/// Least achievable emissions per scenario, tCO2e: cleanest-first dispatch on
/// the installed fleet at `t = 0` and on full resource potential afterwards,
/// which first-stage builds make available from `t = 1`.
pub fn minimum_emissions(instance: &MarketInstance) -> Vec<f64> {
    let tau = instance.hours_per_year;
    let techs = &instance.technologies;
    let by_emission: Vec<(f64, f64)> = techs.iter().map(|t| (t.emission_factor, 0.0)).collect();
    let emitted = |demand: f64, capacity: &[f64]| {
        let (q, _) = merit_order(demand, capacity, &by_emission);
        q.iter().zip(techs).map(|(q, t)| q * t.emission_factor).sum::<f64>()
    };
    let installed: Vec<f64> = techs
        .iter()
        .map(|t| t.energy_per_mw(tau) * t.installed_capacity)
        .collect();
    let potential: Vec<f64> = techs
        .iter()
        .map(|t| t.energy_per_mw(tau) * t.resource_potential)
        .collect();
    let first = emitted(instance.scenarios.first_stage_demand, &installed);
    (0..instance.n_scenarios())
        .map(|w| {
            first
                + (1..=instance.horizon)
                    .map(|t| emitted(instance.scenarios.demand_at(t, w), &potential))
                    .sum::<f64>()
        })
        .collect()
}
