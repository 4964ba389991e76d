//! Domain types of the capacity-expansion market and pure evaluation helpers.
//!
//! Units follow the input tables: capacity in MW, energy in MWh, money in USD,
//! emissions in tCO2e. Second-stage years are indexed `t = 1..=horizon`; arrays
//! store year `t` at position `t - 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::inv_norm_cdf;

/// One producer, which is also one generation technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologySpec {
    pub name: String,
    /// Linear cost coefficient, USD/MWh.
    pub linear_cost: f64,
    /// Quadratic cost slope, USD/MWh².
    pub quadratic_cost: f64,
    /// Expansion cost, USD/MW.
    pub capex: f64,
    /// Capacity in operation at the base year, MW.
    pub installed_capacity: f64,
    pub capacity_factor: f64,
    /// Upper bound on installed plus new capacity, MW.
    pub resource_potential: f64,
    /// Whole years between a second-stage build decision and availability.
    pub build_lag: u32,
    /// tCO2e/MWh.
    pub emission_factor: f64,
    /// Operating-cost multiplier per second-stage year.
    pub op_cost_path: Vec<f64>,
    /// Capital-cost multiplier per second-stage year.
    pub capex_path: Vec<f64>,
    /// Member of the non-conventional renewable set.
    #[serde(default)]
    pub ncre: bool,
}

impl TechnologySpec {
    /// Annual energy deliverable per MW of capacity.
    pub fn energy_per_mw(&self, hours_per_year: f64) -> f64 {
        self.capacity_factor * hours_per_year
    }

    pub fn op_cost_multiplier(&self, t: usize) -> f64 {
        self.op_cost_path[t - 1]
    }

    pub fn capex_multiplier(&self, t: usize) -> f64 {
        self.capex_path[t - 1]
    }

    /// Whether a build in year `built` is available for generation in year `t`.
    pub fn build_available(&self, built: usize, t: usize) -> bool {
        built + (self.build_lag as usize) < t
    }
}

/// Demand scenarios of the second stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    /// Demand at `t = 0`, MWh.
    pub first_stage_demand: f64,
    /// Demand per (year, scenario), MWh; shape `[horizon, scenarios]`.
    pub demand: Array2<f64>,
    pub probabilities: Vec<f64>,
    pub names: Vec<String>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn demand_at(&self, t: usize, scenario: usize) -> f64 {
        self.demand[[t - 1, scenario]]
    }

    /// A single deterministic scenario.
    pub fn deterministic(first_stage_demand: f64, demand: Vec<f64>) -> Self {
        let horizon = demand.len();
        Self {
            first_stage_demand,
            demand: Array2::from_shape_vec((horizon, 1), demand).expect("column shape"),
            probabilities: vec![1.0],
            names: vec!["deterministic".to_string()],
        }
    }
}

/// How an endogenous trading cap restricts a technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeCapForm {
    /// Second-stage purchases limited to `rho * A_i` in every scenario.
    #[default]
    Purchase,
    /// Own emissions limited to `rho * A_i` in every scenario.
    Emission,
}

/// Cap-and-trade settings of the auctioneer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonPolicy {
    /// Mean of the normally distributed budget, tCO2e.
    pub cap_mean: f64,
    /// Standard deviation of the budget, tCO2e.
    pub cap_std: f64,
    /// Probability with which the issued allowances may exceed the budget.
    pub margin: f64,
    /// Marginal social cost of issuing allowances, USD/tCO2e.
    pub scc: f64,
    /// Technology name to purchase proportion `rho`.
    #[serde(default)]
    pub trade_caps: BTreeMap<String, f64>,
    #[serde(default)]
    pub trade_cap_form: TradeCapForm,
}

impl CarbonPolicy {
    pub const DEFAULT_SCC: f64 = 32.0;

    pub fn with_cap(cap_mean: f64) -> Self {
        Self {
            cap_mean,
            cap_std: 0.0,
            margin: 0.05,
            scc: Self::DEFAULT_SCC,
            trade_caps: BTreeMap::new(),
            trade_cap_form: TradeCapForm::Purchase,
        }
    }

    /// Deterministic equivalent of the chance constraint on issued allowances.
    pub fn cap_bound(&self) -> Result<f64> {
        if self.cap_std == 0.0 {
            return Ok(self.cap_mean);
        }
        Ok(inv_norm_cdf(self.margin)? * self.cap_std + self.cap_mean)
    }
}

/// The complete market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInstance {
    pub technologies: Vec<TechnologySpec>,
    pub scenarios: ScenarioSet,
    /// Number of second-stage years.
    pub horizon: usize,
    /// Annual discount rate.
    pub discount: f64,
    pub hours_per_year: f64,
    pub policy: CarbonPolicy,
    /// Calendar year of `t = 0`.
    pub base_year: i32,
}

impl MarketInstance {
    pub const HOURS_PER_YEAR: f64 = 8760.0;

    pub fn n_tech(&self) -> usize {
        self.technologies.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn discount_factor(&self, t: usize) -> f64 {
        (1.0 + self.discount).powi(-(t as i32))
    }

    pub fn calendar_year(&self, t: usize) -> i32 {
        self.base_year + t as i32
    }

    pub fn tech_index(&self, name: &str) -> Result<usize> {
        self.technologies
            .iter()
            .position(|tech| tech.name == name)
            .ok_or_else(|| Error::UnknownTechnology(name.to_string()))
    }

    /// Trade-cap proportion per technology, `None` where uncapped.
    pub fn trade_cap_of(&self, tech: usize) -> Option<f64> {
        self.policy
            .trade_caps
            .get(&self.technologies[tech].name)
            .copied()
    }

    pub fn with_cap_mean(&self, cap_mean: f64) -> Self {
        let mut out = self.clone();
        out.policy.cap_mean = cap_mean;
        out
    }
}

/// Lagrange multipliers of the producer and auctioneer problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// Second-stage capacity, `[tech, t - 1, scenario]`.
    pub alpha: Array3<f64>,
    /// First-stage capacity, per tech.
    pub kappa: Vec<f64>,
    /// Resource potential, `[tech, scenario]`.
    pub psi: Array2<f64>,
    /// Sales limited by auctioned allowances, `[tech, scenario]`.
    pub beta: Array2<f64>,
    /// Emission balance, `[tech, scenario]`.
    pub gamma: Array2<f64>,
    /// Issued-allowance bound of the auctioneer.
    pub eta: f64,
    /// Trade-cap rows, `[tech, scenario]`, zero for uncapped technologies.
    pub trade_cap: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub method: String,
    pub iterations: usize,
    /// Excluded from serialized artifacts so that reports stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Prices, quantities and multipliers of one equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// First-stage production, MWh per tech.
    pub q0: Vec<f64>,
    /// Second-stage production, MWh, `[tech, t - 1, scenario]`.
    pub q: Array3<f64>,
    /// First-stage builds, MW per tech.
    pub x0: Vec<f64>,
    /// Second-stage builds, MW, `[tech, t - 1, scenario]`.
    pub x: Array3<f64>,
    /// Allowances bought from the auctioneer, tCO2e per tech.
    pub allowances: Vec<f64>,
    /// `[tech, scenario]`, tCO2e.
    pub purchases: Array2<f64>,
    /// `[tech, scenario]`, tCO2e.
    pub sales: Array2<f64>,
    /// Allowances issued by the auctioneer, tCO2e.
    pub theta: f64,
    /// USD/MWh at `t = 0`.
    pub price0: f64,
    /// USD/MWh, `[t - 1, scenario]`.
    pub price: Array2<f64>,
    /// USD/tCO2e.
    pub allowance_price: f64,
    /// USD/tCO2e per scenario.
    pub trade_price: Vec<f64>,
    pub multipliers: Multipliers,
    /// Largest complementarity error of the solved system, in the system's units.
    pub residual_norm: f64,
    pub stats: SolverStats,
}

impl EquilibriumSolution {
    pub fn n_tech(&self) -> usize {
        self.q0.len()
    }

    pub fn horizon(&self) -> usize {
        self.q.shape()[1]
    }

    pub fn n_scenarios(&self) -> usize {
        self.q.shape()[2]
    }

    fn check_dims(&self, instance: &MarketInstance) -> Result<()> {
        let expected = [instance.n_tech(), instance.horizon, instance.n_scenarios()];
        let actual = self.q.shape();
        if actual != expected {
            return Err(Error::DimensionMismatch {
                expected: expected.iter().product(),
                actual: actual.iter().product(),
            });
        }
        Ok(())
    }
}

/// Cost minus revenue of producing `q` at `price`.
pub fn production_cost(tech: &TechnologySpec, q: f64, price: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::NegativeQuantity(q));
    }
    Ok(tech.linear_cost * q + 0.5 * tech.quadratic_cost * q * q - price * q)
}

/// Energy available in year `t >= 1` of `scenario`, given first-stage builds
/// `x0` and second-stage builds `builds` shaped `[horizon, scenarios]`.
///
/// First-stage builds count from `t = 1`; a second-stage build made in year
/// `t'` counts once `t' < t - lag`.
pub fn available_capacity(
    tech: &TechnologySpec,
    t: usize,
    scenario: usize,
    x0: f64,
    builds: &Array2<f64>,
    hours_per_year: f64,
) -> f64 {
    assert!(t >= 1, "available capacity is defined for second-stage years");
    let built: f64 = (1..t)
        .filter(|&tp| tech.build_available(tp, t))
        .map(|tp| builds[[tp - 1, scenario]])
        .sum();
    tech.energy_per_mw(hours_per_year) * (tech.installed_capacity + x0 + built)
}

/// Emissions charged against allowances in `scenario`, first stage included.
pub fn scenario_emissions(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    scenario: usize,
) -> Result<f64> {
    sol.check_dims(instance)?;
    if scenario >= instance.n_scenarios() {
        return Err(Error::DimensionMismatch {
            expected: instance.n_scenarios(),
            actual: scenario + 1,
        });
    }
    Ok(own_emissions_all(sol, instance, scenario).iter().sum())
}

/// Per-technology emissions in `scenario`, first stage included.
pub fn own_emissions_all(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    scenario: usize,
) -> Vec<f64> {
    instance
        .technologies
        .iter()
        .enumerate()
        .map(|(i, tech)| {
            let second: f64 = (0..instance.horizon).map(|t| sol.q[[i, t, scenario]]).sum();
            tech.emission_factor * (sol.q0[i] + second)
        })
        .collect()
}

/// One failed check of [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks type invariants and gross feasibility of an instance.
pub fn validate_instance(instance: &MarketInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let horizon = instance.horizon;
    let k = instance.n_scenarios();

    if instance.technologies.is_empty() {
        report.push("technologies", "at least one technology is required");
    }
    if horizon == 0 {
        report.push("horizon", "horizon must be at least one year");
    }
    if !(instance.discount >= 0.0) {
        report.push("discount", "discount rate must be nonnegative");
    }
    if !(instance.hours_per_year > 0.0) {
        report.push("hours_per_year", "hours per year must be positive");
    }

    let mut seen = std::collections::BTreeSet::new();
    for tech in &instance.technologies {
        let name = &tech.name;
        let field = |what: &str| format!("technology.{name}.{what}");
        if !seen.insert(name.clone()) {
            report.push(field("name"), "duplicate technology name");
        }
        if !(tech.quadratic_cost >= 0.0) {
            report.push(field("quadratic_cost"), "quadratic cost slope must be nonnegative");
        }
        if !(tech.linear_cost.is_finite()) {
            report.push(field("linear_cost"), "linear cost must be finite");
        }
        if !(tech.capex >= 0.0) {
            report.push(field("capex"), "capex must be nonnegative");
        }
        if !(0.0..=1.0).contains(&tech.capacity_factor) {
            report.push(field("capacity_factor"), "capacity factor must lie in [0, 1]");
        }
        if !(tech.installed_capacity >= 0.0) {
            report.push(field("installed_capacity"), "installed capacity must be nonnegative");
        }
        if !(tech.resource_potential >= tech.installed_capacity) {
            report.push(
                field("resource_potential"),
                "resource potential must be at least the installed capacity",
            );
        }
        if !(tech.emission_factor >= 0.0) {
            report.push(field("emission_factor"), "emission factor must be nonnegative");
        }
        for (what, path) in [("op_cost_path", &tech.op_cost_path), ("capex_path", &tech.capex_path)] {
            if path.len() != horizon {
                report.push(
                    field(what),
                    format!("expected {horizon} entries, found {}", path.len()),
                );
            }
            if path.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                report.push(field(what), "every multiplier must be positive");
            }
        }
    }

    let scenarios = &instance.scenarios;
    if k == 0 {
        report.push("probabilities", "at least one scenario is required");
    }
    if scenarios.names.len() != k {
        report.push("scenario_names", "one name per scenario is required");
    }
    if scenarios.demand.shape() != [horizon, k] {
        report.push(
            "demand",
            format!(
                "demand must be shaped [{horizon}, {k}], found {:?}",
                scenarios.demand.shape()
            ),
        );
    }
    if scenarios
        .probabilities
        .iter()
        .any(|&p| !(p > 0.0 && p <= 1.0))
    {
        report.push("probabilities", "scenario probabilities must lie in (0, 1]");
    }
    let total: f64 = scenarios.probabilities.iter().sum();
    if k > 0 && (total - 1.0).abs() > 1e-12 {
        report.push("probabilities", format!("probabilities sum to {total}, not 1"));
    }
    if !(scenarios.first_stage_demand >= 0.0) || scenarios.demand.iter().any(|&d| !(d >= 0.0)) {
        report.push("demand", "demands must be nonnegative");
    }

    let policy = &instance.policy;
    if !(policy.cap_std >= 0.0) {
        report.push("policy.cap_std", "cap standard deviation must be nonnegative");
    }
    if !(policy.margin > 0.0 && policy.margin < 1.0) {
        report.push("policy.margin", "margin must lie in (0, 1)");
    } else if policy.margin < 0.5 && policy.cap_std > 0.0 {
        if let Ok(bound) = policy.cap_bound() {
            if !(bound < policy.cap_mean) {
                report.push("policy.margin", "chance-constraint bound is not below the mean");
            }
        }
    }
    if !(policy.scc >= 0.0) {
        report.push("policy.scc", "social cost of carbon must be nonnegative");
    }
    for (name, &rho) in &policy.trade_caps {
        if !instance.technologies.iter().any(|t| &t.name == name) {
            report.push(format!("policy.trade_caps.{name}"), "unknown technology");
        }
        if !(rho >= 0.0) || rho.is_nan() {
            report.push(format!("policy.trade_caps.{name}"), "proportion must be nonnegative");
        }
    }

    // Gross feasibility only makes sense once shapes are right.
    if report.is_ok() {
        let tau = instance.hours_per_year;
        let first: f64 = instance
            .technologies
            .iter()
            .map(|t| t.energy_per_mw(tau) * t.installed_capacity)
            .sum();
        if scenarios.first_stage_demand > first {
            report.push(
                "first-stage infeasible",
                format!(
                    "first-stage demand {} MWh exceeds installed fleet energy {first} MWh",
                    scenarios.first_stage_demand
                ),
            );
        }
        let potential: f64 = instance
            .technologies
            .iter()
            .map(|t| t.energy_per_mw(tau) * t.resource_potential)
            .sum();
        let peak = scenarios.demand.iter().cloned().fold(0.0, f64::max);
        if peak > potential {
            report.push(
                "second-stage infeasible",
                format!("peak demand {peak} MWh exceeds resource-potential energy {potential} MWh"),
            );
        }
    }
    report
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn tech(a: f64, b: f64) -> TechnologySpec {
        TechnologySpec {
            name: "t".into(),
            linear_cost: a,
            quadratic_cost: b,
            capex: 100.0,
            installed_capacity: 100.0,
            capacity_factor: 0.5,
            resource_potential: 200.0,
            build_lag: 0,
            emission_factor: 0.0,
            op_cost_path: vec![1.0; 3],
            capex_path: vec![1.0; 3],
            ncre: false,
        }
    }

    #[test]
    fn production_cost_examples() {
        let t = tech(10.0, 2.0);
        assert_eq!(production_cost(&t, 3.0, 0.0).unwrap(), 39.0);
        assert_eq!(production_cost(&t, 0.0, 50.0).unwrap(), 0.0);
        // 10*3 + 9 - 13*3
        assert_eq!(production_cost(&t, 3.0, 13.0).unwrap(), 0.0);
        assert!(matches!(
            production_cost(&t, -1.0, 0.0),
            Err(Error::NegativeQuantity(_))
        ));
    }

    #[test]
    fn capacity_without_investment() {
        let t = tech(1.0, 0.0);
        let builds = Array2::zeros((3, 1));
        for year in 1..=3 {
            let cap = available_capacity(&t, year, 0, 0.0, &builds, 8760.0);
            assert_eq!(cap, 438_000.0);
        }
    }

    #[test]
    fn first_stage_build_available_immediately() {
        let mut t = tech(1.0, 0.0);
        t.installed_capacity = 0.0;
        t.capacity_factor = 1.0;
        let builds = Array2::zeros((3, 1));
        assert_eq!(available_capacity(&t, 1, 0, 10.0, &builds, 8760.0), 87_600.0);
    }

    #[test]
    fn lagged_second_stage_build() {
        let mut t = tech(1.0, 0.0);
        t.installed_capacity = 0.0;
        t.capacity_factor = 1.0;
        t.build_lag = 2;
        let mut builds = Array2::zeros((5, 1));
        builds[[0, 0]] = 10.0;
        // built at t'=1 counts once 1 < t - 2, i.e. from t = 4
        assert_eq!(available_capacity(&t, 2, 0, 0.0, &builds, 8760.0), 0.0);
        assert_eq!(available_capacity(&t, 3, 0, 0.0, &builds, 8760.0), 0.0);
        assert_eq!(available_capacity(&t, 4, 0, 0.0, &builds, 8760.0), 87_600.0);
    }

    #[test]
    fn cap_bound_without_variance_is_the_mean() {
        let p = CarbonPolicy::with_cap(123.0);
        assert_eq!(p.cap_bound().unwrap(), 123.0);
    }

    proptest! {
        #[test]
        fn production_cost_is_convex(
            a in -50.0f64..50.0, b in 0.0f64..10.0, price in -100.0f64..100.0,
            q in 0.0f64..100.0, h in 0.001f64..10.0,
        ) {
            let t = tech(a, b);
            let lo = production_cost(&t, q, price).unwrap();
            let mid = production_cost(&t, q + h, price).unwrap();
            let hi = production_cost(&t, q + 2.0 * h, price).unwrap();
            let scale = 1.0 + lo.abs() + mid.abs() + hi.abs();
            prop_assert!(hi - 2.0 * mid + lo >= -1e-12 * scale);
        }

        #[test]
        fn capacity_monotone_and_additive(
            lag in 0u32..4, x0 in 0.0f64..5.0,
            b1 in proptest::collection::vec(0.0f64..5.0, 6),
            b2 in proptest::collection::vec(0.0f64..5.0, 6),
        ) {
            let mut t = tech(1.0, 0.0);
            t.build_lag = lag;
            let m1 = Array2::from_shape_vec((6, 1), b1).unwrap();
            let m2 = Array2::from_shape_vec((6, 1), b2).unwrap();
            let sum = &m1 + &m2;
            let mut prev = f64::NEG_INFINITY;
            for year in 1..=6 {
                let c = available_capacity(&t, year, 0, x0, &m1, 8760.0);
                prop_assert!(c >= prev);
                prev = c;
                let base = available_capacity(&t, year, 0, 0.0, &Array2::zeros((6, 1)), 8760.0);
                let c1 = available_capacity(&t, year, 0, 0.0, &m1, 8760.0) - base;
                let c2 = available_capacity(&t, year, 0, 0.0, &m2, 8760.0) - base;
                let cs = available_capacity(&t, year, 0, 0.0, &sum, 8760.0) - base;
                prop_assert!((cs - c1 - c2).abs() <= 1e-6 * (1.0 + cs.abs()));
            }
        }
    }
}
