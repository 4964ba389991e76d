//! Carbon-cap sweeps, trade-cap studies and pledge metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcp::{assemble_with, AssembleOptions};
use crate::model::{EquilibriumSolution, MarketInstance, TradeCapForm};
use crate::solver::{solve_mcp, SolverOptions};

/// Caps of the default grid, tCO2e: 100 to 1000 MtCO2e in steps of 100.
pub fn default_cap_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) * 100.0e6).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeCapGrid {
    pub technology: String,
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub form: TradeCapForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: MarketInstance,
    /// Cap means, tCO2e, solved in this order.
    pub caps: Vec<f64>,
    pub trade_cap: Option<TradeCapGrid>,
    pub ncre_thresholds: Vec<f64>,
    /// Output at or below this many MWh per year counts as phased out.
    pub phaseout_tolerance: f64,
    /// Technologies whose joint phase-out is reported.
    pub phaseout_set: Vec<String>,
    pub assemble: AssembleOptions,
}

impl SweepSpec {
    pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.60, 0.70];
    pub const DEFAULT_PHASEOUT_TOLERANCE: f64 = 1000.0;

    pub fn new(base: MarketInstance) -> Self {
        Self {
            base,
            caps: default_cap_grid(),
            trade_cap: None,
            ncre_thresholds: Self::DEFAULT_THRESHOLDS.to_vec(),
            phaseout_tolerance: Self::DEFAULT_PHASEOUT_TOLERANCE,
            phaseout_set: vec!["coal".into()],
            assemble: AssembleOptions::default(),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.caps.is_empty() {
            return Err("cap grid is empty".into());
        }
        if self.caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err("caps must be finite and nonnegative".into());
        }
        if self.ncre_thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err("NCRE thresholds must lie in (0, 1]".into());
        }
        if !(self.phaseout_tolerance >= 0.0) {
            return Err("phase-out tolerance must be nonnegative".into());
        }
        for name in &self.phaseout_set {
            if self.base.tech_index(name).is_err() {
                return Err(format!("phase-out set names unknown technology `{name}`"));
            }
        }
        if let Some(grid) = &self.trade_cap {
            if grid.rhos.is_empty() {
                return Err("trade-cap grid is empty".into());
            }
            if grid.rhos.iter().any(|r| !(*r >= 0.0)) {
                return Err("trade-cap proportions must be nonnegative".into());
            }
            if self.base.tech_index(&grid.technology).is_err() {
                return Err(format!("trade-cap technology `{}` is unknown", grid.technology));
            }
        }
        Ok(())
    }

    fn phaseout_indices(&self) -> Vec<usize> {
        self.phaseout_set
            .iter()
            .filter_map(|name| self.base.tech_index(name).ok())
            .collect()
    }
}

/// Year a threshold is first reached, per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareYear {
    pub threshold: f64,
    pub years: Vec<Option<i32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityAdditions {
    /// MW per technology.
    pub per_tech: Vec<f64>,
    pub total: f64,
}

/// Pledge metrics of one equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub allowance_price: f64,
    pub trade_prices: Vec<f64>,
    pub theta: f64,
    pub mean_price: f64,
    /// Per scenario.
    pub scenario_emissions: Vec<f64>,
    pub share_years: Vec<ShareYear>,
    /// Per scenario.
    pub phaseout_year: Vec<Option<i32>>,
    /// NCRE share in the last second-stage year, per scenario.
    pub final_ncre_share: Vec<Option<f64>>,
    /// Per scenario.
    pub additions: Vec<CapacityAdditions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Cap mean (tCO2e) or trade-cap proportion, depending on the study.
    pub parameter: f64,
    pub solution: Option<EquilibriumSolution>,
    pub metrics: Option<PointMetrics>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn converged(&self) -> bool {
        self.solution.is_some()
    }

    pub fn allowance_price(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.allowance_price)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub thresholds: Vec<f64>,
    pub phaseout_set: Vec<String>,
    /// Ordered as the grid.
    pub points: Vec<SweepPoint>,
}

/// Allowance price against trade-cap proportion for one technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeCapCurve {
    pub technology: String,
    pub form: TradeCapForm,
    /// The same instance with no trade cap.
    pub uncapped: SweepPoint,
    pub points: Vec<SweepPoint>,
}

/// Share of NCRE output in `(t, scenario)`; `None` when nothing is produced.
pub fn ncre_share(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    t: usize,
    scenario: usize,
) -> Option<f64> {
    assert!(t >= 1, "NCRE share is defined for second-stage years");
    let mut total = 0.0;
    let mut ncre = 0.0;
    for (i, tech) in instance.technologies.iter().enumerate() {
        let q = sol.q[[i, t - 1, scenario]].max(0.0);
        total += q;
        if tech.ncre {
            ncre += q;
        }
    }
    if total > 0.0 {
        Some(ncre / total)
    } else {
        None
    }
}

/// Earliest calendar year whose NCRE share reaches `threshold`.
pub fn first_year_at_share(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    threshold: f64,
    scenario: usize,
) -> Option<i32> {
    (1..=instance.horizon)
        .find(|&t| ncre_share(sol, instance, t, scenario).is_some_and(|s| s >= threshold))
        .map(|t| instance.calendar_year(t))
}

/// Earliest calendar year from which the joint output of `techs` stays at or
/// below `tolerance` MWh for the rest of the horizon.
pub fn phaseout_year(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    techs: &[usize],
    tolerance: f64,
    scenario: usize,
) -> Option<i32> {
    let output = |t: usize| techs.iter().map(|&i| sol.q[[i, t - 1, scenario]]).sum::<f64>();
    let mut year = None;
    for t in (1..=instance.horizon).rev() {
        if output(t) > tolerance {
            break;
        }
        year = Some(instance.calendar_year(t));
    }
    year
}

/// Probability-weighted, undiscounted mean of second-stage electricity prices.
pub fn mean_electricity_price(sol: &EquilibriumSolution, instance: &MarketInstance) -> f64 {
    let probs = &instance.scenarios.probabilities;
    let total: f64 = (0..instance.horizon)
        .map(|t| {
            probs
                .iter()
                .enumerate()
                .map(|(w, p)| p * sol.price[[t, w]])
                .sum::<f64>()
        })
        .sum();
    total / instance.horizon as f64
}

/// First- plus second-stage builds per technology in `scenario`, MW.
pub fn capacity_additions(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    scenario: usize,
) -> CapacityAdditions {
    let per_tech: Vec<f64> = (0..instance.n_tech())
        .map(|i| {
            sol.x0[i]
                + (0..instance.horizon)
                    .map(|t| sol.x[[i, t, scenario]])
                    .sum::<f64>()
        })
        .collect();
    let total = per_tech.iter().sum();
    CapacityAdditions { per_tech, total }
}

pub fn point_metrics(
    sol: &EquilibriumSolution,
    instance: &MarketInstance,
    thresholds: &[f64],
    phaseout: &[usize],
    tolerance: f64,
) -> PointMetrics {
    let k = instance.n_scenarios();
    PointMetrics {
        allowance_price: sol.allowance_price,
        trade_prices: sol.trade_price.clone(),
        theta: sol.theta,
        mean_price: mean_electricity_price(sol, instance),
        scenario_emissions: (0..k)
            .map(|w| crate::model::own_emissions_all(sol, instance, w).iter().sum())
            .collect(),
        share_years: thresholds
            .iter()
            .map(|&threshold| ShareYear {
                threshold,
                years: (0..k)
                    .map(|w| first_year_at_share(sol, instance, threshold, w))
                    .collect(),
            })
            .collect(),
        phaseout_year: (0..k)
            .map(|w| phaseout_year(sol, instance, phaseout, tolerance, w))
            .collect(),
        final_ncre_share: (0..k)
            .map(|w| ncre_share(sol, instance, instance.horizon, w))
            .collect(),
        additions: (0..k).map(|w| capacity_additions(sol, instance, w)).collect(),
    }
}

fn solve_point(
    instance: &MarketInstance,
    parameter: f64,
    spec: &SweepSpec,
    opts: &SolverOptions,
) -> SweepPoint {
    let outcome = assemble_with(instance, spec.assemble).and_then(|sys| solve_mcp(&sys, opts, None));
    match outcome {
        Ok(sol) => {
            let metrics = point_metrics(
                &sol,
                instance,
                &spec.ncre_thresholds,
                &spec.phaseout_indices(),
                spec.phaseout_tolerance,
            );
            SweepPoint {
                parameter,
                solution: Some(sol),
                metrics: Some(metrics),
                error: None,
            }
        }
        Err(e) => SweepPoint {
            parameter,
            solution: None,
            metrics: None,
            error: Some(e.to_string()),
        },
    }
}

/// Solves one equilibrium per cap of the grid. Points are solved in parallel
/// and reported in grid order; failed points carry their error.
pub fn run_cap_sweep(spec: &SweepSpec, opts: &SolverOptions) -> Result<SweepReport> {
    spec.validate().map_err(Error::InvalidOptions)?;
    let points = spec
        .caps
        .par_iter()
        .map(|&cap| solve_point(&spec.base.with_cap_mean(cap), cap, spec, opts))
        .collect();
    Ok(SweepReport {
        thresholds: spec.ncre_thresholds.clone(),
        phaseout_set: spec.phaseout_set.clone(),
        points,
    })
}

/// Allowance price as a function of the trade-cap proportion of the grid's
/// technology, plus the uncapped reference.
pub fn run_trade_cap_study(spec: &SweepSpec, opts: &SolverOptions) -> Result<TradeCapCurve> {
    spec.validate().map_err(Error::InvalidOptions)?;
    let grid = spec
        .trade_cap
        .as_ref()
        .ok_or_else(|| Error::InvalidOptions("no trade-cap grid configured".into()))?;
    let mut uncapped_instance = spec.base.clone();
    uncapped_instance.policy.trade_caps.clear();
    let mut jobs: Vec<(f64, MarketInstance)> = vec![(f64::INFINITY, uncapped_instance)];
    for &rho in &grid.rhos {
        let mut inst = spec.base.clone();
        inst.policy.trade_caps.clear();
        inst.policy.trade_caps.insert(grid.technology.clone(), rho);
        inst.policy.trade_cap_form = grid.form;
        jobs.push((rho, inst));
    }
    let mut solved: Vec<SweepPoint> = jobs
        .par_iter()
        .map(|(rho, inst)| solve_point(inst, *rho, spec, opts))
        .collect();
    let uncapped = solved.remove(0);
    Ok(TradeCapCurve {
        technology: grid.technology.clone(),
        form: grid.form,
        uncapped,
        points: solved,
    })
}
