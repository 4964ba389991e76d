//! The declarative run configuration.
//!
//! One TOML document describes the market, the carbon policy, the emissions
//! trajectory, the sweep grids, the solver settings and the outputs. Unknown
//! keys are rejected everywhere. Quantities are in MW, MWh, USD and tCO2e.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use capmarket_core::sweep::{default_cap_grid, TradeCapGrid};
use capmarket_core::{
    validate_instance, AssembleOptions, CarbonPolicy, EmissionsTrajectory, MarketInstance,
    ScenarioSet, SolverOptions, SweepSpec, TechnologySpec, TradeCapForm, Transcription, UnitSystem,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// A per-year multiplier path: explicit values or `start * (1 + rate)^(t - 1)`
/// bounded below by `floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Explicit(Vec<f64>),
    Trend(Trend),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trend {
    #[serde(default = "one")]
    pub start: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub floor: f64,
}

fn one() -> f64 {
    1.0
}

impl PathSpec {
    pub fn expand(&self, horizon: usize) -> Vec<f64> {
        match self {
            Self::Explicit(values) => values.clone(),
            Self::Trend(trend) => (0..horizon)
                .map(|k| (trend.start * (1.0 + trend.rate).powi(k as i32)).max(trend.floor))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub base_year: i32,
    pub horizon: usize,
    pub discount: f64,
    #[serde(default = "hours")]
    pub hours_per_year: f64,
    #[serde(default)]
    pub units: UnitSystem,
    #[serde(default)]
    pub transcription: Transcription,
}

fn hours() -> f64 {
    MarketInstance::HOURS_PER_YEAR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologySection {
    pub name: String,
    /// USD/MWh
    pub linear_cost: f64,
    /// USD/MWh²
    pub quadratic_cost: f64,
    /// USD/MW
    pub capex: f64,
    /// MW
    pub installed_capacity: f64,
    pub capacity_factor: f64,
    /// MW
    pub resource_potential: f64,
    #[serde(default)]
    pub build_lag: u32,
    /// tCO2e/MWh
    pub emission_factor: f64,
    #[serde(default)]
    pub ncre: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op_cost_path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capex_path: Option<PathSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// Defaults to an equal share of the remaining mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Demand per second-stage year, MWh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<f64>>,
    /// Annual growth from the first-stage demand, used when `path` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    /// MWh at the base year.
    pub first_stage: f64,
    pub scenarios: Vec<ScenarioSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// tCO2e
    pub cap_mean: f64,
    #[serde(default)]
    pub cap_std: f64,
    #[serde(default = "margin")]
    pub margin: f64,
    #[serde(default = "scc")]
    pub scc: f64,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub trade_caps: std::collections::BTreeMap<String, f64>,
    #[serde(default)]
    pub trade_cap_form: TradeCapForm,
}

fn margin() -> f64 {
    0.05
}

fn scc() -> f64 {
    CarbonPolicy::DEFAULT_SCC
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// (year, MtCO2e)
    pub anchors: Vec<(i32, f64)>,
    /// (year, share)
    pub sector_share: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeCapSection {
    pub technology: String,
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub form: TradeCapForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// tCO2e
    #[serde(default = "default_cap_grid")]
    pub caps: Vec<f64>,
    #[serde(default = "thresholds")]
    pub ncre_thresholds: Vec<f64>,
    /// MWh per year
    #[serde(default = "tolerance")]
    pub phaseout_tolerance: f64,
    #[serde(default = "phaseout_set")]
    pub phaseout_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trade_cap: Option<TradeCapSection>,
}

fn thresholds() -> Vec<f64> {
    SweepSpec::DEFAULT_THRESHOLDS.to_vec()
}

fn tolerance() -> f64 {
    SweepSpec::DEFAULT_PHASEOUT_TOLERANCE
}

fn phaseout_set() -> Vec<String> {
    vec!["coal".into()]
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            caps: default_cap_grid(),
            ncre_thresholds: thresholds(),
            phaseout_tolerance: tolerance(),
            phaseout_set: phaseout_set(),
            trade_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub model: ModelSection,
    pub policy: PolicySection,
    pub demand: DemandSection,
    pub technologies: Vec<TechnologySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSection,
}

/// A loaded and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub instance: MarketInstance,
    pub sweep: SweepSpec,
    pub solver: SolverOptions,
    pub trajectory: EmissionsTrajectory,
    pub output: OutputSection,
}

fn expand_path(spec: &Option<PathSpec>, horizon: usize) -> Vec<f64> {
    spec.as_ref().map_or_else(|| vec![1.0; horizon], |p| p.expand(horizon))
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn probabilities(&self) -> Result<Vec<f64>> {
        let scenarios = &self.demand.scenarios;
        let given: f64 = scenarios.iter().filter_map(|s| s.probability).sum();
        let open = scenarios.iter().filter(|s| s.probability.is_none()).count();
        let share = if open > 0 { (1.0 - given) / open as f64 } else { 0.0 };
        if open > 0 && share < 0.0 {
            bail!("demand.scenarios: explicit probabilities already exceed one");
        }
        Ok(scenarios.iter().map(|s| s.probability.unwrap_or(share)).collect())
    }

    fn scenario_set(&self, horizon: usize) -> Result<ScenarioSet> {
        let scenarios = &self.demand.scenarios;
        if scenarios.is_empty() {
            bail!("demand.scenarios: at least one scenario is required");
        }
        let d0 = self.demand.first_stage;
        let mut demand = Array2::zeros((horizon, scenarios.len()));
        for (w, s) in scenarios.iter().enumerate() {
            let field = format!("demand.scenarios[{w}]");
            let path: Vec<f64> = match (&s.path, s.growth) {
                (Some(path), None) => path.clone(),
                (None, Some(g)) => (1..=horizon).map(|t| d0 * (1.0 + g).powi(t as i32)).collect(),
                (Some(_), Some(_)) => bail!("{field}: give either `path` or `growth`, not both"),
                (None, None) => bail!("{field}: one of `path` or `growth` is required"),
            };
            if path.len() != horizon {
                bail!("{field}.path: {} values for a horizon of {horizon}", path.len());
            }
            demand.column_mut(w).assign(&ndarray::Array1::from(path));
        }
        Ok(ScenarioSet {
            first_stage_demand: d0,
            demand,
            probabilities: self.probabilities()?,
            names: scenarios.iter().map(|s| s.name.clone()).collect(),
        })
    }

    pub fn instance(&self) -> Result<MarketInstance> {
        let horizon = self.model.horizon;
        let technologies = self
            .technologies
            .iter()
            .map(|t| TechnologySpec {
                name: t.name.clone(),
                linear_cost: t.linear_cost,
                quadratic_cost: t.quadratic_cost,
                capex: t.capex,
                installed_capacity: t.installed_capacity,
                capacity_factor: t.capacity_factor,
                resource_potential: t.resource_potential,
                build_lag: t.build_lag,
                emission_factor: t.emission_factor,
                op_cost_path: expand_path(&t.op_cost_path, horizon),
                capex_path: expand_path(&t.capex_path, horizon),
                ncre: t.ncre,
            })
            .collect();
        let p = &self.policy;
        Ok(MarketInstance {
            technologies,
            scenarios: self.scenario_set(horizon)?,
            horizon,
            discount: self.model.discount,
            hours_per_year: self.model.hours_per_year,
            policy: CarbonPolicy {
                cap_mean: p.cap_mean,
                cap_std: p.cap_std,
                margin: p.margin,
                scc: p.scc,
                trade_caps: p.trade_caps.clone(),
                trade_cap_form: p.trade_cap_form,
            },
            base_year: self.model.base_year,
        })
    }

    pub fn trajectory(&self) -> Result<EmissionsTrajectory> {
        match &self.trajectory {
            Some(t) => EmissionsTrajectory::new(t.anchors.clone(), t.sector_share.clone())
                .context("trajectory"),
            None => Ok(EmissionsTrajectory::bundled()),
        }
    }

    pub fn sweep_spec(&self, instance: &MarketInstance) -> SweepSpec {
        let s = &self.sweep;
        SweepSpec {
            base: instance.clone(),
            caps: s.caps.clone(),
            trade_cap: s.trade_cap.as_ref().map(|t| TradeCapGrid {
                technology: t.technology.clone(),
                rhos: t.rhos.clone(),
                form: t.form,
            }),
            ncre_thresholds: s.ncre_thresholds.clone(),
            phaseout_tolerance: s.phaseout_tolerance,
            phaseout_set: s.phaseout_set.clone(),
            assemble: AssembleOptions {
                units: self.model.units,
                transcription: self.model.transcription,
            },
        }
    }

    /// Builds and validates every object the document describes.
    pub fn resolve(&self) -> Result<RunConfig> {
        let instance = self.instance()?;
        let report = validate_instance(&instance);
        if !report.is_ok() {
            bail!("invalid instance: {report}");
        }
        let sweep = self.sweep_spec(&instance);
        if let Err(e) = sweep.validate() {
            bail!("sweep: {e}");
        }
        if let Err(e) = self.solver.validate() {
            bail!("solver: {e}");
        }
        Ok(RunConfig {
            instance,
            sweep,
            solver: self.solver.clone(),
            trajectory: self.trajectory()?,
            output: self.output.clone(),
        })
    }

    /// A document that reloads into exactly `config`, with every path written
    /// out explicitly.
    pub fn from_config(config: &RunConfig) -> Self {
        let inst = &config.instance;
        let spec = &config.sweep;
        ConfigDocument {
            model: ModelSection {
                base_year: inst.base_year,
                horizon: inst.horizon,
                discount: inst.discount,
                hours_per_year: inst.hours_per_year,
                units: spec.assemble.units,
                transcription: spec.assemble.transcription,
            },
            policy: PolicySection {
                cap_mean: inst.policy.cap_mean,
                cap_std: inst.policy.cap_std,
                margin: inst.policy.margin,
                scc: inst.policy.scc,
                trade_caps: inst.policy.trade_caps.clone(),
                trade_cap_form: inst.policy.trade_cap_form,
            },
            demand: DemandSection {
                first_stage: inst.scenarios.first_stage_demand,
                scenarios: (0..inst.n_scenarios())
                    .map(|w| ScenarioSection {
                        name: inst.scenarios.names[w].clone(),
                        probability: Some(inst.scenarios.probabilities[w]),
                        path: Some(inst.scenarios.demand.column(w).to_vec()),
                        growth: None,
                    })
                    .collect(),
            },
            technologies: inst
                .technologies
                .iter()
                .map(|t| TechnologySection {
                    name: t.name.clone(),
                    linear_cost: t.linear_cost,
                    quadratic_cost: t.quadratic_cost,
                    capex: t.capex,
                    installed_capacity: t.installed_capacity,
                    capacity_factor: t.capacity_factor,
                    resource_potential: t.resource_potential,
                    build_lag: t.build_lag,
                    emission_factor: t.emission_factor,
                    ncre: t.ncre,
                    op_cost_path: Some(PathSpec::Explicit(t.op_cost_path.clone())),
                    capex_path: Some(PathSpec::Explicit(t.capex_path.clone())),
                })
                .collect(),
            trajectory: Some(TrajectorySection {
                anchors: config.trajectory.anchors.clone(),
                sector_share: config.trajectory.sector_share.clone(),
            }),
            sweep: SweepSection {
                caps: spec.caps.clone(),
                ncre_thresholds: spec.ncre_thresholds.clone(),
                phaseout_tolerance: spec.phaseout_tolerance,
                phaseout_set: spec.phaseout_set.clone(),
                trade_cap: spec.trade_cap.as_ref().map(|t| TradeCapSection {
                    technology: t.technology.clone(),
                    rhos: t.rhos.clone(),
                    form: t.form,
                }),
            },
            solver: config.solver.clone(),
            output: config.output.clone(),
        }
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read configuration {}", path.display()))?;
    let doc = ConfigDocument::parse(&text).with_context(|| format!("in {}", path.display()))?;
    doc.resolve().with_context(|| format!("in {}", path.display()))
}
