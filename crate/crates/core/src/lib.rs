//! Competitive equilibria of a two-stage stochastic capacity-expansion
//! electricity market with a cap-and-trade permit market.
//!
//! Producers choose first-stage investment and output, buy allowances from an
//! auctioneer, and adapt investment, output and permit trades to each demand
//! scenario. The joint first-order conditions form a mixed complementarity
//! problem ([`mcp`]) solved by a semismooth Newton method ([`solver`]); a
//! convex planner QP serves as an independent oracle.

pub mod budget;
pub mod error;
pub mod fixtures;
pub mod mcp;
pub mod model;
pub mod normal;
pub mod solver;
pub mod sparse;
pub mod sweep;
pub mod units;

pub use budget::EmissionsTrajectory;
pub use error::{Error, Result};
pub use mcp::{assemble, assemble_with, check_solution, AssembleOptions, ComplementaritySystem, Transcription};
pub use model::{
    available_capacity, production_cost, scenario_emissions, validate_instance, CarbonPolicy,
    EquilibriumSolution, MarketInstance, Multipliers, ScenarioSet, SolverStats, TechnologySpec,
    TradeCapForm, ValidationReport,
};
pub use normal::inv_norm_cdf;
pub use solver::{solve_mcp, solve_planner, verify, NonConvergence, SolverOptions};
pub use sweep::{run_cap_sweep, run_trade_cap_study, SweepReport, SweepSpec};
pub use units::UnitSystem;
