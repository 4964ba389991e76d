//! Subcommands. Each one loads the configuration, applies the command-line
//! overrides, runs, writes its artifacts and returns a short text summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use capmarket_core::budget::{PLEDGE_END, PLEDGE_SPLIT, PLEDGE_START};
use capmarket_core::solver::block_deviations;
use capmarket_core::sweep::{point_metrics, PointMetrics, SweepPoint};
use capmarket_core::{
    assemble_with, run_cap_sweep, run_trade_cap_study, scenario_emissions, solve_mcp, solve_planner,
    verify, EmissionsTrajectory, EquilibriumSolution, MarketInstance,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, Format, RunConfig};
use crate::report::{write_json, Cell, Table};

pub const OUT_ENV: &str = "CAPMARKET_OUT";

/// Largest relative oracle deviation accepted by `verify`.
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "capmarket", version, about = "Cap-and-trade capacity-expansion equilibria")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Configuration document (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to the configuration's, then `out`.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Encoding of the tables.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Complementarity tolerance of the solver.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Cap mean in tCO2e, replacing the configured cap (and the sweep grid).
    #[arg(long, global = true)]
    pub cap: Option<f64>,
    /// Seed of the solver's randomized restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve one equilibrium.
    Solve,
    /// Solve one equilibrium per cap of the grid.
    Sweep,
    /// Allowance price against the trade-cap proportion of one technology.
    TradeCap,
    /// Electric-sector carbon budget of the emissions trajectory.
    Budget,
    /// Cross-check the equilibrium against the planner oracle.
    Verify,
}

/// What a finished command reports back.
#[derive(Debug)]
pub struct Outcome {
    pub message: String,
    pub artifacts: Vec<PathBuf>,
    /// Set when the command ran but its check failed.
    pub failed: bool,
}

struct Context_ {
    config: Option<RunConfig>,
    out: PathBuf,
    format: Format,
}

fn prepare(args: &GlobalArgs, needs_config: bool) -> Result<Context_> {
    let mut config = match &args.config {
        Some(path) => Some(load_config(path)?),
        None if needs_config => bail!("--config is required for this command"),
        None => None,
    };
    if let Some(cfg) = config.as_mut() {
        if let Some(tol) = args.tol {
            cfg.solver.tol = tol;
        }
        if let Some(seed) = args.seed {
            cfg.solver.seed = seed;
        }
        if let Some(cap) = args.cap {
            cfg.instance.policy.cap_mean = cap;
            cfg.sweep.base.policy.cap_mean = cap;
            cfg.sweep.caps = vec![cap];
        }
        if let Err(e) = cfg.solver.validate() {
            bail!("solver: {e}");
        }
        cfg.instance = cfg.sweep.base.clone();
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = args
        .format
        .or_else(|| config.as_ref().map(|c| c.output.format))
        .unwrap_or_default();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    Ok(Context_ { config, out, format })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve => solve(&cli.global),
        Command::Sweep => sweep(&cli.global),
        Command::TradeCap => trade_cap(&cli.global),
        Command::Budget => budget(&cli.global),
        Command::Verify => verify_cmd(&cli.global),
    }
}

fn scenario_label(inst: &MarketInstance, w: usize) -> Cell {
    inst.scenarios.names[w].as_str().into()
}

/// Output and builds by technology, then year, then scenario. The first stage
/// is shared by all scenarios and has an empty scenario field.
pub fn production_table(sol: &EquilibriumSolution, inst: &MarketInstance) -> Table {
    let mut t = Table::new("production", &["technology", "year", "t", "scenario", "output_mwh", "build_mw"]);
    for (i, tech) in inst.technologies.iter().enumerate() {
        t.push(vec![
            tech.name.as_str().into(),
            inst.base_year.into(),
            0usize.into(),
            Cell::Missing,
            sol.q0[i].into(),
            sol.x0[i].into(),
        ]);
        for year in 1..=inst.horizon {
            for w in 0..inst.n_scenarios() {
                t.push(vec![
                    tech.name.as_str().into(),
                    inst.calendar_year(year).into(),
                    year.into(),
                    scenario_label(inst, w),
                    sol.q[[i, year - 1, w]].into(),
                    sol.x[[i, year - 1, w]].into(),
                ]);
            }
        }
    }
    t
}

pub fn price_table(sol: &EquilibriumSolution, inst: &MarketInstance) -> Table {
    let mut t = Table::new("prices", &["year", "t", "scenario", "electricity_price"]);
    t.push(vec![inst.base_year.into(), 0usize.into(), Cell::Missing, sol.price0.into()]);
    for year in 1..=inst.horizon {
        for w in 0..inst.n_scenarios() {
            t.push(vec![
                inst.calendar_year(year).into(),
                year.into(),
                scenario_label(inst, w),
                sol.price[[year - 1, w]].into(),
            ]);
        }
    }
    t
}

pub fn trade_table(sol: &EquilibriumSolution, inst: &MarketInstance) -> Table {
    let mut t = Table::new(
        "trades",
        &["technology", "scenario", "allowances", "purchases", "sales", "holdings", "emissions", "trade_price"],
    );
    let own: Vec<Vec<f64>> = (0..inst.n_scenarios())
        .map(|w| capmarket_core::model::own_emissions_all(sol, inst, w))
        .collect();
    for (i, tech) in inst.technologies.iter().enumerate() {
        for w in 0..inst.n_scenarios() {
            let (a, p, v) = (sol.allowances[i], sol.purchases[[i, w]], sol.sales[[i, w]]);
            t.push(vec![
                tech.name.as_str().into(),
                scenario_label(inst, w),
                a.into(),
                p.into(),
                v.into(),
                (a + p - v).into(),
                own[w][i].into(),
                sol.trade_price[w].into(),
            ]);
        }
    }
    t
}

#[derive(Debug, Serialize)]
struct SolveSummary<'a> {
    command: &'static str,
    technologies: usize,
    scenarios: &'a [String],
    horizon: usize,
    cap_mean: f64,
    cap_bound: f64,
    method: &'a str,
    iterations: usize,
    residual_norm: f64,
    allowance_price: f64,
    theta: f64,
    trade_prices: &'a [f64],
    scenario_emissions: Vec<f64>,
    metrics: PointMetrics,
}

fn metrics_of(sol: &EquilibriumSolution, cfg: &RunConfig) -> PointMetrics {
    let set: Vec<usize> = cfg
        .sweep
        .phaseout_set
        .iter()
        .filter_map(|n| cfg.instance.tech_index(n).ok())
        .collect();
    point_metrics(sol, &cfg.instance, &cfg.sweep.ncre_thresholds, &set, cfg.sweep.phaseout_tolerance)
}

fn solve_config(cfg: &RunConfig) -> Result<EquilibriumSolution> {
    let sys = assemble_with(&cfg.instance, cfg.sweep.assemble)?;
    Ok(solve_mcp(&sys, &cfg.solver, None)?)
}

fn solve(args: &GlobalArgs) -> Result<Outcome> {
    let ctx = prepare(args, true)?;
    let cfg = ctx.config.as_ref().expect("config");
    let inst = &cfg.instance;
    let sol = solve_config(cfg)?;
    let mut artifacts = Vec::new();
    for table in [production_table(&sol, inst), price_table(&sol, inst), trade_table(&sol, inst)] {
        artifacts.push(table.write(&ctx.out, ctx.format)?);
    }
    let summary = SolveSummary {
        command: "solve",
        technologies: inst.n_tech(),
        scenarios: &inst.scenarios.names,
        horizon: inst.horizon,
        cap_mean: inst.policy.cap_mean,
        cap_bound: inst.policy.cap_bound()?,
        method: &sol.stats.method,
        iterations: sol.stats.iterations,
        residual_norm: sol.residual_norm,
        allowance_price: sol.allowance_price,
        theta: sol.theta,
        trade_prices: &sol.trade_price,
        scenario_emissions: (0..inst.n_scenarios())
            .map(|w| scenario_emissions(&sol, inst, w))
            .collect::<capmarket_core::Result<_>>()?,
        metrics: metrics_of(&sol, cfg),
    };
    artifacts.push(write_json(&ctx.out, "summary", &summary)?);
    let message = format!(
        "equilibrium after {} {} iterations, residual {:.3e}\nallowance price {:.4} USD/tCO2e, issued {:.6e} tCO2e",
        sol.stats.iterations, sol.stats.method, sol.residual_norm, sol.allowance_price, sol.theta
    );
    Ok(Outcome {
        message,
        artifacts,
        failed: false,
    })
}

fn threshold_column(threshold: f64) -> String {
    format!("year_ncre_{}", (threshold * 100.0).round())
}

/// One row per grid point and scenario.
fn metrics_table(name: &str, parameter: &str, points: &[SweepPoint], inst: &MarketInstance, thresholds: &[f64]) -> Table {
    let mut header: Vec<String> = [
        parameter,
        "scenario",
        "converged",
        "allowance_price",
        "trade_price",
        "theta",
        "emissions",
        "mean_price",
        "phaseout_year",
        "final_ncre_share",
        "additions_mw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(thresholds.iter().map(|&t| threshold_column(t)));
    header.push("error".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(name, &refs);
    for p in points {
        for w in 0..inst.n_scenarios() {
            let mut row: Vec<Cell> = vec![Cell::opt_num(p.parameter.is_finite().then_some(p.parameter)), scenario_label(inst, w)];
            match &p.metrics {
                Some(m) => {
                    row.extend([
                        true.into(),
                        m.allowance_price.into(),
                        m.trade_prices[w].into(),
                        m.theta.into(),
                        m.scenario_emissions[w].into(),
                        m.mean_price.into(),
                        Cell::opt_year(m.phaseout_year[w]),
                        Cell::opt_num(m.final_ncre_share[w]),
                        m.additions[w].total.into(),
                    ]);
                    row.extend(m.share_years.iter().map(|s| Cell::opt_year(s.years[w])));
                    row.push(Cell::Missing);
                }
                None => {
                    row.push(false.into());
                    row.extend(std::iter::repeat(Cell::Missing).take(8 + thresholds.len()));
                    row.push(p.error.clone().unwrap_or_default().into());
                }
            }
            t.push(row);
        }
    }
    t
}

/// Output by grid point, technology, year and scenario.
fn point_production_table(name: &str, parameter: &str, points: &[SweepPoint], inst: &MarketInstance) -> Table {
    let mut t = Table::new(name, &[parameter, "technology", "year", "scenario", "output_mwh"]);
    for p in points {
        let Some(sol) = &p.solution else { continue };
        let param = Cell::opt_num(p.parameter.is_finite().then_some(p.parameter));
        for (i, tech) in inst.technologies.iter().enumerate() {
            t.push(vec![param.clone(), tech.name.as_str().into(), inst.base_year.into(), Cell::Missing, sol.q0[i].into()]);
            for year in 1..=inst.horizon {
                for w in 0..inst.n_scenarios() {
                    t.push(vec![
                        param.clone(),
                        tech.name.as_str().into(),
                        inst.calendar_year(year).into(),
                        scenario_label(inst, w),
                        sol.q[[i, year - 1, w]].into(),
                    ]);
                }
            }
        }
    }
    t
}

#[derive(Debug, Serialize)]
struct PointSummary<'a> {
    parameter: Option<f64>,
    converged: bool,
    method: Option<&'a str>,
    iterations: Option<usize>,
    residual_norm: Option<f64>,
    metrics: Option<&'a PointMetrics>,
    error: Option<&'a str>,
}

fn point_summary(p: &SweepPoint) -> PointSummary<'_> {
    PointSummary {
        parameter: p.parameter.is_finite().then_some(p.parameter),
        converged: p.converged(),
        method: p.solution.as_ref().map(|s| s.stats.method.as_str()),
        iterations: p.solution.as_ref().map(|s| s.stats.iterations),
        residual_norm: p.solution.as_ref().map(|s| s.residual_norm),
        metrics: p.metrics.as_ref(),
        error: p.error.as_deref(),
    }
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    command: &'static str,
    /// Mean price is the undiscounted, probability-weighted average of the
    /// second-stage electricity prices.
    mean_price_definition: &'static str,
    thresholds: &'a [f64],
    phaseout_set: &'a [String],
    points: Vec<PointSummary<'a>>,
}

const MEAN_PRICE_NOTE: &str = "undiscounted time average of probability-weighted second-stage prices, t = 1..horizon";

fn sweep(args: &GlobalArgs) -> Result<Outcome> {
    let ctx = prepare(args, true)?;
    let cfg = ctx.config.as_ref().expect("config");
    let report = run_cap_sweep(&cfg.sweep, &cfg.solver)?;
    let inst = &cfg.instance;
    let mut artifacts = vec![
        metrics_table("sweep", "cap_tco2e", &report.points, inst, &report.thresholds).write(&ctx.out, ctx.format)?,
        point_production_table("sweep_production", "cap_tco2e", &report.points, inst).write(&ctx.out, ctx.format)?,
    ];
    let summary = SweepSummary {
        command: "sweep",
        mean_price_definition: MEAN_PRICE_NOTE,
        thresholds: &report.thresholds,
        phaseout_set: &report.phaseout_set,
        points: report.points.iter().map(point_summary).collect(),
    };
    artifacts.push(write_json(&ctx.out, "summary", &summary)?);
    let mut message = String::from("cap (MtCO2e)  allowance price (USD/tCO2e)\n");
    for p in &report.points {
        match p.allowance_price() {
            Some(pa) => message.push_str(&format!("{:>12.1}  {pa:.4}\n", p.parameter / 1e6)),
            None => message.push_str(&format!("{:>12.1}  failed: {}\n", p.parameter / 1e6, p.error.as_deref().unwrap_or(""))),
        }
    }
    let failed = report.points.iter().any(|p| !p.converged());
    Ok(Outcome {
        message: message.trim_end().to_string(),
        artifacts,
        failed,
    })
}

#[derive(Debug, Serialize)]
struct TradeCapSummary<'a> {
    command: &'static str,
    technology: &'a str,
    form: capmarket_core::TradeCapForm,
    uncapped: PointSummary<'a>,
    points: Vec<PointSummary<'a>>,
}

fn trade_cap(args: &GlobalArgs) -> Result<Outcome> {
    let ctx = prepare(args, true)?;
    let cfg = ctx.config.as_ref().expect("config");
    let curve = run_trade_cap_study(&cfg.sweep, &cfg.solver)?;
    let inst = &cfg.instance;
    let target = inst.tech_index(&curve.technology)?;

    let mut table = Table::new(
        "trade_cap",
        &["rho", "scenario", "converged", "allowance_price", "trade_price", "allowances", "purchases", "sales", "emissions", "phaseout_year", "error"],
    );
    let all: Vec<&SweepPoint> = std::iter::once(&curve.uncapped).chain(&curve.points).collect();
    for p in &all {
        for w in 0..inst.n_scenarios() {
            let rho = Cell::opt_num(p.parameter.is_finite().then_some(p.parameter));
            let row = match (&p.solution, &p.metrics) {
                (Some(sol), Some(m)) => vec![
                    rho,
                    scenario_label(inst, w),
                    true.into(),
                    sol.allowance_price.into(),
                    sol.trade_price[w].into(),
                    sol.allowances[target].into(),
                    sol.purchases[[target, w]].into(),
                    sol.sales[[target, w]].into(),
                    capmarket_core::model::own_emissions_all(sol, inst, w)[target].into(),
                    Cell::opt_year(m.phaseout_year[w]),
                    Cell::Missing,
                ],
                _ => {
                    let mut row = vec![rho, scenario_label(inst, w), false.into()];
                    row.extend(std::iter::repeat(Cell::Missing).take(7));
                    row.push(p.error.clone().unwrap_or_default().into());
                    row
                }
            };
            table.push(row);
        }
    }
    let mut artifacts = vec![table.write(&ctx.out, ctx.format)?];
    let summary = TradeCapSummary {
        command: "trade-cap",
        technology: &curve.technology,
        form: curve.form,
        uncapped: point_summary(&curve.uncapped),
        points: curve.points.iter().map(point_summary).collect(),
    };
    artifacts.push(write_json(&ctx.out, "summary", &summary)?);

    let mut message = format!("trade cap on {} ({:?} form)\n", curve.technology, curve.form);
    for p in &all {
        let label = if p.parameter.is_finite() { format!("{:.3}", p.parameter) } else { "none".into() };
        match p.allowance_price() {
            Some(pa) => message.push_str(&format!("rho {label:>6}  allowance price {pa:.4}\n")),
            None => message.push_str(&format!("rho {label:>6}  failed: {}\n", p.error.as_deref().unwrap_or(""))),
        }
    }
    Ok(Outcome {
        message: message.trim_end().to_string(),
        artifacts,
        failed: all.iter().any(|p| !p.converged()),
    })
}

#[derive(Debug, Serialize)]
struct BudgetSummary {
    command: &'static str,
    first_period: (i32, i32),
    second_period: (i32, i32),
    first_period_mt: f64,
    second_period_mt: f64,
    total_mt: f64,
    pledge_cap_tco2e: f64,
}

pub fn budget_table(traj: &EmissionsTrajectory) -> Result<Table> {
    let mut t = Table::new("budget", &["year", "economy_mt", "sector_share", "sector_mt"]);
    for year in PLEDGE_START..PLEDGE_END {
        let e = traj.interpolate(year)?;
        let s = traj.share(year)?;
        t.push(vec![year.into(), e.into(), s.into(), (e * s).into()]);
    }
    Ok(t)
}

fn budget(args: &GlobalArgs) -> Result<Outcome> {
    let ctx = prepare(args, false)?;
    let traj = ctx
        .config
        .as_ref()
        .map_or_else(EmissionsTrajectory::bundled, |c| c.trajectory.clone());
    let (first, second) = traj.pledge_periods()?;
    let summary = BudgetSummary {
        command: "budget",
        first_period: (PLEDGE_START, PLEDGE_SPLIT - 1),
        second_period: (PLEDGE_SPLIT, PLEDGE_END - 1),
        first_period_mt: first,
        second_period_mt: second,
        total_mt: first + second,
        pledge_cap_tco2e: traj.pledge_cap()?,
    };
    let artifacts = vec![
        budget_table(&traj)?.write(&ctx.out, ctx.format)?,
        write_json(&ctx.out, "summary", &summary)?,
    ];
    let message = format!(
        "{}-{}: {:.2} MtCO2e\n{}-{}: {:.2} MtCO2e\ntotal: {:.2} MtCO2e",
        PLEDGE_START,
        PLEDGE_SPLIT - 1,
        first,
        PLEDGE_SPLIT,
        PLEDGE_END - 1,
        second,
        first + second
    );
    Ok(Outcome {
        message,
        artifacts,
        failed: false,
    })
}

#[derive(Debug, Serialize)]
struct VerifySummary<'a> {
    command: &'static str,
    oracle_tol: f64,
    max_deviation: f64,
    deviations: Vec<(&'static str, f64)>,
    mcp_residual: f64,
    planner_residual: f64,
    planner_check_passed: bool,
    planner_check_failures: &'a [String],
    passed: bool,
}

fn verify_cmd(args: &GlobalArgs) -> Result<Outcome> {
    let ctx = prepare(args, true)?;
    let cfg = ctx.config.as_ref().expect("config");
    let inst = &cfg.instance;
    let mcp = solve_config(cfg)?;
    let planner = solve_planner(inst)?;
    let deviations = block_deviations(&mcp, &planner);
    let max_deviation = deviations.iter().fold(0.0f64, |m, (_, d)| m.max(*d));
    let check = verify(inst, &planner, cfg.sweep.assemble, ORACLE_TOL)?;
    let passed = max_deviation <= ORACLE_TOL && check.passed;
    let summary = VerifySummary {
        command: "verify",
        oracle_tol: ORACLE_TOL,
        max_deviation,
        deviations: deviations.clone(),
        mcp_residual: mcp.residual_norm,
        planner_residual: planner.residual_norm,
        planner_check_passed: check.passed,
        planner_check_failures: &check.failures,
        passed,
    };
    let artifacts = vec![write_json(&ctx.out, "summary", &summary)?];
    let mut message = format!("max oracle deviation {max_deviation:.3e} (tolerance {ORACLE_TOL:e})\n");
    for (block, d) in &deviations {
        message.push_str(&format!("  {block:<16} {d:.3e}\n"));
    }
    message.push_str(if passed { "verify: pass" } else { "verify: FAIL" });
    if !check.passed {
        message.push_str(&format!("\nplanner check: {}", check.failures.join("; ")));
    }
    Ok(Outcome {
        message,
        artifacts,
        failed: !passed,
    })
}

/// Paths relative to `base` for stable printing.
pub fn display_path(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}
