//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the terminal.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use capmarket_cli::load_config;
use capmarket_core::fixtures::{random_instance, single_producer, two_producer};
use capmarket_core::mcp::Var;
use capmarket_core::normal::norm_cdf;
use capmarket_core::solver::block_deviations;
use capmarket_core::sweep::TradeCapGrid;
use capmarket_core::*;
use ndarray::Array2;

const ORACLE_INSTANCES: u64 = 200;
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const RESIDUAL_TOL: f64 = 1e-8;
const CLOSED_FORM_TOL: f64 = 1e-10;
const CHANCE_BOUND: f64 = 83.5515;
const CHANCE_TOL: f64 = 1e-3;
const PLEDGE_MT: f64 = 931.1;
const PLEDGE_REL: f64 = 0.01;
const PRICE_RATIO: f64 = 4.0;
const SWEEP_BUDGET: Duration = Duration::from_secs(300);
/// Shares equal up to solver accuracy count as equal.
const SHARE_SLACK: f64 = 1e-9;
const COLLAPSE_TOL: f64 = 1e-7;
const TRADE_CAP_TOL: f64 = 1e-6;
const LARGE_RHO: f64 = 1e6;
const CDF_TOL: f64 = 1e-9;

type Outcome = std::result::Result<String, String>;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn oracle_equivalence(residuals: &mut Vec<f64>) -> Outcome {
    let started = Instant::now();
    let opts = SolverOptions::default();
    let mut worst = (0.0f64, 0u64, "");
    for seed in 0..ORACLE_INSTANCES {
        let inst = random_instance(seed);
        let m = assemble(&inst)
            .and_then(|sys| solve_mcp(&sys, &opts, None))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        residuals.push(m.residual_norm);
        let p = solve_planner(&inst).map_err(|e| format!("seed {seed}: planner {e}"))?;
        for (block, dev) in block_deviations(&m, &p) {
            if dev > worst.0 {
                worst = (dev, seed, block);
            }
        }
    }
    let elapsed = started.elapsed();
    let line = format!(
        "{ORACLE_INSTANCES} instances, worst deviation {:.2e} ({} seed {}), {:.1?}",
        worst.0, worst.2, worst.1, elapsed
    );
    if worst.0 <= ORACLE_TOL && elapsed <= ORACLE_BUDGET {
        Ok(line)
    } else {
        Err(line)
    }
}

fn closed_form_point(sys: &ComplementaritySystem, inst: &MarketInstance) -> Vec<f64> {
    let tech = &inst.technologies[0];
    let q0 = inst.scenarios.first_stage_demand;
    let q1 = inst.scenarios.demand[[0, 0]];
    let scc = inst.policy.scc;
    let eps = tech.emission_factor;
    let weight = inst.scenarios.probabilities[0] * inst.discount_factor(1);
    let allowances = eps * (q0 + q1);
    let mut z = vec![0.0; sys.len()];
    sys.set_natural(&mut z, Var::Output0 { tech: 0 }, q0);
    sys.set_natural(&mut z, Var::Output { tech: 0, t: 1, scenario: 0 }, q1);
    sys.set_natural(&mut z, Var::Allowance { tech: 0 }, allowances);
    sys.set_natural(&mut z, Var::Issued, allowances);
    sys.set_natural(&mut z, Var::DemandPrice0, tech.linear_cost + tech.quadratic_cost * q0 + eps * scc);
    sys.set_natural(
        &mut z,
        Var::DemandPrice { t: 1, scenario: 0 },
        tech.op_cost_multiplier(1) * (tech.linear_cost + tech.quadratic_cost * q1) + eps * scc / weight,
    );
    sys.set_natural(&mut z, Var::AllowancePrice, scc);
    sys.set_natural(&mut z, Var::TradePrice { scenario: 0 }, scc);
    sys.set_natural(&mut z, Var::EmissionDual { tech: 0, scenario: 0 }, scc);
    z
}

fn complementarity_residual(residuals: &[f64]) -> Outcome {
    let worst = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    let inst = single_producer();
    let sys = assemble(&inst).map_err(|e| e.to_string())?;
    let report = check_solution(&sys, &closed_form_point(&sys, &inst), CLOSED_FORM_TOL);
    let line = format!(
        "worst solver residual {worst:.2e} over {} solves; closed-form {}-dim point error {:.2e}",
        residuals.len(),
        sys.len(),
        report.max_error
    );
    if !residuals.is_empty() && worst <= RESIDUAL_TOL && sys.len() == 18 && report.max_error <= CLOSED_FORM_TOL {
        Ok(line)
    } else {
        Err(line)
    }
}

fn chance_constraint() -> Outcome {
    let mut policy = CarbonPolicy::with_cap(100.0);
    policy.cap_std = 10.0;
    policy.margin = 0.05;
    let bound = policy.cap_bound().map_err(|e| e.to_string())?;
    policy.cap_std = 0.0;
    let exact = policy.cap_bound().map_err(|e| e.to_string())?;
    let line = format!("bound {bound:.6} (want {CHANCE_BOUND} +- {CHANCE_TOL}); sigma = 0 gives {exact}");
    if (bound - CHANCE_BOUND).abs() <= CHANCE_TOL && exact == 100.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn budget_arithmetic() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let o = Command::new(env!("CARGO_BIN_EXE_capmarket"))
        .args(["budget", "--out"])
        .arg(out.path())
        .output()
        .map_err(|e| e.to_string())?;
    let printed = String::from_utf8_lossy(&o.stdout).into_owned();
    let (first, second) = EmissionsTrajectory::bundled().pledge_periods().map_err(|e| e.to_string())?;
    let total = first + second;
    let line = format!("{first:.2} + {second:.2} = {total:.2} MtCO2e (want {PLEDGE_MT} within 1%)");
    let printed_total = printed.contains(&format!("total: {total:.2} MtCO2e"));
    if o.status.success() && printed_total && (total - PLEDGE_MT).abs() <= PLEDGE_REL * PLEDGE_MT {
        Ok(line)
    } else {
        Err(format!("{line}; command output: {printed}"))
    }
}

fn directional_sweep() -> Outcome {
    let cfg = load_config(&data("stylized-chile.toml")).map_err(|e| format!("{e:#}"))?;
    let started = Instant::now();
    let report = run_cap_sweep(&cfg.sweep, &cfg.solver).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let mut problems = Vec::new();
    let expected: Vec<f64> = (1..=10).map(|i| f64::from(i) * 100e6).collect();
    let caps: Vec<f64> = report.points.iter().map(|p| p.parameter).collect();
    if caps != expected || cfg.instance.n_tech() != 10 || cfg.instance.horizon != 31 || cfg.instance.n_scenarios() != 1 {
        problems.push("dataset or grid differs from 10 technologies, 31 years, caps 100..1000 Mt".to_string());
    }
    let mut metrics = Vec::new();
    for p in &report.points {
        match &p.metrics {
            Some(m) => metrics.push(m),
            None => problems.push(format!("cap {} failed: {}", p.parameter, p.error.as_deref().unwrap_or(""))),
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    let prices: Vec<f64> = metrics.iter().map(|m| m.allowance_price).collect();
    if prices.windows(2).any(|w| !(w[0] > w[1])) {
        problems.push(format!("allowance price not strictly decreasing: {prices:?}"));
    }
    let ratio = prices[0] / prices[prices.len() - 1];
    if !(ratio >= PRICE_RATIO) {
        problems.push(format!("price ratio {ratio:.3} below {PRICE_RATIO}"));
    }
    // grid is ordered loosest last; a tighter cap phases coal out no later
    let years: Vec<Option<i32>> = metrics.iter().map(|m| m.phaseout_year[0]).collect();
    let later = |a: Option<i32>, b: Option<i32>| match (a, b) {
        (Some(x), Some(y)) => x > y,
        (None, Some(_)) => true,
        _ => false,
    };
    if years.windows(2).any(|w| later(w[0], w[1])) {
        problems.push(format!("coal phase-out not monotone: {years:?}"));
    }
    let shares: Vec<f64> = metrics.iter().map(|m| m.final_ncre_share[0].unwrap_or(f64::NAN)).collect();
    if shares.windows(2).any(|w| !(w[0] >= w[1] - SHARE_SLACK)) {
        problems.push(format!("2050 NCRE share not monotone: {shares:?}"));
    }
    if elapsed > SWEEP_BUDGET {
        problems.push(format!("sweep took {elapsed:.1?}"));
    }
    let line = format!(
        "price {:.2} -> {:.2} USD/t (ratio {ratio:.2}); coal out {:?} -> {:?}; 2050 NCRE {:.3} -> {:.3}; {:.1?}",
        prices[0],
        prices[prices.len() - 1],
        years[0],
        years[years.len() - 1],
        shares[0],
        shares[shares.len() - 1],
        elapsed
    );
    if problems.is_empty() {
        Ok(line)
    } else {
        Err(format!("{line}; {}", problems.join("; ")))
    }
}

fn stochastic_collapse() -> Outcome {
    let path = vec![70_000.0, 75_000.0, 80_000.0];
    let base = two_producer();
    let mut one = base.clone();
    one.scenarios = ScenarioSet::deterministic(65_000.0, path.clone());
    let mut five = base;
    five.scenarios = ScenarioSet {
        first_stage_demand: 65_000.0,
        demand: Array2::from_shape_fn((3, 5), |(t, _)| path[t]),
        probabilities: vec![0.2; 5],
        names: (1..=5).map(|w| format!("s{w}")).collect(),
    };
    let solve = |inst: &MarketInstance| {
        assemble(inst)
            .and_then(|sys| solve_mcp(&sys, &SolverOptions::default(), None))
            .map_err(|e| e.to_string())
    };
    let a = solve(&one)?;
    let b = solve(&five)?;
    let col = |arr: &ndarray::Array3<f64>, w: usize| -> Vec<f64> {
        arr.index_axis(ndarray::Axis(2), w).iter().copied().collect()
    };
    let flat = |arr: &ndarray::Array3<f64>| -> Vec<f64> { arr.iter().copied().collect() };
    let held = |s: &EquilibriumSolution, w: usize| -> Vec<f64> {
        (0..2).map(|i| s.allowances[i] + s.purchases[[i, w]] - s.sales[[i, w]]).collect()
    };
    let mut blocks = vec![
        ("q0", rel(&b.q0, &a.q0)),
        ("x0", rel(&b.x0, &a.x0)),
        ("theta", rel(&[b.theta], &[a.theta])),
        ("price0", rel(&[b.price0], &[a.price0])),
        ("allowance_price", rel(&[b.allowance_price], &[a.allowance_price])),
    ];
    for w in 0..5 {
        blocks.push(("q", rel(&col(&b.q, w), &flat(&a.q))));
        blocks.push(("x", rel(&col(&b.x, w), &flat(&a.x))));
        blocks.push(("price", rel(&b.price.column(w).to_vec(), &a.price.column(0).to_vec())));
        blocks.push(("trade_price", rel(&[b.trade_price[w]], &[a.trade_price[0]])));
        blocks.push(("holdings", rel(&held(&b, w), &held(&a, 0))));
        let alpha_one: Vec<f64> = a.multipliers.alpha.iter().map(|v| 0.2 * v).collect();
        blocks.push(("alpha", rel(&col(&b.multipliers.alpha, w), &alpha_one)));
        blocks.push(("gamma", rel(&[b.multipliers.gamma[[0, w]]], &[0.2 * a.multipliers.gamma[[0, 0]]])));
    }
    let worst = blocks.iter().fold(("", 0.0f64), |m, &(n, d)| if d > m.1 { (n, d) } else { m });
    let line = format!("K = 5 identical vs K = 1: worst block {} at {:.2e}", worst.0, worst.1);
    if worst.1 <= COLLAPSE_TOL {
        Ok(line)
    } else {
        Err(line)
    }
}

fn trade_cap() -> Outcome {
    let cfg = load_config(&data("stylized-chile.toml")).map_err(|e| format!("{e:#}"))?;
    let mut spec = cfg.sweep.clone();
    spec.trade_cap = Some(TradeCapGrid {
        technology: "coal".into(),
        rhos: vec![0.0, LARGE_RHO],
        form: TradeCapForm::Purchase,
    });
    let curve = run_trade_cap_study(&spec, &cfg.solver).map_err(|e| e.to_string())?;
    let uncapped = curve.uncapped.allowance_price().ok_or("uncapped point failed")?;
    let zero = curve.points[0].solution.as_ref().ok_or("rho = 0 failed")?;
    let large = curve.points[1].allowance_price().ok_or("large rho failed")?;
    let coal = cfg.instance.tech_index("coal").map_err(|e| e.to_string())?;
    let purchases: Vec<f64> = zero.purchases.row(coal).to_vec();
    let gap = (large - uncapped).abs() / uncapped.abs().max(1.0);
    let line = format!(
        "rho = {LARGE_RHO:e}: price {large:.6} vs uncapped {uncapped:.6} (gap {gap:.1e}); rho = 0: coal purchases {purchases:?}"
    );
    if gap <= TRADE_CAP_TOL && purchases.iter().all(|&p| p == 0.0) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn determinism() -> Outcome {
    let config = data("stylized-chile.toml");
    let config = config.to_str().ok_or("path")?;
    let mut checked = Vec::new();
    for args in [
        vec!["solve", "--config", config, "--seed", "11"],
        vec!["sweep", "--config", config, "--seed", "11"],
        vec!["trade-cap", "--config", config, "--seed", "11", "--format", "json"],
        vec!["budget", "--config", config],
        vec!["verify", "--config", config, "--seed", "11"],
    ] {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let o = Command::new(env!("CARGO_BIN_EXE_capmarket"))
                .args(&args)
                .arg("--out")
                .arg(dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{} exited with {}: {}", args[0], o.status, String::from_utf8_lossy(&o.stderr)));
            }
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
                .map_err(|e| e.to_string())?
                .map(|e| {
                    let p = e.expect("entry").path();
                    (p.file_name().expect("name").to_string_lossy().into_owned(), std::fs::read(&p).expect("read"))
                })
                .collect();
            files.sort();
            let printed = String::from_utf8_lossy(&o.stdout).replace(dir.path().to_str().ok_or("path")?, "OUT");
            runs.push((files, printed));
        }
        if runs[0] != runs[1] || runs[0].0.is_empty() {
            return Err(format!("{} artifacts differ between runs", args[0]));
        }
        checked.push(format!("{} ({} files)", args[0], runs[0].0.len()));
    }
    Ok(format!("byte-identical artifacts for {}", checked.join(", ")))
}

fn inverse_normal_cdf() -> Outcome {
    let n = 2001;
    let (lo, hi) = (1e-6f64.ln(), (0.5f64).ln());
    let mut worst = 0.0f64;
    for k in 0..n {
        let p = (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp();
        for q in [p, 1.0 - p] {
            if !(q > 1e-6 && q < 1.0 - 1e-6) {
                continue;
            }
            let x = inv_norm_cdf(q).map_err(|e| e.to_string())?;
            worst = worst.max((norm_cdf(x) - q).abs());
        }
    }
    let line = format!("max |Phi(Phi^-1(p)) - p| = {worst:.2e} on {} log-spaced points per tail", n);
    if worst <= CDF_TOL {
        Ok(line)
    } else {
        Err(line)
    }
}

fn main() -> ExitCode {
    let mut residuals = Vec::new();
    let oracle = oracle_equivalence(&mut residuals);
    let results: Vec<(&str, Outcome)> = vec![
        ("oracle-equivalence", oracle),
        ("complementarity-residual", complementarity_residual(&residuals)),
        ("chance-constraint", chance_constraint()),
        ("budget-arithmetic", budget_arithmetic()),
        ("directional-sweep", directional_sweep()),
        ("stochastic-collapse", stochastic_collapse()),
        ("trade-cap", trade_cap()),
        ("determinism", determinism()),
        ("inverse-normal-cdf", inverse_normal_cdf()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
