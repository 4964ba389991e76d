use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::initial::{initial_iterate, minimum_emissions};
use super::lu::NewtonMatrix;
use super::{NonConvergence, SolverOptions, TraceRecord};
use crate::error::{Error, Result};
use crate::mcp::{check_solution, unpack, ComplementaritySystem, Var, VarKind};
use crate::model::{EquilibriumSolution, SolverStats};
use crate::units::{power_of_ten, InstanceScale};
use crate::sparse::SparseMatrix;

const MU_MAX: f64 = 1e-6;
const MU_MIN: f64 = 1e-12;
/// Initial smoothing relative to the starting residual.
const TAU_SHARE: f64 = 0.1;
const TAU_DECREASE: f64 = 0.2;
/// Below this (relative) level smoothing is switched off.
const TAU_FLOOR: f64 = 1e-12;
/// Iterations after which a smoothing level is abandoned even if its
/// smoothed system has no zero.
const STAGE_ITERATIONS: usize = 10;
const DESCENT_RHO: f64 = 1e-12;
const DESCENT_POWER: f64 = 2.1;
const MIN_STEP: f64 = 1e-12;
/// Iterations without a new best error before a phase counts as stalled.
const PATIENCE: usize = 25;
const EQUILIBRATION_PASSES: usize = 20;
const WORST_ROWS: usize = 10;

/// Typical magnitude of every variable in system units, from the instance's
/// physical scales. Scaling `z = D y` with these keeps `y` of order one.
fn magnitudes(sys: &ComplementaritySystem) -> Vec<f64> {
    let u = InstanceScale::for_instance(&sys.instance);
    let permit_price = power_of_ten(sys.instance.policy.scc.max(1.0));
    sys.index
        .iter()
        .zip(&sys.var_scale)
        .map(|(var, unit)| {
            let m = match var {
                Var::Build0 { .. } | Var::Build { .. } => u.capacity(),
                Var::Output0 { .. } | Var::Output { .. } => u.energy(),
                Var::Allowance { .. } | Var::Purchase { .. } | Var::Sale { .. } | Var::Issued => {
                    u.emissions()
                }
                Var::CapacityDual { .. }
                | Var::FirstStageCapacityDual { .. }
                | Var::DemandPrice0
                | Var::DemandPrice { .. } => u.energy_price(),
                Var::ResourceDual { .. } => u.capacity_price(),
                Var::SaleLimitDual { .. }
                | Var::EmissionDual { .. }
                | Var::TradeCapDual { .. }
                | Var::IssueBoundDual
                | Var::AllowancePrice
                | Var::TradePrice { .. } => permit_price,
            };
            m / unit
        })
        .collect()
}

/// Symmetric Ruiz passes on `D M D` starting from `d`.
fn equilibrate(m: &SparseMatrix, mut d: Vec<f64>) -> Vec<f64> {
    let n = m.n_rows;
    for _ in 0..EQUILIBRATION_PASSES {
        let mut peak = vec![0.0f64; n];
        for (r, c, v) in m.triplets() {
            let a = (d[r] * v * d[c]).abs();
            peak[r] = peak[r].max(a);
            peak[c] = peak[c].max(a);
        }
        for j in 0..n {
            if peak[j] > 0.0 {
                d[j] /= peak[j].sqrt();
            }
        }
    }
    d
}

struct FbEval {
    phi: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
    merit: f64,
    error: f64,
}

/// Iterates live in scaled coordinates `y` with `z = D y`.
struct Solver<'a> {
    sys: &'a ComplementaritySystem,
    opts: &'a SolverOptions,
    scale: Vec<f64>,
    /// `F = gain * F_scaled / scale`.
    gain: f64,
    m: SparseMatrix,
    c: Vec<f64>,
    newton: NewtonMatrix,
    /// Best point seen, original coordinates.
    best: Vec<f64>,
    best_error: f64,
    history: Vec<f64>,
    iterations: usize,
    phases: usize,
    trace: Option<&'a mut Vec<TraceRecord>>,
}


impl<'a> Solver<'a> {
    fn new(
        sys: &'a ComplementaritySystem,
        opts: &'a SolverOptions,
        trace: Option<&'a mut Vec<TraceRecord>>,
    ) -> Result<Self> {
        // Symmetric scaling plus one global factor keeps the system monotone.
        let scale = equilibrate(&sys.jacobian, magnitudes(sys));
        let mut trips: Vec<(usize, usize, f64)> = sys
            .jacobian
            .triplets()
            .map(|(r, c, v)| (r, c, scale[r] * v * scale[c]))
            .collect();
        let gain = trips.iter().fold(0.0f64, |m, t| m.max(t.2.abs())).max(f64::MIN_POSITIVE);
        for t in trips.iter_mut() {
            t.2 /= gain;
        }
        let m = SparseMatrix::from_triplets(sys.len(), sys.len(), &trips);
        let c = sys
            .constant
            .iter()
            .zip(&scale)
            .map(|(q, d)| q * d / gain)
            .collect();
        Ok(Self {
            sys,
            opts,
            newton: NewtonMatrix::new(&m)?,
            m,
            c,
            best: vec![0.0; sys.len()],
            best_error: f64::INFINITY,
            history: Vec::new(),
            iterations: 0,
            phases: 0,
            trace,
            scale,
            gain,
        })
    }

    fn to_z(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(v, d)| v * d).collect()
    }

    fn to_y(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(v, d)| v / d).collect()
    }

    fn scaled_f(&self, y: &[f64]) -> Vec<f64> {
        let mut f = self.m.mul_vec(y);
        for (fj, cj) in f.iter_mut().zip(&self.c) {
            *fj += cj;
        }
        f
    }

    /// Max complementarity error in the system's units, from scaled `y` and `F`.
    fn error(&self, y: &[f64], f: &[f64]) -> f64 {
        let z = self.to_z(y);
        let natural: Vec<f64> = f
            .iter()
            .zip(self.scale.iter().zip(&self.sys.row_weight))
            .map(|(fj, (d, w))| fj * self.gain / d / w)
            .collect();
        self.sys
            .errors_from(&z, &natural)
            .into_iter()
            .fold(0.0, |m, e| if e.is_nan() { f64::INFINITY } else { m.max(e) })
    }

    /// Smoothed Fischer–Burmeister residual `a + b - sqrt(a² + b² + 2τ²)`
    /// with its Jacobian coefficients; `tau = 0` is the plain function.
    fn eval(&self, y: &[f64], tau: f64) -> FbEval {
        let f = self.scaled_f(y);
        let n = y.len();
        let mut phi = vec![0.0; n];
        let mut da = vec![0.0; n];
        let mut db = vec![0.0; n];
        let corner = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let t2 = 2.0 * tau * tau;
        for j in 0..n {
            let fj = f[j];
            match self.sys.kinds[j] {
                VarKind::Free => {
                    phi[j] = fj;
                    db[j] = 1.0;
                }
                VarKind::Nonneg => {
                    let r = (y[j] * y[j] + fj * fj + t2).sqrt();
                    phi[j] = y[j] + fj - r;
                    if r > 0.0 {
                        da[j] = 1.0 - y[j] / r;
                        db[j] = 1.0 - fj / r;
                    } else {
                        da[j] = corner;
                        db[j] = corner;
                    }
                }
            }
        }
        let merit = 0.5 * phi.iter().map(|p| p * p).sum::<f64>();
        let error = self.error(y, &f);
        FbEval {
            phi,
            da,
            db,
            merit,
            error,
        }
    }

    fn phi_norm(&self, y: &[f64]) -> f64 {
        self.eval(y, 0.0).phi.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    fn record(&mut self, y: &[f64], error: f64) {
        if error < self.best_error {
            self.best_error = error;
            self.best = self.to_z(y);
        }
    }

    /// Damped semismooth Newton steps along a shrinking smoothing path.
    /// Returns whether `y` converged.
    fn newton_phase(&mut self, y: &mut Vec<f64>, budget: usize) -> Result<bool> {
        let phase = self.phases;
        self.phases += 1;
        let mut since_best = 0;
        let mut tau = TAU_SHARE * self.phi_norm(y);
        let tau_floor = TAU_FLOOR * tau.max(1.0);
        let mut stage = 0;
        for _ in 0..budget {
            let ev = self.eval(y, tau);
            let before = self.best_error;
            self.record(y, ev.error);
            if ev.error <= self.opts.tol {
                return Ok(true);
            }
            if ev.error < before {
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= PATIENCE {
                    return Ok(false);
                }
            }
            let phi_inf = ev.phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
            if tau > 0.0 && (phi_inf <= tau || stage >= STAGE_ITERATIONS) {
                tau = (TAU_DECREASE * tau).min(phi_inf * phi_inf);
                if tau < tau_floor {
                    tau = 0.0;
                }
                stage = 0;
                continue;
            }
            stage += 1;

            let grad = {
                let weighted: Vec<f64> = ev.db.iter().zip(&ev.phi).map(|(b, p)| b * p).collect();
                let mut g = self.m.mul_transpose_vec(&weighted);
                for j in 0..g.len() {
                    g[j] += ev.da[j] * ev.phi[j];
                }
                g
            };

            let neg_phi: Vec<f64> = ev.phi.iter().map(|p| -p).collect();
            let mut mu = phi_inf.clamp(MU_MIN, MU_MAX);
            let mut direction = None;
            for _ in 0..4 {
                match self
                    .newton
                    .factor(&ev.da, &ev.db, mu)
                    .and_then(|lu| lu.solve(&neg_phi))
                {
                    Ok(d) => {
                        direction = Some(d);
                        break;
                    }
                    Err(_) => mu *= 100.0,
                }
            }

            let mut d = match direction {
                Some(d) => d,
                None => grad.iter().map(|g| -g).collect(),
            };
            let mut slope: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(slope <= -DESCENT_RHO * dnorm.powf(DESCENT_POWER)) {
                d = grad.iter().map(|g| -g).collect();
                slope = -grad.iter().map(|g| g * g).sum::<f64>();
            }

            let mut step = 1.0;
            let mut trial = y.clone();
            let accepted = loop {
                for j in 0..y.len() {
                    trial[j] = y[j] + step * d[j];
                }
                if self.eval(&trial, tau).merit <= ev.merit + self.opts.sigma * step * slope {
                    break true;
                }
                step *= self.opts.backtracking;
                if step < MIN_STEP {
                    break false;
                }
            };
            if !accepted {
                return Ok(false);
            }
            std::mem::swap(y, &mut trial);
            self.iterations += 1;
            let f = self.scaled_f(y);
            let err = self.error(y, &f);
            self.history.push(err);
            if self.trace.is_some() {
                let rec = TraceRecord {
                    iteration: self.iterations,
                    phase,
                    merit: self.eval(y, tau).merit,
                    smoothing: tau,
                    step,
                    residual: err,
                };
                if let Some(trace) = self.trace.as_deref_mut() {
                    trace.push(rec);
                }
            }
        }
        let f = self.scaled_f(y);
        let err = self.error(y, &f);
        self.record(y, err);
        Ok(err <= self.opts.tol)
    }

    /// Projected Gauss–Seidel sweeps with a proximal term on every row.
    /// Entries of the scaled matrix are at most one, so a unit proximal
    /// weight damps the free price rows, whose diagonal is zero.
    fn pgs(&self, y: &mut [f64]) {
        let prox = 1.0;
        let start = y.to_vec();
        for _ in 0..self.opts.fallback_sweeps {
            for j in 0..y.len() {
                let fj = self.m.row_dot(j, y) + self.c[j];
                let diag = self.m.get(j, j).max(0.0) + prox;
                let next = y[j] - fj / diag;
                y[j] = match self.sys.kinds[j] {
                    VarKind::Free => next,
                    VarKind::Nonneg => next.max(0.0),
                };
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            y.copy_from_slice(&start);
        }
    }

    /// Sets tiny nonnegative components to exactly zero where that keeps
    /// the point within tolerance. Works in original coordinates.
    fn snap(&self, z: &mut [f64]) {
        let tol = self.opts.tol;
        let f = self.sys.evaluate_unchecked(z);
        let mut snapped = z.to_vec();
        let mut changed = false;
        for j in 0..z.len() {
            if self.sys.kinds[j] == VarKind::Nonneg
                && z[j] != 0.0
                && z[j].abs() <= tol
                && f[j] / self.sys.row_weight[j] >= -tol
            {
                snapped[j] = 0.0;
                changed = true;
            }
        }
        if changed && self.sys.max_error(&snapped).is_ok_and(|e| e <= tol) {
            z.copy_from_slice(&snapped);
        }
    }

    fn perturb(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.to_y(&self.best)
            .iter()
            .zip(&self.sys.kinds)
            .map(|(&v, kind)| {
                let u: f64 = rng.gen_range(-1.0..1.0);
                let next = v * (1.0 + 0.2 * u);
                match kind {
                    VarKind::Free => next,
                    VarKind::Nonneg => next.max(0.0),
                }
            })
            .collect()
    }

    fn failure(&self, diagnosis: String) -> Error {
        let report = check_solution(self.sys, &self.best, self.opts.tol);
        let mut worst = report.violated;
        worst.sort_by(|a, b| b.error.total_cmp(&a.error).then(a.position.cmp(&b.position)));
        worst.truncate(WORST_ROWS);
        Error::NonConvergence(Box::new(NonConvergence {
            iterations: self.iterations,
            best_error: self.best_error,
            best_iterate: self.best.clone(),
            residual_history: self.history.clone(),
            worst_rows: worst,
            diagnosis,
        }))
    }
}

/// Names the emission-balance rows when no dispatch can stay under the
/// issue bound.
fn infeasible_cap(sys: &ComplementaritySystem) -> Option<String> {
    let inst = &*sys.instance;
    let bound = inst.policy.cap_bound().ok()?;
    let needed = minimum_emissions(inst);
    let short: Vec<usize> = (0..needed.len())
        .filter(|&w| needed[w] > bound + 1e-9 * (1.0 + bound.abs()))
        .collect();
    if short.is_empty() {
        return None;
    }
    let rows: Vec<String> = short
        .iter()
        .flat_map(|&w| {
            (0..inst.n_tech())
                .filter(|&i| inst.technologies[i].emission_factor > 0.0)
                .map(move |i| Var::EmissionDual { tech: i, scenario: w }.to_string())
        })
        .collect();
    let w = short[0];
    Some(format!(
        "carbon cap infeasible: scenario {} needs at least {:.6e} tCO2e but at most {:.6e} may be issued; \
         emission-balance rows cannot all hold: {}",
        inst.scenarios.names.get(w).map_or("?", String::as_str),
        needed[w],
        bound,
        rows.join(", ")
    ))
}

/// Solves the complementarity system, optionally from a warm start.
pub fn solve_mcp(
    sys: &ComplementaritySystem,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<EquilibriumSolution> {
    run(sys, opts, warm_start, None)
}

/// As [`solve_mcp`], appending one record per accepted iteration to `trace`.
pub fn solve_mcp_traced(
    sys: &ComplementaritySystem,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
    trace: &mut Vec<TraceRecord>,
) -> Result<EquilibriumSolution> {
    run(sys, opts, warm_start, Some(trace))
}

fn run<'a>(
    sys: &'a ComplementaritySystem,
    opts: &'a SolverOptions,
    warm_start: Option<&[f64]>,
    trace: Option<&'a mut Vec<TraceRecord>>,
) -> Result<EquilibriumSolution> {
    opts.validate().map_err(Error::InvalidOptions)?;
    let started = Instant::now();
    let mut z = match warm_start {
        Some(w) if w.len() != sys.len() => {
            return Err(Error::DimensionMismatch {
                expected: sys.len(),
                actual: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => initial_iterate(sys),
    };
    for (zj, kind) in z.iter_mut().zip(&sys.kinds) {
        if *kind == VarKind::Nonneg && *zj < 0.0 {
            *zj = 0.0;
        }
    }

    let mut solver = Solver::new(sys, opts, trace)?;
    solver.best = z.clone();

    if let Some(diagnosis) = infeasible_cap(sys) {
        solver.best_error = sys.max_error(&z)?;
        return Err(solver.failure(diagnosis));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut method = "newton".to_string();
    let mut y = solver.to_y(&z);
    let mut converged = solver.newton_phase(&mut y, opts.max_iter)?;
    let mut attempt = 0;
    while !converged {
        y = solver.to_y(&solver.best);
        solver.pgs(&mut y);
        method = if attempt == 0 {
            "newton+pgs".into()
        } else {
            format!("newton+restart{attempt}+pgs")
        };
        converged = solver.newton_phase(&mut y, opts.max_iter)?;
        if converged {
            break;
        }
        attempt += 1;
        if attempt > opts.restarts {
            return Err(solver.failure(format!(
                "stalled after projected Gauss-Seidel polishing and {} restarts",
                opts.restarts
            )));
        }
        y = solver.perturb(&mut rng);
        converged = solver.newton_phase(&mut y, opts.max_iter)?;
        method = format!("newton+restart{attempt}");
    }

    let mut z = solver.to_z(&y);
    solver.snap(&mut z);
    let stats = SolverStats {
        method,
        iterations: solver.iterations,
        wall_time: started.elapsed(),
    };
    unpack(sys, &z, stats)
}
