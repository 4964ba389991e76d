//! The equilibrium as a mixed complementarity problem `F(z) ⊥ z`.
//!
//! Rows are the first-order conditions of every producer problem and of the
//! auctioneer, plus the four market-clearing equations. All objectives are
//! quadratic and all constraints linear, so `F(z) = M z + c` with a constant
//! sparse `M`. Clearing rows are multiplied by positive weights (`Pr(w)` and
//! the discount factor) so that the off-diagonal part of `M` is skew
//! symmetric; the weights are undone when residuals are reported.

mod check;
mod dump;
mod index;
mod solution;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use check::{check_solution, BindingConstraint, RowError, SolutionCheck};
pub use dump::dump_system;
pub use index::{Var, VarKind, VariableIndex};
pub use solution::{pack, unpack};

use crate::error::{Error, Result};
use crate::model::{validate_instance, MarketInstance, TradeCapForm};
use crate::sparse::SparseMatrix;
use crate::units::UnitSystem;

/// Which transcription of the first-stage build condition to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transcription {
    /// Exact derivatives of the producer Lagrangian.
    #[default]
    Exact,
    /// First-stage build stationarity with capacity multipliers entering
    /// unweighted by `CF * tau`, as the condition is commonly printed.
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub units: UnitSystem,
    pub transcription: Transcription,
}

/// An assembled, immutable complementarity system.
#[derive(Debug, Clone)]
pub struct ComplementaritySystem {
    pub index: VariableIndex,
    pub kinds: Vec<VarKind>,
    /// Constant Jacobian `M`.
    pub jacobian: SparseMatrix,
    /// Constant term `c` of `F(z) = M z + c`.
    pub constant: Vec<f64>,
    /// Positive weight applied to each row; residuals are reported as `F_j / w_j`.
    pub row_weight: Vec<f64>,
    /// Natural-unit value of one system unit of each variable.
    pub var_scale: Vec<f64>,
    pub options: AssembleOptions,
    pub instance: Arc<MarketInstance>,
}

impl ComplementaritySystem {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn units(&self) -> UnitSystem {
        self.options.units
    }

    pub fn position(&self, var: Var) -> usize {
        self.index.position(var)
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: z.len(),
            });
        }
        Ok(())
    }

    /// `F(z)` exactly as assembled (clearing rows weighted).
    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        Ok(self.evaluate_unchecked(z))
    }

    pub(crate) fn evaluate_unchecked(&self, z: &[f64]) -> Vec<f64> {
        let mut f = self.jacobian.mul_vec(z);
        for (fj, cj) in f.iter_mut().zip(&self.constant) {
            *fj += cj;
        }
        f
    }

    /// `F(z)` with row weights removed, in the system's units.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.evaluate(z)?;
        for (fj, w) in f.iter_mut().zip(&self.row_weight) {
            *fj /= w;
        }
        Ok(f)
    }

    /// Per-row complementarity error: `|min(z_j, F_j)|` for nonnegative pairs
    /// and `|F_j|` for free rows.
    pub fn complementarity_errors(&self, z: &[f64]) -> Result<Vec<f64>> {
        let f = self.residual(z)?;
        Ok(self.errors_from(z, &f))
    }

    pub(crate) fn errors_from(&self, z: &[f64], residual: &[f64]) -> Vec<f64> {
        self.kinds
            .iter()
            .zip(z.iter().zip(residual))
            .map(|(kind, (&zj, &fj))| match kind {
                VarKind::Nonneg => zj.min(fj).abs(),
                VarKind::Free => fj.abs(),
            })
            .collect()
    }

    pub fn max_error(&self, z: &[f64]) -> Result<f64> {
        Ok(self
            .complementarity_errors(z)?
            .into_iter()
            .fold(0.0, f64::max))
    }

    /// Reads variable `var` from `z` in natural units.
    pub fn natural(&self, z: &[f64], var: Var) -> f64 {
        let j = self.position(var);
        z[j] * self.var_scale[j]
    }

    /// Writes a natural-unit value of `var` into `z`.
    pub fn set_natural(&self, z: &mut [f64], var: Var, value: f64) {
        let j = self.position(var);
        z[j] = value / self.var_scale[j];
    }
}

/// Assembles the complementarity system of `instance` in natural units.
pub fn assemble(instance: &MarketInstance) -> Result<ComplementaritySystem> {
    assemble_with(instance, AssembleOptions::default())
}

pub fn assemble_with(
    instance: &MarketInstance,
    options: AssembleOptions,
) -> Result<ComplementaritySystem> {
    validate_instance(instance).into_result()?;
    let n = instance.n_tech();
    let horizon = instance.horizon;
    let k = instance.n_scenarios();
    let capped: Vec<usize> = (0..n).filter(|&i| instance.trade_cap_of(i).is_some()).collect();
    let index = VariableIndex::new(n, horizon, k, capped.clone());
    let dim = index.len();

    let u = options.units;
    let tau = instance.hours_per_year;
    let bound = instance.policy.cap_bound()? / u.emissions();
    let scc = instance.policy.scc / u.emission_price();

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut constant = vec![0.0; dim];
    let mut row_weight = vec![1.0; dim];
    let mut var_scale = vec![1.0; dim];
    let pos = |v: Var| index.position(v);

    for (i, tech) in instance.technologies.iter().enumerate() {
        let a = tech.linear_cost / u.energy_price();
        let b = tech.quadratic_cost * u.energy() * u.energy() / u.money();
        let capex = tech.capex / u.capacity_price();
        // energy units per capacity unit
        let yield_ = tech.energy_per_mw(tau) * u.capacity() / u.energy();
        let installed = tech.installed_capacity / u.capacity();
        let potential = tech.resource_potential / u.capacity();
        let eps = tech.emission_factor * u.energy() / u.emissions();
        let rho = instance.trade_cap_of(i);

        let x0 = pos(Var::Build0 { tech: i });
        let q0 = pos(Var::Output0 { tech: i });
        let allow = pos(Var::Allowance { tech: i });
        let kappa = pos(Var::FirstStageCapacityDual { tech: i });
        let pi0 = pos(Var::DemandPrice0);
        let pi_a = pos(Var::AllowancePrice);

        var_scale[x0] = u.capacity();
        var_scale[q0] = u.energy();
        var_scale[allow] = u.emissions();
        var_scale[kappa] = u.energy_price();

        // first-stage build: I + sum psi - CF tau sum alpha
        constant[x0] = capex;
        let alpha_weight = match options.transcription {
            Transcription::Exact => yield_,
            Transcription::Appendix => 1.0,
        };
        for w in 0..k {
            trip.push((x0, pos(Var::ResourceDual { tech: i, scenario: w }), 1.0));
            for t in 1..=horizon {
                let alpha = pos(Var::CapacityDual { tech: i, t, scenario: w });
                trip.push((x0, alpha, -alpha_weight));
            }
        }

        // first-stage output: a + b Q0 - pi0 + kappa + eps sum gamma
        constant[q0] = a;
        trip.push((q0, q0, b));
        trip.push((q0, pi0, -1.0));
        trip.push((q0, kappa, 1.0));
        for w in 0..k {
            trip.push((q0, pos(Var::EmissionDual { tech: i, scenario: w }), eps));
            if rho.is_some() && instance.policy.trade_cap_form == TradeCapForm::Emission {
                trip.push((q0, pos(Var::TradeCapDual { tech: i, scenario: w }), eps));
            }
        }

        // kappa: CF tau Qbar - Q0
        constant[kappa] = yield_ * installed;
        trip.push((kappa, q0, -1.0));

        // allowance: pi_a - sum beta - sum gamma - rho sum nu
        trip.push((allow, pi_a, 1.0));
        for w in 0..k {
            trip.push((allow, pos(Var::SaleLimitDual { tech: i, scenario: w }), -1.0));
            trip.push((allow, pos(Var::EmissionDual { tech: i, scenario: w }), -1.0));
            if let Some(rho) = rho {
                trip.push((allow, pos(Var::TradeCapDual { tech: i, scenario: w }), -rho));
            }
        }

        for w in 0..k {
            let prob = instance.scenarios.probabilities[w];
            let psi = pos(Var::ResourceDual { tech: i, scenario: w });
            let beta = pos(Var::SaleLimitDual { tech: i, scenario: w });
            let gamma = pos(Var::EmissionDual { tech: i, scenario: w });
            let buy = pos(Var::Purchase { tech: i, scenario: w });
            let sell = pos(Var::Sale { tech: i, scenario: w });
            let pi_v = pos(Var::TradePrice { scenario: w });
            var_scale[psi] = u.capacity_price();
            var_scale[beta] = u.emission_price();
            var_scale[gamma] = u.emission_price();
            var_scale[buy] = u.emissions();
            var_scale[sell] = u.emissions();

            // purchase: Pr pi_v - gamma (+ nu)
            trip.push((buy, pi_v, prob));
            trip.push((buy, gamma, -1.0));
            // sale: -Pr pi_v + beta + gamma
            trip.push((sell, pi_v, -prob));
            trip.push((sell, beta, 1.0));
            trip.push((sell, gamma, 1.0));

            // psi: RP - Qbar - x0 - sum_t x
            constant[psi] = potential - installed;
            trip.push((psi, x0, -1.0));
            // beta: A - V
            trip.push((beta, allow, 1.0));
            trip.push((beta, sell, -1.0));
            // gamma: A + P - V - eps (Q0 + sum_t Q)
            trip.push((gamma, allow, 1.0));
            trip.push((gamma, buy, 1.0));
            trip.push((gamma, sell, -1.0));
            trip.push((gamma, q0, -eps));

            if let Some(rho) = rho {
                let nu = pos(Var::TradeCapDual { tech: i, scenario: w });
                var_scale[nu] = u.emission_price();
                trip.push((nu, allow, rho));
                match instance.policy.trade_cap_form {
                    TradeCapForm::Purchase => {
                        trip.push((nu, buy, -1.0));
                        trip.push((buy, nu, 1.0));
                    }
                    TradeCapForm::Emission => {
                        trip.push((nu, q0, -eps));
                    }
                }
            }

            for t in 1..=horizon {
                let disc = prob * instance.discount_factor(t);
                let x = pos(Var::Build { tech: i, t, scenario: w });
                let q = pos(Var::Output { tech: i, t, scenario: w });
                let alpha = pos(Var::CapacityDual { tech: i, t, scenario: w });
                let pi = pos(Var::DemandPrice { t, scenario: w });
                var_scale[x] = u.capacity();
                var_scale[q] = u.energy();
                var_scale[alpha] = u.energy_price();

                // build: Pr d TCR I - CF tau sum_{later t''} alpha + psi
                constant[x] = disc * tech.capex_multiplier(t) * capex;
                trip.push((x, psi, 1.0));
                for later in (t + 1)..=horizon {
                    if tech.build_available(t, later) {
                        let a_later = pos(Var::CapacityDual { tech: i, t: later, scenario: w });
                        trip.push((x, a_later, -yield_));
                        trip.push((a_later, x, yield_));
                    }
                }
                trip.push((psi, x, -1.0));

                // output: Pr d (TC (a + b Q) - pi) + alpha + eps gamma
                let tc = tech.op_cost_multiplier(t);
                constant[q] = disc * tc * a;
                trip.push((q, q, disc * tc * b));
                trip.push((q, pi, -disc));
                trip.push((q, alpha, 1.0));
                trip.push((q, gamma, eps));
                trip.push((gamma, q, -eps));
                if rho.is_some() && instance.policy.trade_cap_form == TradeCapForm::Emission {
                    let nu = pos(Var::TradeCapDual { tech: i, scenario: w });
                    trip.push((q, nu, eps));
                    trip.push((nu, q, -eps));
                }

                // alpha: CF tau (Qbar + x0 + lagged builds) - Q
                constant[alpha] = yield_ * installed;
                trip.push((alpha, x0, yield_));
                trip.push((alpha, q, -1.0));
            }
        }
    }

    // Clearing rows.
    let pi0 = pos(Var::DemandPrice0);
    var_scale[pi0] = u.energy_price();
    constant[pi0] = -instance.scenarios.first_stage_demand / u.energy();
    for i in 0..n {
        trip.push((pi0, pos(Var::Output0 { tech: i }), 1.0));
    }
    for w in 0..k {
        let prob = instance.scenarios.probabilities[w];
        for t in 1..=horizon {
            let disc = prob * instance.discount_factor(t);
            let pi = pos(Var::DemandPrice { t, scenario: w });
            var_scale[pi] = u.energy_price();
            row_weight[pi] = disc;
            constant[pi] = -disc * instance.scenarios.demand_at(t, w) / u.energy();
            for i in 0..n {
                trip.push((pi, pos(Var::Output { tech: i, t, scenario: w }), disc));
            }
        }
        let pi_v = pos(Var::TradePrice { scenario: w });
        var_scale[pi_v] = u.emission_price();
        row_weight[pi_v] = prob;
        for i in 0..n {
            trip.push((pi_v, pos(Var::Sale { tech: i, scenario: w }), prob));
            trip.push((pi_v, pos(Var::Purchase { tech: i, scenario: w }), -prob));
        }
    }

    let pi_a = pos(Var::AllowancePrice);
    let theta = pos(Var::Issued);
    let eta = pos(Var::IssueBoundDual);
    var_scale[pi_a] = u.emission_price();
    var_scale[theta] = u.emissions();
    var_scale[eta] = u.emission_price();
    // theta - sum A
    trip.push((pi_a, theta, 1.0));
    for i in 0..n {
        trip.push((pi_a, pos(Var::Allowance { tech: i }), -1.0));
    }
    // auctioneer: -pi_a + scc + eta
    constant[theta] = scc;
    trip.push((theta, pi_a, -1.0));
    trip.push((theta, eta, 1.0));
    // bound - theta
    constant[eta] = bound;
    trip.push((eta, theta, -1.0));

    let kinds = index.iter().map(Var::kind).collect();
    Ok(ComplementaritySystem {
        jacobian: SparseMatrix::from_triplets(dim, dim, &trip),
        index,
        kinds,
        constant,
        row_weight,
        var_scale,
        options,
        instance: Arc::new(instance.clone()),
    })
}
