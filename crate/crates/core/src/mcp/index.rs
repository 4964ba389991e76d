//! Variable catalog of the complementarity system.
//!
//! Every variable `z_j` is paired with row `j` of `F`. Producer blocks come
//! first (one contiguous block per technology), followed by prices, the
//! auctioneer and the optional trade-cap multipliers. Years `t` are 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    /// `x_i(0)`
    Build0 { tech: usize },
    /// `x_i(t, w)`
    Build { tech: usize, t: usize, scenario: usize },
    /// `Q_i(0)`
    Output0 { tech: usize },
    /// `Q_i(t, w)`
    Output { tech: usize, t: usize, scenario: usize },
    /// `A_i`
    Allowance { tech: usize },
    /// `P_i(w)`
    Purchase { tech: usize, scenario: usize },
    /// `V_i(w)`
    Sale { tech: usize, scenario: usize },
    /// `alpha_{i,w,t}`
    CapacityDual { tech: usize, t: usize, scenario: usize },
    /// `kappa_i`
    FirstStageCapacityDual { tech: usize },
    /// `psi_{i,w}`
    ResourceDual { tech: usize, scenario: usize },
    /// `beta_{i,w}`
    SaleLimitDual { tech: usize, scenario: usize },
    /// `gamma_{i,w}`
    EmissionDual { tech: usize, scenario: usize },
    /// `pi^d(0)`
    DemandPrice0,
    /// `pi^d(t, w)`
    DemandPrice { t: usize, scenario: usize },
    /// `pi^a`
    AllowancePrice,
    /// `pi^v(w)`
    TradePrice { scenario: usize },
    /// `theta`
    Issued,
    /// `eta`
    IssueBoundDual,
    /// Multiplier of a trade-cap row of a capped technology.
    TradeCapDual { tech: usize, scenario: usize },
}

/// How a variable is paired with its row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    /// `0 <= F_j(z) ⊥ z_j >= 0`
    Nonneg,
    /// `F_j(z) = 0`, `z_j` free
    Free,
}

impl Var {
    pub fn kind(self) -> VarKind {
        match self {
            Var::DemandPrice0
            | Var::DemandPrice { .. }
            | Var::AllowancePrice
            | Var::TradePrice { .. } => VarKind::Free,
            _ => VarKind::Nonneg,
        }
    }

    /// Short name of the row paired with this variable.
    pub fn row_role(self) -> &'static str {
        match self {
            Var::Build0 { .. } => "stationarity:first-stage-build",
            Var::Build { .. } => "stationarity:build",
            Var::Output0 { .. } => "stationarity:first-stage-output",
            Var::Output { .. } => "stationarity:output",
            Var::Allowance { .. } => "stationarity:allowance",
            Var::Purchase { .. } => "stationarity:purchase",
            Var::Sale { .. } => "stationarity:sale",
            Var::CapacityDual { .. } => "constraint:capacity",
            Var::FirstStageCapacityDual { .. } => "constraint:first-stage-capacity",
            Var::ResourceDual { .. } => "constraint:resource-potential",
            Var::SaleLimitDual { .. } => "constraint:sale-limit",
            Var::EmissionDual { .. } => "constraint:emission-balance",
            Var::DemandPrice0 => "clearing:first-stage-demand",
            Var::DemandPrice { .. } => "clearing:demand",
            Var::AllowancePrice => "clearing:allowances",
            Var::TradePrice { .. } => "clearing:permit-trading",
            Var::Issued => "auctioneer:stationarity",
            Var::IssueBoundDual => "auctioneer:issue-bound",
            Var::TradeCapDual { .. } => "constraint:trade-cap",
        }
    }

    pub fn tech(self) -> Option<usize> {
        match self {
            Var::Build0 { tech }
            | Var::Build { tech, .. }
            | Var::Output0 { tech }
            | Var::Output { tech, .. }
            | Var::Allowance { tech }
            | Var::Purchase { tech, .. }
            | Var::Sale { tech, .. }
            | Var::CapacityDual { tech, .. }
            | Var::FirstStageCapacityDual { tech }
            | Var::ResourceDual { tech, .. }
            | Var::SaleLimitDual { tech, .. }
            | Var::EmissionDual { tech, .. }
            | Var::TradeCapDual { tech, .. } => Some(tech),
            _ => None,
        }
    }

    pub fn scenario(self) -> Option<usize> {
        match self {
            Var::Build { scenario, .. }
            | Var::Output { scenario, .. }
            | Var::Purchase { scenario, .. }
            | Var::Sale { scenario, .. }
            | Var::CapacityDual { scenario, .. }
            | Var::ResourceDual { scenario, .. }
            | Var::SaleLimitDual { scenario, .. }
            | Var::EmissionDual { scenario, .. }
            | Var::DemandPrice { scenario, .. }
            | Var::TradePrice { scenario }
            | Var::TradeCapDual { scenario, .. } => Some(scenario),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Build0 { tech } => write!(f, "x0[{tech}]"),
            Var::Build { tech, t, scenario } => write!(f, "x[{tech},{t},{scenario}]"),
            Var::Output0 { tech } => write!(f, "Q0[{tech}]"),
            Var::Output { tech, t, scenario } => write!(f, "Q[{tech},{t},{scenario}]"),
            Var::Allowance { tech } => write!(f, "A[{tech}]"),
            Var::Purchase { tech, scenario } => write!(f, "P[{tech},{scenario}]"),
            Var::Sale { tech, scenario } => write!(f, "V[{tech},{scenario}]"),
            Var::CapacityDual { tech, t, scenario } => write!(f, "alpha[{tech},{t},{scenario}]"),
            Var::FirstStageCapacityDual { tech } => write!(f, "kappa[{tech}]"),
            Var::ResourceDual { tech, scenario } => write!(f, "psi[{tech},{scenario}]"),
            Var::SaleLimitDual { tech, scenario } => write!(f, "beta[{tech},{scenario}]"),
            Var::EmissionDual { tech, scenario } => write!(f, "gamma[{tech},{scenario}]"),
            Var::DemandPrice0 => write!(f, "pi_d0"),
            Var::DemandPrice { t, scenario } => write!(f, "pi_d[{t},{scenario}]"),
            Var::AllowancePrice => write!(f, "pi_a"),
            Var::TradePrice { scenario } => write!(f, "pi_v[{scenario}]"),
            Var::Issued => write!(f, "theta"),
            Var::IssueBoundDual => write!(f, "eta"),
            Var::TradeCapDual { tech, scenario } => write!(f, "nu[{tech},{scenario}]"),
        }
    }
}

/// Bijection between positions in `z` and [`Var`]s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableIndex {
    n_tech: usize,
    horizon: usize,
    n_scenarios: usize,
    /// Technologies carrying trade-cap rows, ascending.
    capped: Vec<usize>,
}

// Offsets inside one producer block.
struct Layout {
    tk: usize,
    k: usize,
}

impl Layout {
    fn build(&self) -> usize {
        1
    }
    fn output0(&self) -> usize {
        1 + self.tk
    }
    fn output(&self) -> usize {
        2 + self.tk
    }
    fn allowance(&self) -> usize {
        2 + 2 * self.tk
    }
    fn purchase(&self) -> usize {
        3 + 2 * self.tk
    }
    fn sale(&self) -> usize {
        3 + 2 * self.tk + self.k
    }
    fn capacity(&self) -> usize {
        3 + 2 * self.tk + 2 * self.k
    }
    fn first_stage(&self) -> usize {
        3 + 3 * self.tk + 2 * self.k
    }
    fn resource(&self) -> usize {
        4 + 3 * self.tk + 2 * self.k
    }
    fn sale_limit(&self) -> usize {
        4 + 3 * self.tk + 3 * self.k
    }
    fn emission(&self) -> usize {
        4 + 3 * self.tk + 4 * self.k
    }
    fn size(&self) -> usize {
        4 + 3 * self.tk + 5 * self.k
    }
}

impl VariableIndex {
    pub fn new(n_tech: usize, horizon: usize, n_scenarios: usize, mut capped: Vec<usize>) -> Self {
        capped.sort_unstable();
        capped.dedup();
        Self {
            n_tech,
            horizon,
            n_scenarios,
            capped,
        }
    }

    fn layout(&self) -> Layout {
        Layout {
            tk: self.horizon * self.n_scenarios,
            k: self.n_scenarios,
        }
    }

    pub fn n_tech(&self) -> usize {
        self.n_tech
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn capped(&self) -> &[usize] {
        &self.capped
    }

    pub fn producer_block(&self) -> usize {
        self.layout().size()
    }

    fn globals_start(&self) -> usize {
        self.n_tech * self.producer_block()
    }

    pub fn len(&self) -> usize {
        let tk = self.horizon * self.n_scenarios;
        self.globals_start() + tk + self.n_scenarios + 4 + self.capped.len() * self.n_scenarios
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn ts(&self, t: usize, scenario: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.horizon && scenario < self.n_scenarios);
        (t - 1) * self.n_scenarios + scenario
    }

    /// Position of `var` in `z`.
    pub fn position(&self, var: Var) -> usize {
        let l = self.layout();
        let block = |tech: usize| {
            debug_assert!(tech < self.n_tech);
            tech * l.size()
        };
        let g = self.globals_start();
        let tk = l.tk;
        match var {
            Var::Build0 { tech } => block(tech),
            Var::Build { tech, t, scenario } => block(tech) + l.build() + self.ts(t, scenario),
            Var::Output0 { tech } => block(tech) + l.output0(),
            Var::Output { tech, t, scenario } => block(tech) + l.output() + self.ts(t, scenario),
            Var::Allowance { tech } => block(tech) + l.allowance(),
            Var::Purchase { tech, scenario } => block(tech) + l.purchase() + scenario,
            Var::Sale { tech, scenario } => block(tech) + l.sale() + scenario,
            Var::CapacityDual { tech, t, scenario } => {
                block(tech) + l.capacity() + self.ts(t, scenario)
            }
            Var::FirstStageCapacityDual { tech } => block(tech) + l.first_stage(),
            Var::ResourceDual { tech, scenario } => block(tech) + l.resource() + scenario,
            Var::SaleLimitDual { tech, scenario } => block(tech) + l.sale_limit() + scenario,
            Var::EmissionDual { tech, scenario } => block(tech) + l.emission() + scenario,
            Var::DemandPrice0 => g,
            Var::DemandPrice { t, scenario } => g + 1 + self.ts(t, scenario),
            Var::AllowancePrice => g + 1 + tk,
            Var::TradePrice { scenario } => g + 2 + tk + scenario,
            Var::Issued => g + 2 + tk + self.n_scenarios,
            Var::IssueBoundDual => g + 3 + tk + self.n_scenarios,
            Var::TradeCapDual { tech, scenario } => {
                let slot = self
                    .capped
                    .binary_search(&tech)
                    .expect("technology has no trade cap");
                g + 4 + tk + self.n_scenarios + slot * self.n_scenarios + scenario
            }
        }
    }

    /// Inverse of [`position`](Self::position).
    pub fn var(&self, j: usize) -> Var {
        assert!(j < self.len(), "position {j} out of range");
        let l = self.layout();
        let k = self.n_scenarios;
        let tk = l.tk;
        let split = |r: usize| (r / k + 1, r % k);
        let g = self.globals_start();
        if j < g {
            let tech = j / l.size();
            let r = j % l.size();
            return if r == 0 {
                Var::Build0 { tech }
            } else if r < l.output0() {
                let (t, scenario) = split(r - l.build());
                Var::Build { tech, t, scenario }
            } else if r == l.output0() {
                Var::Output0 { tech }
            } else if r < l.allowance() {
                let (t, scenario) = split(r - l.output());
                Var::Output { tech, t, scenario }
            } else if r == l.allowance() {
                Var::Allowance { tech }
            } else if r < l.sale() {
                Var::Purchase { tech, scenario: r - l.purchase() }
            } else if r < l.capacity() {
                Var::Sale { tech, scenario: r - l.sale() }
            } else if r < l.first_stage() {
                let (t, scenario) = split(r - l.capacity());
                Var::CapacityDual { tech, t, scenario }
            } else if r == l.first_stage() {
                Var::FirstStageCapacityDual { tech }
            } else if r < l.sale_limit() {
                Var::ResourceDual { tech, scenario: r - l.resource() }
            } else if r < l.emission() {
                Var::SaleLimitDual { tech, scenario: r - l.sale_limit() }
            } else {
                Var::EmissionDual { tech, scenario: r - l.emission() }
            };
        }
        let r = j - g;
        if r == 0 {
            Var::DemandPrice0
        } else if r < 1 + tk {
            let (t, scenario) = split(r - 1);
            Var::DemandPrice { t, scenario }
        } else if r == 1 + tk {
            Var::AllowancePrice
        } else if r < 2 + tk + k {
            Var::TradePrice { scenario: r - 2 - tk }
        } else if r == 2 + tk + k {
            Var::Issued
        } else if r == 3 + tk + k {
            Var::IssueBoundDual
        } else {
            let q = r - 4 - tk - k;
            Var::TradeCapDual {
                tech: self.capped[q / k],
                scenario: q % k,
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        (0..self.len()).map(move |j| self.var(j))
    }
}
