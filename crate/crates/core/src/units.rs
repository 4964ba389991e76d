//! Unit systems for assembled complementarity systems.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::MarketInstance;

/// Units in which a complementarity system is assembled and its residuals are
/// reported. Instances are always stored in MW, MWh, tCO2e and USD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    /// MW, MWh, tCO2e, USD.
    #[default]
    Natural,
    /// GW, TWh, MtCO2e, million USD. Energy and allowance prices keep their
    /// numerical values (MUSD/TWh = USD/MWh, MUSD/Mt = USD/t).
    Grid,
}

impl UnitSystem {
    /// MWh per energy unit.
    pub fn energy(self) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Grid => 1e6,
        }
    }

    /// MW per capacity unit.
    pub fn capacity(self) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Grid => 1e3,
        }
    }

    /// tCO2e per emissions unit.
    pub fn emissions(self) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Grid => 1e6,
        }
    }

    /// USD per money unit.
    pub fn money(self) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Grid => 1e6,
        }
    }

    pub fn energy_price(self) -> f64 {
        self.money() / self.energy()
    }

    pub fn capacity_price(self) -> f64 {
        self.money() / self.capacity()
    }

    pub fn emission_price(self) -> f64 {
        self.money() / self.emissions()
    }
}

impl fmt::Display for UnitSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Natural => write!(f, "natural (MW, MWh, tCO2e, USD)"),
            Self::Grid => write!(f, "grid (GW, TWh, MtCO2e, MUSD)"),
        }
    }
}

/// Working units chosen from an instance so that quantities, costs and prices
/// are all of moderate size.
#[derive(Debug, Clone, Copy)]
pub(crate) struct InstanceScale {
    energy: f64,
    capacity: f64,
    emissions: f64,
    money: f64,
}

pub(crate) fn power_of_ten(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        10f64.powi(v.log10().floor() as i32)
    } else {
        1.0
    }
}

impl InstanceScale {
    pub(crate) fn for_instance(instance: &MarketInstance) -> Self {
        let peak = instance
            .scenarios
            .demand
            .iter()
            .fold(instance.scenarios.first_stage_demand, |m, &d| m.max(d));
        let energy = power_of_ten(peak);
        let capacity = power_of_ten(energy / instance.hours_per_year);
        let max_eps = instance
            .technologies
            .iter()
            .fold(0.0f64, |m, t| m.max(t.emission_factor));
        // a clean fleet still prices permits; size them as if one tonne per MWh
        let max_eps = if max_eps > 0.0 { max_eps } else { 1.0 };
        let emissions = power_of_ten(energy * max_eps);
        let max_cost = instance
            .technologies
            .iter()
            .fold(0.0f64, |m, t| m.max(t.linear_cost.abs()));
        let money = power_of_ten(energy * max_cost.max(1.0));
        Self {
            energy,
            capacity,
            emissions,
            money,
        }
    }

    pub(crate) fn energy(self) -> f64 {
        self.energy
    }
    pub(crate) fn capacity(self) -> f64 {
        self.capacity
    }
    pub(crate) fn emissions(self) -> f64 {
        self.emissions
    }
    pub(crate) fn money(self) -> f64 {
        self.money
    }
    pub(crate) fn energy_price(self) -> f64 {
        self.money / self.energy
    }
    pub(crate) fn capacity_price(self) -> f64 {
        self.money / self.capacity
    }
    pub(crate) fn emission_price(self) -> f64 {
        self.money / self.emissions
    }
}
