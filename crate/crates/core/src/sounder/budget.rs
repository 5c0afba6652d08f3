use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub eirp_dbm: f64,
    pub rx_array_gain_db: f64,
    pub saturation_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget { noise_figure_db: 5.0, bandwidth_hz: 1e9, eirp_dbm: 43.0, rx_array_gain_db: 30.08, saturation_dbm: -4.0 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let all = [self.noise_figure_db, self.bandwidth_hz, self.eirp_dbm, self.rx_array_gain_db, self.saturation_dbm];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("link budget fields must be finite"));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::invalid("bandwidth_hz must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetReport {
    pub sensitivity_dbm: f64,
    pub isotropic_sensitivity_dbm: f64,
    pub max_pathloss_db: f64,
    pub dynamic_range_db: f64,
}

/// `−174 dBm/Hz + NF + 10·log10(BW)`.
pub fn sensitivity_dbm<T: Real>(noise_figure_db: T, bandwidth_hz: T) -> T {
    T::of(THERMAL_NOISE_DBM_HZ) + noise_figure_db + T::of(10.0) * bandwidth_hz.log10()
}

pub fn receiver_sensitivity(budget: &LinkBudget) -> Result<f64> {
    budget.validate()?;
    Ok(sensitivity_dbm(budget.noise_figure_db, budget.bandwidth_hz))
}

pub fn link_budget_report(budget: &LinkBudget) -> Result<LinkBudgetReport> {
    let sensitivity_dbm = receiver_sensitivity(budget)?;
    let isotropic_sensitivity_dbm = sensitivity_dbm - budget.rx_array_gain_db;
    Ok(LinkBudgetReport {
        sensitivity_dbm,
        isotropic_sensitivity_dbm,
        max_pathloss_db: budget.eirp_dbm - isotropic_sensitivity_dbm,
        dynamic_range_db: budget.saturation_dbm - sensitivity_dbm,
    })
}
