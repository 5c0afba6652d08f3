//! Receive chain: link budget, acquisition, CIR tensor, delay and angular profiles.

mod acquire;
mod budget;
mod cir;
mod profiles;

pub use acquire::{acquire, AcquireConfig, AcquireReport, Acquisition, NoiseSpec};
pub use budget::{link_budget_report, receiver_sensitivity, sensitivity_dbm, LinkBudget, LinkBudgetReport, THERMAL_NOISE_DBM_HZ};
pub use cir::{coherent_gain, hann_window, tapered_spectrum, windowed_idft, CirHeader, CirTensor, CIR_MAGIC, CIR_SCHEMA_VERSION};
pub use profiles::{pas, pdp, pdp_average, write_pas_csv, write_pdp_csv, Selection};
