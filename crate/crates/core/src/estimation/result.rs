use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dense::DenseFit;
use crate::channel::{PathRecord, SpecularPath};
use crate::error::Result;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    pub path: SpecularPath,
    /// `‖Γ‖²_F`.
    pub power: f64,
    /// Residual-power increase if this path alone were removed from the fit.
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Sorted by power, strongest first.
    pub paths: Vec<PathEstimate>,
    pub dense_fit: Option<DenseFit>,
    pub noise_var_est: f64,
    pub residual_power: f64,
    /// `None` when the noise estimate is zero.
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EstimationResult {
    pub fn empty(noise_var_est: f64) -> Self {
        EstimationResult {
            paths: Vec::new(),
            dense_fit: None,
            noise_var_est,
            residual_power: 0.0,
            log_likelihood: None,
            iterations: 0,
            converged: true,
        }
    }

    pub fn specular_paths(&self) -> Vec<SpecularPath> {
        self.paths.iter().map(|p| p.path.clone()).collect()
    }

    pub fn to_file(&self, snapshot: usize, time_s: f64) -> ResultFile {
        ResultFile {
            schema_version: RESULT_SCHEMA_VERSION,
            snapshot,
            time_s,
            paths: self
                .paths
                .iter()
                .map(|p| PathEstimateRecord {
                    path: PathRecord::from_path(&p.path),
                    power_db: 10.0 * p.power.log10(),
                    improvement: p.improvement,
                })
                .collect(),
            dense_fit: self.dense_fit.clone(),
            noise_var_est: self.noise_var_est,
            residual_power: self.residual_power,
            log_likelihood: self.log_likelihood,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEstimateRecord {
    pub path: PathRecord,
    pub power_db: f64,
    pub improvement: f64,
}

/// Serialized estimate of one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema_version: u32,
    pub snapshot: usize,
    pub time_s: f64,
    pub paths: Vec<PathEstimateRecord>,
    pub dense_fit: Option<DenseFit>,
    pub noise_var_est: f64,
    pub residual_power: f64,
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultFile {
    pub fn to_result(&self) -> EstimationResult {
        EstimationResult {
            paths: self
                .paths
                .iter()
                .map(|p| PathEstimate { path: p.path.to_path(), power: 10f64.powf(p.power_db / 10.0), improvement: p.improvement })
                .collect(),
            dense_fit: self.dense_fit.clone(),
            noise_var_est: self.noise_var_est,
            residual_power: self.residual_power,
            log_likelihood: self.log_likelihood,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

pub fn write_results_json(path: &Path, results: &[ResultFile]) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(results)?)?;
    Ok(())
}

pub fn read_results_json(path: &Path) -> Result<Vec<ResultFile>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
