use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::SwitchSchedule;

/// Normalized correlation of a schedule's sampling pattern against Doppler
/// hypotheses: `(1/n) Σ_r |Σ_{k∈r} e^{j2πν t_k}|`, where the inner sum runs
/// over the entries that use receive element `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityFunction {
    pub doppler_grid_hz: Vec<f64>,
    pub magnitude: Vec<f64>,
}

pub fn doppler_ambiguity(schedule: &SwitchSchedule, doppler_grid_hz: &[f64]) -> Result<AmbiguityFunction> {
    let n = schedule.n_entries();
    if n == 0 {
        return Err(Error::invalid("schedule has no entries"));
    }
    let n_rx = schedule.codebook.n_rx as usize;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); n_rx];
    for (e, t) in schedule.codebook.entries.iter().zip(schedule.timestamps_s()) {
        groups[e.rx as usize].push(t);
    }
    let magnitude = doppler_grid_hz
        .par_iter()
        .map(|&nu| {
            let total: f64 = groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (nu * t).rem_euclid(1.0)))
                        .sum::<Complex64>()
                        .norm()
                })
                .sum();
            (total / n as f64).min(1.0)
        })
        .collect();
    Ok(AmbiguityFunction { doppler_grid_hz: doppler_grid_hz.to_vec(), magnitude })
}

/// `0, step, … ≤ 1/(2·frame)`: the within-snapshot Nyquist range.
pub fn default_doppler_grid(schedule: &SwitchSchedule, step_hz: f64) -> Vec<f64> {
    let top = 0.5 / (schedule.frame_duration_ns() as f64 * 1e-9);
    let n = (top / step_hz).floor() as usize;
    (0..=n).map(|i| i as f64 * step_hz).collect()
}

impl AmbiguityFunction {
    /// Largest magnitude at `|ν| ≥ min_hz`.
    pub fn max_sidelobe(&self, min_hz: f64) -> f64 {
        self.doppler_grid_hz
            .iter()
            .zip(&self.magnitude)
            .filter(|(nu, _)| nu.abs() >= min_hz)
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }

    /// First Doppler (grid order) after the main lobe where the magnitude
    /// climbs back to `level`.
    pub fn first_grating(&self, level: f64) -> Option<f64> {
        let left = self.magnitude.iter().position(|&m| m < level)?;
        self.magnitude[left..].iter().position(|&m| m >= level).map(|i| self.doppler_grid_hz[left + i])
    }
}

/// Half-width of the Doppler range a schedule resolves unambiguously: half
/// its first grating peak (≥ 0.9), or the within-snapshot Nyquist limit
/// when there is none.
pub fn doppler_search_limit(schedule: &SwitchSchedule) -> Result<f64> {
    let span = schedule.snapshot_duration_s();
    let grid = default_doppler_grid(schedule, 1.0 / (16.0 * span));
    let af = doppler_ambiguity(schedule, &grid)?;
    let nyquist = *grid.last().expect("grid has ν = 0");
    Ok(af.first_grating(0.9).map_or(nyquist, |g| 0.5 * g))
}
