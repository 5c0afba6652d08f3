use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::budget::{receiver_sensitivity, LinkBudget};
use super::cir::{hann_window, windowed_idft, CirTensor};
use crate::arrays::LinkManifolds;
use crate::channel::{ChannelScene, Realizer};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, substream, Domain};
use crate::schedule::SwitchSchedule;
use crate::waveform::SoundingWaveform;

/// Receiver noise level. Variances refer to the equalized per-tone channel
/// estimate of a single replica unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    /// Per-tone variance of each core replica.
    PerToneVariance { variance: f64 },
    /// Mean delay-domain PDP level after averaging and windowing.
    DelayFloor { power: f64 },
    /// Ratio of mean noiseless `|H|²` (first snapshot) to the per-tone noise
    /// variance of the averaged estimate.
    Snr { snr_db: f64 },
    /// Unit `|H|²` corresponds to `EIRP − pathloss` at the receiver; the noise
    /// power over the band is the receiver sensitivity.
    Physical { budget: LinkBudget, pathloss_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquireConfig {
    pub noise: NoiseSpec,
    pub n_snapshots: usize,
    pub seed: u64,
    /// Per-snapshot LO phase offset drawn uniformly from `[−max, max]` radians.
    #[serde(default)]
    pub lo_phase_max_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquireReport {
    /// Per-tone noise variance of one replica.
    pub replica_noise_var: f64,
    /// Per-tone noise variance after averaging.
    pub averaged_noise_var: f64,
    /// Peak per-entry received power (physical mode only).
    pub peak_rx_dbm: Option<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone)]
pub struct Acquisition {
    pub cir: CirTensor<f64>,
    pub report: AcquireReport,
}

fn mean_power(h: &[Complex64]) -> f64 {
    if h.is_empty() {
        0.0
    } else {
        h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64
    }
}

/// Simulate a measurement: realize every entry at its timestamp, add
/// independent noise to each of the `M` core replicas, average, equalize by
/// the known tone phasors, taper with a Hann window and transform to delay.
pub fn acquire(
    scene: &ChannelScene,
    schedule: &SwitchSchedule,
    waveform: &SoundingWaveform<f64>,
    manifolds: &LinkManifolds<f64>,
    config: &AcquireConfig,
) -> Result<Acquisition> {
    let m_f = scene.m_f();
    let tones = waveform.grid.tone_frequencies_hz();
    if tones.len() != m_f {
        return Err(Error::dim(format!("waveform has {} tones, scene has {m_f}", tones.len())));
    }
    if tones.iter().zip(&scene.frequencies_hz).any(|(a, b)| (a - b).abs() > 1e-6 * waveform.grid.tone_spacing_hz) {
        return Err(Error::dim("waveform tone grid does not match scene frequencies"));
    }
    if config.n_snapshots == 0 {
        return Err(Error::invalid("n_snapshots must be at least 1"));
    }
    if !(config.lo_phase_max_rad >= 0.0 && config.lo_phase_max_rad.is_finite()) {
        return Err(Error::invalid("lo_phase_max_rad must be non-negative"));
    }
    let realizer = Realizer::new(scene, schedule, manifolds, config.seed)?;
    let n_avg = schedule.frame.n_core;
    let window = hann_window::<f64>(m_f);
    let sum_w2: f64 = window.iter().map(|w| w * w).sum();

    let mut peak_rx_dbm = None;
    let mut saturated = false;
    let averaged = match config.noise {
        NoiseSpec::None => 0.0,
        NoiseSpec::PerToneVariance { variance } => variance / n_avg as f64,
        NoiseSpec::DelayFloor { power } => power * (m_f * m_f) as f64 / sum_w2,
        NoiseSpec::Snr { snr_db } => mean_power(&realizer.specular(0)?) / 10f64.powf(snr_db / 10.0),
        NoiseSpec::Physical { budget, pathloss_db } => {
            let sens = receiver_sensitivity(&budget)?;
            if !pathloss_db.is_finite() {
                return Err(Error::invalid("pathloss_db must be finite"));
            }
            let h = realizer.specular(0)?;
            let peak = h.chunks_exact(m_f).map(mean_power).fold(0.0, f64::max);
            let unit_dbm = budget.eirp_dbm - pathloss_db;
            if peak > 0.0 {
                let p = unit_dbm + 10.0 * peak.log10();
                saturated = p > budget.saturation_dbm;
                peak_rx_dbm = Some(p);
            }
            10f64.powf((sens - unit_dbm) / 10.0) / n_avg as f64
        }
    };
    let replica = averaged * n_avg as f64;
    if !(replica.is_finite() && replica >= 0.0) {
        return Err(Error::Numerical(format!("noise configuration gives variance {replica}")));
    }

    let phasors = waveform.tone_phasors();
    let (n_tx, n_rx) = (manifolds.n_tx(), manifolds.n_rx());
    let mut cir = CirTensor::zeros(
        [config.n_snapshots, n_tx, n_rx, m_f],
        1.0 / scene.bandwidth_hz(),
        scene.carrier_hz,
        n_avg,
        schedule.checksum(),
    );
    let entries = &schedule.codebook.entries;
    for s in 0..config.n_snapshots {
        let h = realizer.realize(s as u64)?;
        let lo = if config.lo_phase_max_rad > 0.0 {
            let mut rng = substream(config.seed, Domain::LoPhase, s as u64, 0);
            let phi = rng.random_range(-config.lo_phase_max_rad..=config.lo_phase_max_rad);
            Complex64::from_polar(1.0, phi)
        } else {
            Complex64::new(1.0, 0.0)
        };
        let blocks: Vec<Vec<Complex64>> = h
            .par_chunks_exact(m_f)
            .enumerate()
            .map_init(FftPlanner::new, |planner, (i, hk)| {
                let mut rng = substream(config.seed, Domain::Noise, s as u64, i as u64);
                let mut acc = vec![Complex64::new(0.0, 0.0); m_f];
                for _ in 0..n_avg {
                    for ((a, x), v) in acc.iter_mut().zip(&phasors).zip(hk) {
                        let n = if replica > 0.0 { complex_gaussian(&mut rng, replica) } else { Complex64::new(0.0, 0.0) };
                        *a += v * lo * x + n;
                    }
                }
                let scale = 1.0 / n_avg as f64;
                for (a, x) in acc.iter_mut().zip(&phasors) {
                    *a = *a * scale / x;
                }
                windowed_idft(&mut acc, &window, planner);
                acc
            })
            .collect();
        for (e, block) in entries.iter().zip(blocks) {
            cir.response_mut(s, e.tx as usize, e.rx as usize).copy_from_slice(&block);
        }
    }
    cir.validate()?;
    Ok(Acquisition {
        cir,
        report: AcquireReport { replica_noise_var: replica, averaged_noise_var: averaged, peak_rx_dbm, saturated },
    })
}
