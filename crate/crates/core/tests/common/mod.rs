#![allow(dead_code)]

use mmsounder::arrays::{LinkManifolds, Truncation};
use mmsounder::channel::{tone_offsets, ChannelScene, SpecularPath};
use mmsounder::estimation::Observation;
use mmsounder::schedule::{gen_codebook, snapshot_timing, FrameSpec, SwitchMode, SwitchSchedule};
use mmsounder::sounder::{acquire, AcquireConfig, Acquisition, NoiseSpec};
use mmsounder::waveform::{gen_multitone, PhaseRule, SoundingWaveform, ToneGrid};
use num_complex::Complex64;

pub const CARRIER: f64 = 28e9;
pub const TONES: usize = 256;
pub const SPACING: f64 = 4e6;
/// Snapshots averaged by the dense-fit tests.
pub const DENSE_SNAPSHOTS: usize = 40;

/// 8 × 8 dual-polarized desk link: 2 × 2 patches per side.
pub fn desk_manifolds() -> LinkManifolds<f64> {
    LinkManifolds::desk(CARRIER, 2, 2, true, Truncation::Orders { az: 12, el: 8 }).unwrap()
}

pub fn schedule(mode: SwitchMode, seed: u64) -> SwitchSchedule {
    let cb = gen_codebook(seed, 8, 8, true, mode).unwrap();
    snapshot_timing(&cb, &FrameSpec::reference()).unwrap()
}

pub fn waveform(n_tones: usize, spacing: f64) -> SoundingWaveform<f64> {
    gen_multitone(&ToneGrid::new(n_tones, spacing), 4, &PhaseRule::ZadoffChuQuadratic { root: 1 }).unwrap()
}

pub fn scene(paths: Vec<SpecularPath>) -> ChannelScene {
    ChannelScene::new(paths, tone_offsets(TONES, SPACING), CARRIER)
}

pub fn deg(a: f64) -> f64 {
    a.to_radians()
}

pub fn path(tau_ns: f64, aoa_deg: (f64, f64), aod_deg: (f64, f64), amp: Complex64, doppler_hz: f64) -> SpecularPath {
    SpecularPath::co_polar(tau_ns * 1e-9, (deg(aoa_deg.0), deg(aoa_deg.1)), (deg(aod_deg.0), deg(aod_deg.1)), amp, doppler_hz)
}

pub fn measure(
    scene: &ChannelScene,
    schedule: &SwitchSchedule,
    manifolds: &LinkManifolds<f64>,
    noise: NoiseSpec,
    n_snapshots: usize,
    seed: u64,
) -> Acquisition {
    let wf = waveform(scene.m_f(), scene.frequencies_hz[1] - scene.frequencies_hz[0]);
    let cfg = AcquireConfig { noise, n_snapshots, seed, lo_phase_max_rad: 0.0 };
    acquire(scene, schedule, &wf, manifolds, &cfg).unwrap()
}

pub fn observe(acq: &Acquisition, schedule: &SwitchSchedule, snapshot: usize) -> Observation {
    Observation::from_cir(&acq.cir, snapshot, schedule).unwrap()
}

pub fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Three well-separated paths inside the main lobes of the desk arrays.
pub fn three_paths() -> Vec<SpecularPath> {
    vec![
        path(15.0, (30.0, 5.0), (-10.0, 0.0), Complex64::new(1.0, 0.0), 120.0),
        path(42.0, (-25.0, -10.0), (25.0, 8.0), Complex64::new(0.0, 0.8), -340.0),
        path(77.0, (5.0, 15.0), (-30.0, -5.0), Complex64::new(-0.5, 0.4), 610.0),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct PathError {
    pub delay_ns: f64,
    /// Largest of the four angle errors.
    pub angle_deg: f64,
    pub power_db: f64,
    pub doppler_hz: f64,
}

impl PathError {
    pub fn between(est: &SpecularPath, truth: &SpecularPath) -> Self {
        let angles = [
            wrap_deg((est.aoa_az_rad - truth.aoa_az_rad).to_degrees()),
            (est.aoa_el_rad - truth.aoa_el_rad).to_degrees(),
            wrap_deg((est.aod_az_rad - truth.aod_az_rad).to_degrees()),
            (est.aod_el_rad - truth.aod_el_rad).to_degrees(),
        ];
        PathError {
            delay_ns: (est.delay_s - truth.delay_s).abs() * 1e9,
            angle_deg: angles.iter().fold(0.0, |a, b| a.max(b.abs())),
            power_db: db(est.power() / truth.power()).abs(),
            doppler_hz: (est.doppler_hz - truth.doppler_hz).abs(),
        }
    }

    pub fn within(&self, delay_ns: f64, angle_deg: f64, power_db: f64, doppler_hz: f64) -> bool {
        self.delay_ns <= delay_ns && self.angle_deg <= angle_deg && self.power_db <= power_db && self.doppler_hz <= doppler_hz
    }
}

/// Error of the estimate closest in delay to each true path.
pub fn match_paths(estimates: &[SpecularPath], truth: &[SpecularPath]) -> Vec<Option<PathError>> {
    truth
        .iter()
        .map(|t| {
            estimates
                .iter()
                .min_by(|a, b| (a.delay_s - t.delay_s).abs().total_cmp(&(b.delay_s - t.delay_s).abs()))
                .map(|e| PathError::between(e, t))
        })
        .collect()
}

/// Whether every true path has an estimate within the end-to-end tolerances.
pub fn all_recovered(estimates: &[SpecularPath], truth: &[SpecularPath]) -> bool {
    estimates.len() >= truth.len() && match_paths(estimates, truth).iter().all(|e| e.is_some_and(|e| e.within(0.5, 1.0, 0.5, 0.5)))
}
