//! JSON run configurations, one per subcommand. Unknown keys are rejected.

use std::path::PathBuf;

use mmsounder::arrays::Truncation;
use mmsounder::estimation::{EstimatorConfig, TrackConfig};
use mmsounder::schedule::{FrameSpec, SwitchMode};
use mmsounder::sounder::{LinkBudget, NoiseSpec};
use mmsounder::waveform::{PhaseRule, ToneGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    pub tones: ToneGrid,
    pub oversampling: usize,
    pub phase_rule: PhaseRule,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        WaveformConfig { tones: ToneGrid::reference(), oversampling: 4, phase_rule: PhaseRule::default() }
    }
}

/// Uniform rectangular arrays of patches at half-wavelength spacing, the same
/// at both link ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub dual_pol: bool,
    pub truncation: Truncation,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig { rows: 2, cols: 2, dual_pol: true, truncation: Truncation::Orders { az: 12, el: 8 } }
    }
}

impl ArrayConfig {
    pub fn n_elements(&self) -> usize {
        self.rows * self.cols * if self.dual_pol { 2 } else { 1 }
    }
}

/// Either a codebook file or the parameters to generate one from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub codebook: Option<PathBuf>,
    pub mode: SwitchMode,
    pub frame: FrameSpec,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { codebook: None, mode: SwitchMode::PseudoRandom, frame: FrameSpec::reference() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub n_tx: u32,
    pub n_rx: u32,
    pub dual_pol: bool,
    pub mode: SwitchMode,
    pub frame: FrameSpec,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig { n_tx: 8, n_rx: 8, dual_pol: true, mode: SwitchMode::PseudoRandom, frame: FrameSpec::reference() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PasGrid {
    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub step_deg: f64,
}

impl Default for PasGrid {
    fn default() -> Self {
        PasGrid { az_min_deg: -180.0, az_max_deg: 178.0, el_min_deg: -60.0, el_max_deg: 60.0, step_deg: 2.0 }
    }
}

impl PasGrid {
    pub fn axes(&self) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
        if !(self.step_deg > 0.0) || self.az_min_deg > self.az_max_deg || self.el_min_deg > self.el_max_deg {
            return Err(crate::input_error("invalid PAS grid"));
        }
        let axis = |lo: f64, hi: f64| {
            let n = ((hi - lo) / self.step_deg + 1e-9).floor() as usize;
            (0..=n).map(|i| lo + i as f64 * self.step_deg).collect::<Vec<_>>()
        };
        Ok((axis(self.az_min_deg, self.az_max_deg), axis(self.el_min_deg, self.el_max_deg)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Scene file; the built-in corridor demo when absent.
    pub scene: Option<PathBuf>,
    pub array: ArrayConfig,
    pub schedule: ScheduleConfig,
    pub noise: NoiseSpec,
    pub n_snapshots: usize,
    pub lo_phase_max_rad: f64,
    pub phase_rule: PhaseRule,
    pub pas: PasGrid,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scene: None,
            array: ArrayConfig::default(),
            schedule: ScheduleConfig::default(),
            noise: NoiseSpec::Snr { snr_db: 30.0 },
            n_snapshots: 4,
            lo_phase_max_rad: 0.0,
            phase_rule: PhaseRule::ZadoffChuQuadratic { root: 1 },
            pas: PasGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub cir: PathBuf,
    pub codebook: PathBuf,
    pub carrier_hz: f64,
    pub array: ArrayConfig,
    pub estimator: EstimatorConfig,
    /// Fit the dense component to the residual of all snapshots.
    pub dense: bool,
    /// Snapshots to process; all when absent.
    pub snapshots: Option<Vec<usize>>,
    pub tracking: TrackConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            cir: PathBuf::from("cir.bin"),
            codebook: PathBuf::from("codebook.json"),
            carrier_hz: 28e9,
            array: ArrayConfig::default(),
            estimator: EstimatorConfig::default(),
            dense: false,
            snapshots: None,
            tracking: TrackConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub budget: LinkBudget,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig { budget: LinkBudget::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbiguityConfig {
    pub n_tx: u32,
    pub n_rx: u32,
    pub dual_pol: bool,
    pub schedule: ScheduleConfig,
    /// Grid upper end; half the frame rate when absent.
    pub max_hz: Option<f64>,
    pub step_hz: f64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig { n_tx: 8, n_rx: 8, dual_pol: true, schedule: ScheduleConfig::default(), max_hz: None, step_hz: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackRunConfig {
    pub results: PathBuf,
    pub tracking: TrackConfig,
}

impl Default for TrackRunConfig {
    fn default() -> Self {
        TrackRunConfig { results: PathBuf::from("estimates.json"), tracking: TrackConfig::default() }
    }
}
