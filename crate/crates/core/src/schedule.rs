//! Sounding frame, switching codebook and per-entry acquisition timestamps.
//!
//! All schedule arithmetic is carried out in integer nanoseconds; seconds only
//! appear at the API boundary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

pub const CODEBOOK_SCHEMA_VERSION: u32 = 1;

fn seconds_to_ns(s: f64) -> Result<u64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::invalid(format!("duration {s} s must be finite and non-negative")));
    }
    Ok((s * 1e9).round() as u64)
}

/// Frame layout: head margins, `n_core` averaged sequences, a sync tail and a
/// switch-settling guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub seq_duration_ns: u64,
    pub n_core: u32,
    pub n_margin_head: u32,
    pub n_sync_tail: u32,
    pub guard_ns: u64,
}

impl FrameSpec {
    pub fn from_seconds(seq_duration_s: f64, n_core: u32, n_margin_head: u32, n_sync_tail: u32, guard_s: f64) -> Result<Self> {
        let f = FrameSpec {
            seq_duration_ns: seconds_to_ns(seq_duration_s)?,
            n_core,
            n_margin_head,
            n_sync_tail,
            guard_ns: seconds_to_ns(guard_s)?,
        };
        f.validate()?;
        Ok(f)
    }

    /// 2.6 µs sequences, two head margins, four core, one sync, 100 ns guard.
    pub fn reference() -> Self {
        FrameSpec { seq_duration_ns: 2600, n_core: 4, n_margin_head: 2, n_sync_tail: 1, guard_ns: 100 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_duration_ns == 0 {
            return Err(Error::invalid("sequence duration must be positive"));
        }
        if self.n_core == 0 {
            return Err(Error::invalid("n_core must be at least 1"));
        }
        Ok(())
    }

    pub fn frame_duration_ns(&self) -> u64 {
        (self.n_margin_head + self.n_core + self.n_sync_tail) as u64 * self.seq_duration_ns + self.guard_ns
    }
}

/// Frame duration in seconds.
pub fn build_frame(spec: &FrameSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.frame_duration_ns() as f64 * 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMode {
    Sequential,
    PseudoRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub tx: u32,
    pub rx: u32,
    pub pol: Polarization,
}

/// Ordered list of switch states shared by both link ends.
///
/// With `dual_pol`, receive elements `2k` and `2k + 1` are the H and V feeds of
/// one dual-polarized patch, and the two entries of every (tx, patch) pair are
/// kept adjacent. Entry count stays `n_tx × n_rx`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchCodebook {
    pub entries: Vec<CodebookEntry>,
    pub seed: u64,
    pub n_tx: u32,
    pub n_rx: u32,
    pub dual_pol: bool,
    pub mode: SwitchMode,
}

pub fn gen_codebook(seed: u64, n_tx: u32, n_rx: u32, dual_pol: bool, mode: SwitchMode) -> Result<SwitchCodebook> {
    if n_tx == 0 || n_rx == 0 {
        return Err(Error::invalid("array sizes must be at least 1"));
    }
    if dual_pol && n_rx % 2 != 0 {
        return Err(Error::invalid("dual polarization pairs receive feeds and needs an even n_rx"));
    }
    let group = if dual_pol { 2 } else { 1 };
    let mut units: Vec<(u32, u32)> =
        (0..n_tx).flat_map(|t| (0..n_rx / group).map(move |p| (t, p))).collect();
    if mode == SwitchMode::PseudoRandom {
        let mut r = rng::substream(seed, Domain::Codebook, n_tx as u64, n_rx as u64);
        rng::shuffle(&mut r, &mut units);
    }
    let entries = units
        .into_iter()
        .flat_map(|(tx, p)| {
            (0..group).map(move |g| CodebookEntry {
                tx,
                rx: p * group + g,
                pol: if dual_pol && g == 1 { Polarization::V } else { Polarization::H },
            })
        })
        .collect();
    Ok(SwitchCodebook { entries, seed, n_tx, n_rx, dual_pol, mode })
}

impl SwitchCodebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of every (tx, rx) pair in the ordering, as `[tx * n_rx + rx]`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![usize::MAX; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate() {
            pos[(e.tx * self.n_rx + e.rx) as usize] = i;
        }
        pos
    }
}

/// Codebook plus frame timing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchSchedule {
    pub codebook: SwitchCodebook,
    pub frame: FrameSpec,
    pub timestamps_ns: Vec<u64>,
    pub snapshot_duration_ns: u64,
}

pub fn snapshot_timing(codebook: &SwitchCodebook, frame: &FrameSpec) -> Result<SwitchSchedule> {
    frame.validate()?;
    let step = frame.frame_duration_ns();
    let timestamps_ns = (0..codebook.len() as u64).map(|i| i * step).collect();
    Ok(SwitchSchedule {
        codebook: codebook.clone(),
        frame: *frame,
        timestamps_ns,
        snapshot_duration_ns: codebook.len() as u64 * step,
    })
}

impl SwitchSchedule {
    pub fn frame_duration_ns(&self) -> u64 {
        self.frame.frame_duration_ns()
    }

    pub fn snapshot_duration_s(&self) -> f64 {
        self.snapshot_duration_ns as f64 * 1e-9
    }

    pub fn timestamps_s(&self) -> Vec<f64> {
        self.timestamps_ns.iter().map(|&t| t as f64 * 1e-9).collect()
    }

    pub fn n_entries(&self) -> usize {
        self.timestamps_ns.len()
    }

    /// Timestamp (s) of the (tx, rx) pair, laid out `[tx][rx]`.
    pub fn pair_times_s(&self) -> Vec<f64> {
        let pos = self.codebook.positions();
        pos.iter().map(|&i| self.timestamps_ns[i] as f64 * 1e-9).collect()
    }

    /// SHA-256 over the canonical codebook export.
    pub fn checksum(&self) -> String {
        crate::io::sha256_hex(&serde_json::to_vec(&self.to_export()).expect("serializable"))
    }

    pub fn to_export(&self) -> CodebookExport {
        CodebookExport {
            schema_version: CODEBOOK_SCHEMA_VERSION,
            prng: rng::PRNG_NAME.to_string(),
            seed: self.codebook.seed,
            n_tx: self.codebook.n_tx,
            n_rx: self.codebook.n_rx,
            dual_pol: self.codebook.dual_pol,
            mode: self.codebook.mode,
            frame: self.frame,
            entries: self
                .codebook
                .entries
                .iter()
                .zip(&self.timestamps_ns)
                .enumerate()
                .map(|(idx, (e, &t_ns))| ExportEntry { idx, tx: e.tx, rx: e.rx, pol: e.pol, t_ns })
                .collect(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.to_export())?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let export: CodebookExport = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Format(format!("codebook {}: {e}", path.display())))?;
        export.into_schedule()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportEntry {
    pub idx: usize,
    pub tx: u32,
    pub rx: u32,
    pub pol: Polarization,
    pub t_ns: u64,
}

/// On-disk codebook: metadata plus the `{idx, tx, rx, pol, t_ns}` array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookExport {
    pub schema_version: u32,
    pub prng: String,
    pub seed: u64,
    pub n_tx: u32,
    pub n_rx: u32,
    pub dual_pol: bool,
    pub mode: SwitchMode,
    pub frame: FrameSpec,
    pub entries: Vec<ExportEntry>,
}

impl CodebookExport {
    pub fn into_schedule(self) -> Result<SwitchSchedule> {
        if self.schema_version != CODEBOOK_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported codebook schema version {}", self.schema_version)));
        }
        self.frame.validate()?;
        let n = (self.n_tx as usize) * (self.n_rx as usize);
        if self.entries.len() != n {
            return Err(Error::Format(format!("codebook has {} entries, expected {n}", self.entries.len())));
        }
        let mut seen = vec![false; n];
        let step = self.frame.frame_duration_ns();
        for (i, e) in self.entries.iter().enumerate() {
            if e.idx != i || e.tx >= self.n_tx || e.rx >= self.n_rx || e.t_ns != i as u64 * step {
                return Err(Error::Format(format!("codebook entry {i} is inconsistent")));
            }
            let k = (e.tx * self.n_rx + e.rx) as usize;
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Format(format!("pair ({}, {}) appears twice", e.tx, e.rx)));
            }
        }
        let codebook = SwitchCodebook {
            entries: self.entries.iter().map(|e| CodebookEntry { tx: e.tx, rx: e.rx, pol: e.pol }).collect(),
            seed: self.seed,
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            dual_pol: self.dual_pol,
            mode: self.mode,
        };
        snapshot_timing(&codebook, &self.frame)
    }
}

/// Classical across-snapshot Doppler limit: half the snapshot rate.
pub fn max_unambiguous_doppler(schedule: &SwitchSchedule) -> f64 {
    0.5 / schedule.snapshot_duration_s()
}
