use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::channel::tone_offsets;
use crate::error::{Error, Result};
use crate::schedule::SwitchSchedule;
use crate::sounder::{hann_window, tapered_spectrum, CirTensor};

/// One snapshot in the tapered frequency domain: `data[t][r][k] = w_k·H_k`
/// with each (t, r) pair observed at `times_s[t][r]` (snapshot-relative).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub n_tx: usize,
    pub n_rx: usize,
    pub data: Vec<Complex64>,
    pub taper: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    pub times_s: Vec<f64>,
    /// Duration of the snapshot the times are drawn from.
    pub span_s: f64,
}

impl Observation {
    pub fn m_f(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.n_tx * self.n_rx
    }

    pub fn validate(&self) -> Result<()> {
        let m_f = self.m_f();
        if m_f == 0 || self.n_pairs() == 0 {
            return Err(Error::invalid("empty observation"));
        }
        if self.data.len() != self.n_pairs() * m_f || self.taper.len() != m_f || self.times_s.len() != self.n_pairs() {
            return Err(Error::dim("observation arrays disagree with its dimensions"));
        }
        if self.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("observation contains non-finite values"));
        }
        if !(self.span_s > 0.0) {
            return Err(Error::invalid("observation span must be positive"));
        }
        Ok(())
    }

    /// Snapshot `s` of a CIR tensor acquired with `schedule`.
    pub fn from_cir(cir: &CirTensor<f64>, snapshot: usize, schedule: &SwitchSchedule) -> Result<Self> {
        if snapshot >= cir.n_snapshots {
            return Err(Error::invalid(format!("snapshot {snapshot} out of range")));
        }
        if cir.n_tx != schedule.codebook.n_tx as usize || cir.n_rx != schedule.codebook.n_rx as usize {
            return Err(Error::dim("CIR and schedule sizes disagree"));
        }
        if !cir.schedule_checksum.is_empty() && cir.schedule_checksum != schedule.checksum() {
            return Err(Error::invalid("CIR was acquired with a different schedule"));
        }
        let m_f = cir.n_delay;
        let mut planner = FftPlanner::new();
        let mut data = Vec::with_capacity(cir.n_tx * cir.n_rx * m_f);
        for t in 0..cir.n_tx {
            for r in 0..cir.n_rx {
                data.extend(tapered_spectrum(cir.response(snapshot, t, r), &mut planner));
            }
        }
        let obs = Observation {
            n_tx: cir.n_tx,
            n_rx: cir.n_rx,
            data,
            taper: hann_window(m_f),
            frequencies_hz: tone_offsets(m_f, 1.0 / (cir.delay_step_s * m_f as f64)),
            times_s: schedule.pair_times_s(),
            span_s: schedule.snapshot_duration_s(),
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Every snapshot of a CIR tensor.
    pub fn all_from_cir(cir: &CirTensor<f64>, schedule: &SwitchSchedule) -> Result<Vec<Self>> {
        (0..cir.n_snapshots).map(|s| Self::from_cir(cir, s, schedule)).collect()
    }

    /// Keep the `max_tones` centre tones (delay resolution drops accordingly).
    pub fn center_tones(&self, max_tones: usize) -> Self {
        let m = self.m_f();
        if max_tones == 0 || m <= max_tones {
            return self.clone();
        }
        let a = (m - max_tones) / 2;
        let mut out = self.clone();
        out.frequencies_hz = self.frequencies_hz[a..a + max_tones].to_vec();
        out.taper = self.taper[a..a + max_tones].to_vec();
        out.data = self.data.chunks_exact(m).flat_map(|c| c[a..a + max_tones].to_vec()).collect();
        out
    }

    /// Undo the taper on tones where it is at least `min_weight`, dropping the
    /// rest; the result has unit taper and white noise when the original noise
    /// was white before tapering.
    pub fn whitened(&self, min_weight: f64) -> Self {
        let m = self.m_f();
        let keep: Vec<usize> = (0..m).filter(|&k| self.taper[k] >= min_weight && self.taper[k] > 0.0).collect();
        let mut out = self.clone();
        out.frequencies_hz = keep.iter().map(|&k| self.frequencies_hz[k]).collect();
        out.taper = vec![1.0; keep.len()];
        out.data = self.data.chunks_exact(m).flat_map(|c| keep.iter().map(|&k| c[k] / self.taper[k]).collect::<Vec<_>>()).collect();
        out
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Delay profile `|IDFT(data)|²` (1/M scaling) averaged over pairs.
    pub fn delay_profile(&self, oversample: usize) -> Vec<f64> {
        let m = self.m_f();
        let n = m * oversample.max(1);
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n);
        let mut acc = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / (m as f64 * m as f64) / self.n_pairs() as f64;
        for c in self.data.chunks_exact(m) {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            buf[..m].copy_from_slice(c);
            ifft.process(&mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += v.norm_sqr() * scale;
            }
        }
        acc
    }

    /// Per-tone noise variance of the untapered channel estimate, from the
    /// last quarter of the delay axis.
    pub fn noise_variance(&self) -> f64 {
        let m = self.m_f();
        let p = self.delay_profile(1);
        let tail = &p[3 * m / 4..];
        let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        let sum_w2: f64 = self.taper.iter().map(|w| w * w).sum();
        mean * (m * m) as f64 / sum_w2
    }
}
