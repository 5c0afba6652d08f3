//! Multitone Zadoff-Chu sounding waveform.
//!
//! The waveform is one fundamental period of a comb of equal-amplitude tones
//! spaced by `tone_spacing_hz`. Tone phases follow the Zadoff-Chu quadratic
//! rule, optionally refined by an iterative clip-and-restore pass that lowers
//! the peak-to-average power ratio while keeping every tone magnitude fixed.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{cis, db10, Real};

/// Frequency comb the sounding waveform is built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneGrid {
    pub n_tones: usize,
    pub tone_spacing_hz: f64,
    #[serde(default)]
    pub center_offset_hz: f64,
}

impl ToneGrid {
    pub fn new(n_tones: usize, tone_spacing_hz: f64) -> Self {
        ToneGrid { n_tones, tone_spacing_hz, center_offset_hz: 0.0 }
    }

    /// 2002 tones at 500 kHz: the 1 GHz sounding comb.
    pub fn reference() -> Self {
        ToneGrid::new(2002, 5.0e5)
    }

    pub fn occupied_bandwidth_hz(&self) -> f64 {
        (self.n_tones.saturating_sub(1)) as f64 * self.tone_spacing_hz
    }

    /// Bandwidth spanned by the tones, `n_tones × δf`; the delay resolution is its inverse.
    pub fn bandwidth_hz(&self) -> f64 {
        self.n_tones as f64 * self.tone_spacing_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tones == 0 {
            return Err(Error::invalid("n_tones must be at least 1"));
        }
        if !(self.tone_spacing_hz.is_finite() && self.tone_spacing_hz > 0.0) {
            return Err(Error::invalid("tone_spacing_hz must be positive and finite"));
        }
        if !self.center_offset_hz.is_finite() {
            return Err(Error::invalid("center_offset_hz must be finite"));
        }
        let bins = self.center_offset_hz / self.tone_spacing_hz;
        if (bins - bins.round()).abs() > 1e-9 {
            return Err(Error::invalid("center_offset_hz must be a multiple of tone_spacing_hz"));
        }
        Ok(())
    }

    /// Signed comb-bin index of every tone, lowest first.
    pub fn tone_bins(&self) -> Vec<i64> {
        let shift = (self.center_offset_hz / self.tone_spacing_hz).round() as i64;
        let first = -((self.n_tones / 2) as i64) + shift;
        (0..self.n_tones as i64).map(|i| first + i).collect()
    }

    /// Baseband frequency of every tone in Hz.
    pub fn tone_frequencies_hz(&self) -> Vec<f64> {
        self.tone_bins().iter().map(|&k| k as f64 * self.tone_spacing_hz).collect()
    }

    /// Smallest power-of-two transform size holding every tone.
    pub fn base_fft_len(&self) -> usize {
        self.n_tones.next_power_of_two()
    }
}

/// Rule used to assign tone phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseRule {
    /// Quadratic Zadoff-Chu phases with root `root` (coprime to the tone count).
    ZadoffChuQuadratic { root: u64 },
    /// Zadoff-Chu start followed by `iterations` rounds of envelope clipping at
    /// `clip_ratio` × RMS and restoration of unit tone magnitudes. Clipping is
    /// done on a 16× oversampled grid.
    ZadoffChuRefined { root: u64, iterations: usize, clip_ratio: f64 },
    Explicit { phases: Vec<f64> },
}

impl Default for PhaseRule {
    fn default() -> Self {
        PhaseRule::ZadoffChuRefined { root: 1, iterations: 1000, clip_ratio: 1.03 }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu phases `π·u·n(n + c)/L` with `c = L mod 2`, reduced modulo 2π in
/// integer arithmetic.
pub fn zadoff_chu_phases(len: usize, root: u64) -> Result<Vec<f64>> {
    let l = len as u64;
    if l == 0 {
        return Err(Error::invalid("Zadoff-Chu length must be positive"));
    }
    if root == 0 || gcd(root % l.max(1), l) != 1 && l > 1 {
        return Err(Error::invalid(format!("root {root} is not coprime to length {len}")));
    }
    let c = l % 2;
    let two_l = 2 * l as u128;
    Ok((0..l as u128)
        .map(|n| {
            let m = (root as u128 % two_l) * ((n * (n + c as u128)) % two_l) % two_l;
            std::f64::consts::PI * m as f64 / l as f64
        })
        .collect())
}

/// One period of the sounding comb.
#[derive(Debug, Clone)]
pub struct SoundingWaveform<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate_hz: f64,
    pub grid: ToneGrid,
    pub phases: Vec<f64>,
    pub phase_rule: PhaseRule,
}

/// Oversampling of the grid the phase refinement clips on.
const REFINE_OVERSAMPLING: usize = 16;

fn to_fft_bin(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

fn synthesize<T: Real>(bins: &[usize], phases: &[T], n: usize, planner: &mut FftPlanner<T>) -> Vec<Complex<T>> {
    let amp = T::one() / T::of(bins.len() as f64).sqrt();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (&b, &p) in bins.iter().zip(phases) {
        buf[b] = cis(p) * amp;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

fn papr_of<T: Real>(x: &[Complex<T>]) -> T {
    let (mut peak, mut sum) = (T::zero(), T::zero());
    for v in x {
        let p = v.norm_sqr();
        sum += p;
        if p > peak {
            peak = p;
        }
    }
    db10(peak / (sum / T::of(x.len() as f64)))
}

/// Build the multitone waveform.
pub fn gen_multitone<T: Real>(grid: &ToneGrid, oversampling: usize, rule: &PhaseRule) -> Result<SoundingWaveform<T>> {
    grid.validate()?;
    if oversampling == 0 {
        return Err(Error::invalid("oversampling must be at least 1"));
    }
    let n = grid.base_fft_len() * oversampling;
    let sample_rate_hz = n as f64 * grid.tone_spacing_hz;
    let kbins = grid.tone_bins();
    let half = (n / 2) as i64;
    if kbins.iter().any(|&k| k < -half || k >= half) {
        return Err(Error::invalid(format!(
            "occupied bandwidth {} Hz exceeds sample rate {} Hz",
            grid.occupied_bandwidth_hz() + 2.0 * grid.center_offset_hz.abs(),
            sample_rate_hz
        )));
    }
    let bins: Vec<usize> = kbins.iter().map(|&k| to_fft_bin(k, n)).collect();

    let mut phases = match rule {
        PhaseRule::ZadoffChuQuadratic { root } | PhaseRule::ZadoffChuRefined { root, .. } => {
            zadoff_chu_phases(grid.n_tones, *root)?
        }
        PhaseRule::Explicit { phases } => {
            if phases.len() != grid.n_tones {
                return Err(Error::invalid(format!(
                    "explicit phase list has {} entries, expected {}",
                    phases.len(),
                    grid.n_tones
                )));
            }
            if phases.iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid("explicit phases must be finite"));
            }
            phases.clone()
        }
    };

    let mut planner = FftPlanner::<T>::new();
    if let PhaseRule::ZadoffChuRefined { iterations, clip_ratio, .. } = rule {
        if !(clip_ratio.is_finite() && *clip_ratio > 0.0) {
            return Err(Error::invalid("clip_ratio must be positive"));
        }
        // Clipping acts on a grid finer than the output so that peaks between
        // output samples are held down too.
        let fine = n.max(grid.base_fft_len() * REFINE_OVERSAMPLING);
        let fine_bins: Vec<usize> = kbins.iter().map(|&k| to_fft_bin(k, fine)).collect();
        phases = refine_phases(&fine_bins, phases, fine, *iterations, T::of(*clip_ratio), &mut planner);
    }

    let tp: Vec<T> = phases.iter().map(|&p| T::of(p)).collect();
    let samples = synthesize(&bins, &tp, n, &mut planner);
    Ok(SoundingWaveform { samples, sample_rate_hz, grid: grid.clone(), phases, phase_rule: rule.clone() })
}

fn refine_phases<T: Real>(
    bins: &[usize],
    start: Vec<f64>,
    n: usize,
    iterations: usize,
    clip_ratio: T,
    planner: &mut FftPlanner<T>,
) -> Vec<f64> {
    let fwd = planner.plan_fft_forward(n);
    let mut phases: Vec<T> = start.iter().map(|&p| T::of(p)).collect();
    let mut x = synthesize(bins, &phases, n, planner);
    let mut best = (papr_of(&x), phases.clone());
    let inv = planner.plan_fft_inverse(n);
    let amp = T::one() / T::of(bins.len() as f64).sqrt();
    for _ in 0..iterations {
        let rms = (x.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b) / T::of(n as f64)).sqrt();
        let limit = rms * clip_ratio;
        for v in x.iter_mut() {
            let m = v.norm();
            if m > limit {
                *v = *v * (limit / m);
            }
        }
        fwd.process(&mut x);
        for (p, &b) in phases.iter_mut().zip(bins) {
            *p = x[b].arg();
        }
        x.iter_mut().for_each(|v| *v = Complex::new(T::zero(), T::zero()));
        for (&b, &p) in bins.iter().zip(&phases) {
            x[b] = cis(p) * amp;
        }
        inv.process(&mut x);
        let papr = papr_of(&x);
        if papr < best.0 {
            best = (papr, phases.clone());
        }
    }
    best.1.iter().map(|p| p.as_f64()).collect()
}

impl<T: Real> SoundingWaveform<T> {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn oversampling(&self) -> usize {
        self.samples.len() / self.grid.base_fft_len()
    }

    fn active_bins(&self) -> Vec<usize> {
        let n = self.samples.len();
        self.grid.tone_bins().iter().map(|&k| to_fft_bin(k, n)).collect()
    }

    /// Normalized DFT (`X[k] = Σ x[n] e^{-j2πkn/N} / N`) of the samples.
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let n = self.samples.len();
        let mut buf = self.samples.clone();
        FftPlanner::<T>::new().plan_fft_forward(n).process(&mut buf);
        let scale = T::one() / T::of(n as f64);
        buf.iter_mut().for_each(|v| *v = *v * scale);
        buf
    }

    /// Complex value of each active tone, in tone order.
    pub fn tone_spectrum(&self) -> Vec<Complex<T>> {
        let spec = self.spectrum();
        self.active_bins().iter().map(|&b| spec[b]).collect()
    }

    /// Unit-magnitude tone values implied by the phases, independent of the samples.
    pub fn tone_phasors(&self) -> Vec<Complex<T>> {
        self.phases.iter().map(|&p| cis(T::of(p))).collect()
    }

    /// Write the interleaved little-endian f32 I/Q blob plus its JSON sidecar
    /// (`<path>.json`).
    pub fn export(&self, bin_path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.samples.len() * 8);
        for s in &self.samples {
            bytes.extend_from_slice(&(s.re.as_f64() as f32).to_le_bytes());
            bytes.extend_from_slice(&(s.im.as_f64() as f32).to_le_bytes());
        }
        std::fs::File::create(bin_path)?.write_all(&bytes)?;
        let sidecar = WaveformSidecar {
            n_tones: self.grid.n_tones,
            tone_spacing_hz: self.grid.tone_spacing_hz,
            sample_rate_hz: self.sample_rate_hz,
            phase_rule: self.phase_rule.clone(),
        };
        let mut side = bin_path.as_os_str().to_owned();
        side.push(".json");
        std::fs::write(side, serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(())
    }
}

/// JSON sidecar written next to an exported waveform blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSidecar {
    pub n_tones: usize,
    pub tone_spacing_hz: f64,
    pub sample_rate_hz: f64,
    pub phase_rule: PhaseRule,
}

/// Read back an exported blob as complex samples.
pub fn read_waveform_blob(bin_path: &Path) -> Result<Vec<Complex<f32>>> {
    let bytes = std::fs::read(bin_path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("waveform blob length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            Complex::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect())
}

/// Peak-to-average power ratio in dB.
pub fn papr_db<T: Real>(w: &SoundingWaveform<T>) -> Result<f64> {
    papr_db_samples(&w.samples)
}

pub fn papr_db_samples<T: Real>(samples: &[Complex<T>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("PAPR of an empty waveform"));
    }
    if samples.iter().all(|v| v.norm_sqr() == T::zero()) {
        return Err(Error::invalid("PAPR of an all-zero waveform"));
    }
    Ok(papr_of(samples).as_f64().max(0.0))
}

/// Max/min active-tone magnitude ratio in dB; 0 dB is perfectly flat.
pub fn spectrum_flatness<T: Real>(w: &SoundingWaveform<T>) -> Result<f64> {
    if w.samples.len() < w.grid.n_tones {
        return Err(Error::invalid("waveform shorter than its tone grid"));
    }
    let tones = w.tone_spectrum();
    let mags: Vec<f64> = tones.iter().map(|v| v.norm().as_f64()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (max / min).log10())
}

/// Peak-to-maximum-sidelobe ratio (dB) of the periodic autocorrelation of a
/// complex sequence, computed by direct summation.
pub fn periodic_autocorrelation_pslr_db<T: Real>(seq: &[Complex<T>]) -> f64 {
    let n = seq.len();
    let corr = |lag: usize| -> f64 {
        let mut acc = Complex::new(0.0, 0.0);
        for i in 0..n {
            let a = seq[i];
            let b = seq[(i + lag) % n];
            acc += Complex::new(a.re.as_f64(), a.im.as_f64()) * Complex::new(b.re.as_f64(), -b.im.as_f64());
        }
        acc.norm()
    };
    let peak = corr(0);
    let side = (1..n).map(corr).fold(0.0, f64::max);
    if side == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (peak / side).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zc(n: usize, os: usize) -> SoundingWaveform<f64> {
        gen_multitone(&ToneGrid::new(n, 5e5), os, &PhaseRule::ZadoffChuQuadratic { root: 1 }).unwrap()
    }

    #[test]
    fn single_tone_is_constant_envelope() {
        let w = zc(1, 4);
        assert_abs_diff_eq!(papr_db(&w).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_equal_tones_peak_at_twice_the_mean() {
        let g = ToneGrid::new(2, 5e5);
        let w: SoundingWaveform<f64> = gen_multitone(&g, 4, &PhaseRule::Explicit { phases: vec![0.0, 0.0] }).unwrap();
        assert_abs_diff_eq!(papr_db(&w).unwrap(), 10.0 * 2f64.log10(), epsilon = 1e-9);
    }

    #[test]
    fn sample_rate_follows_fft_size() {
        let w = zc(2002, 4);
        assert_eq!(w.samples.len(), 8192);
        assert_abs_diff_eq!(w.sample_rate_hz, 8192.0 * 5e5);
        assert_abs_diff_eq!(w.duration_s(), 2e-6, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = ToneGrid::new(4, 5e5);
        assert!(gen_multitone::<f64>(&g, 0, &PhaseRule::default()).is_err());
        assert!(gen_multitone::<f64>(&ToneGrid::new(4, 0.0), 1, &PhaseRule::default()).is_err());
        assert!(gen_multitone::<f64>(&g, 1, &PhaseRule::Explicit { phases: vec![0.0; 3] }).is_err());
        assert!(gen_multitone::<f64>(&g, 1, &PhaseRule::Explicit { phases: vec![0.0, f64::NAN, 0.0, 0.0] }).is_err());
        let mut off = ToneGrid::new(4, 5e5);
        off.center_offset_hz = 2.0e6;
        assert!(gen_multitone::<f64>(&off, 1, &PhaseRule::default()).is_err());
        assert!(gen_multitone::<f64>(&off, 4, &PhaseRule::default()).is_ok());
    }

    #[test]
    fn papr_rejects_degenerate_samples() {
        assert!(papr_db_samples::<f64>(&[]).is_err());
        assert!(papr_db_samples(&[Complex::new(0.0f64, 0.0); 4]).is_err());
        let flat = vec![Complex::new(0.0f64, 1.0); 16];
        assert_abs_diff_eq!(papr_db_samples(&flat).unwrap(), 0.0);
    }

    #[test]
    fn flatness_detects_scaled_tone() {
        let mut w = zc(64, 2);
        assert!(spectrum_flatness(&w).unwrap() < 1e-9);
        let n = w.samples.len();
        let bin = to_fft_bin(w.grid.tone_bins()[5], n);
        let mut spec = w.spectrum();
        spec[bin] = spec[bin] * 2.0;
        let mut buf = spec.clone();
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        w.samples = buf;
        assert_abs_diff_eq!(spectrum_flatness(&w).unwrap(), 20.0 * 2f64.log10(), epsilon = 1e-9);
    }

    #[test]
    fn hann_windowed_waveform_is_not_flat() {
        let mut w = zc(64, 2);
        let n = w.samples.len();
        for (i, s) in w.samples.iter_mut().enumerate() {
            let h = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            *s = *s * h;
        }
        assert!(spectrum_flatness(&w).unwrap() > 0.0);
    }

    #[test]
    fn zadoff_chu_sequences_have_ideal_periodic_autocorrelation() {
        for &len in &[63usize, 64, 127, 139, 256] {
            let p = zadoff_chu_phases(len, 1).unwrap();
            let seq: Vec<Complex<f64>> = p.iter().map(|&v| cis(v)).collect();
            assert!(periodic_autocorrelation_pslr_db(&seq) >= 30.0, "len {len}");
        }
        assert!(zadoff_chu_phases(10, 5).is_err());
    }

    #[test]
    fn fully_occupied_comb_has_sharp_time_autocorrelation() {
        // 63 of 64 bins occupied at oversampling 1.
        let w = zc(63, 1);
        assert!(periodic_autocorrelation_pslr_db(&w.samples) >= 30.0);
    }

    #[test]
    fn generic_over_f32() {
        let w: SoundingWaveform<f32> = gen_multitone(&ToneGrid::new(256, 5e5), 4, &PhaseRule::default()).unwrap();
        assert!(spectrum_flatness(&w).unwrap() < 1e-4);
        assert!(papr_db(&w).unwrap() < 1.0);
    }
}
