//! Impulse-response tensor, the frequency↔delay transforms and its file format.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{f32_le_at, push_f32_le};
use crate::num::Real;

pub const CIR_MAGIC: &[u8; 8] = b"CIRTNSR1";
pub const CIR_SCHEMA_VERSION: u32 = 1;

/// Periodic Hann taper `0.5·(1 − cos(2πk/M))`, peaking on the centre tone.
pub fn hann_window<T: Real>(m: usize) -> Vec<T> {
    (0..m)
        .map(|k| T::of(0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / m as f64).cos())))
        .collect()
}

/// Mean of the taper: the factor a delta response is scaled by.
pub fn coherent_gain<T: Real>(window: &[T]) -> T {
    window.iter().fold(T::zero(), |a, &b| a + b) / T::of(window.len() as f64)
}

/// `h[n] = (1/M) Σ_k w_k H_k e^{j2πkn/M}` in place.
pub fn windowed_idft<T: Real>(h: &mut [Complex<T>], window: &[T], planner: &mut FftPlanner<T>) {
    let m = h.len();
    for (v, w) in h.iter_mut().zip(window) {
        *v = *v * *w;
    }
    planner.plan_fft_inverse(m).process(h);
    let s = T::one() / T::of(m as f64);
    h.iter_mut().for_each(|v| *v = *v * s);
}

/// Inverse of [`windowed_idft`] up to the taper: returns `w_k H_k`.
pub fn tapered_spectrum<T: Real>(h: &[Complex<T>], planner: &mut FftPlanner<T>) -> Vec<Complex<T>> {
    let mut buf = h.to_vec();
    planner.plan_fft_forward(h.len()).process(&mut buf);
    buf
}

/// Impulse responses `h(s, t, r, τ)` stored C-order `[s][t][r][τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirTensor<T: Real> {
    pub n_snapshots: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_delay: usize,
    pub values: Vec<Complex<T>>,
    pub delay_step_s: f64,
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub n_avg: u32,
    pub schedule_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirHeader {
    pub schema_version: u32,
    /// `[snapshots, tx, rx, delay]`.
    pub dims: [usize; 4],
    pub delay_step_s: f64,
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub n_avg: u32,
    pub schedule_checksum: String,
    pub window: String,
}

impl<T: Real> CirTensor<T> {
    pub fn zeros(dims: [usize; 4], delay_step_s: f64, center_frequency_hz: f64, n_avg: u32, schedule_checksum: String) -> Self {
        CirTensor {
            n_snapshots: dims[0],
            n_tx: dims[1],
            n_rx: dims[2],
            n_delay: dims[3],
            values: vec![Complex::new(T::zero(), T::zero()); dims.iter().product()],
            delay_step_s,
            center_frequency_hz,
            bandwidth_hz: 1.0 / delay_step_s,
            n_avg,
            schedule_checksum,
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n_snapshots, self.n_tx, self.n_rx, self.n_delay]
    }

    pub fn offset(&self, s: usize, t: usize, r: usize) -> usize {
        ((s * self.n_tx + t) * self.n_rx + r) * self.n_delay
    }

    pub fn response(&self, s: usize, t: usize, r: usize) -> &[Complex<T>] {
        let o = self.offset(s, t, r);
        &self.values[o..o + self.n_delay]
    }

    pub fn response_mut(&mut self, s: usize, t: usize, r: usize) -> &mut [Complex<T>] {
        let o = self.offset(s, t, r);
        &mut self.values[o..o + self.n_delay]
    }

    /// Snapshot `s` as a contiguous `[t][r][τ]` slice.
    pub fn snapshot(&self, s: usize) -> &[Complex<T>] {
        let n = self.n_tx * self.n_rx * self.n_delay;
        &self.values[s * n..(s + 1) * n]
    }

    pub fn header(&self) -> CirHeader {
        CirHeader {
            schema_version: CIR_SCHEMA_VERSION,
            dims: self.dims(),
            delay_step_s: self.delay_step_s,
            center_frequency_hz: self.center_frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            n_avg: self.n_avg,
            schedule_checksum: self.schedule_checksum.clone(),
            window: "hann".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.dims().iter().product::<usize>() {
            return Err(Error::dim("CIR payload does not match its dimensions"));
        }
        if self.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("CIR contains non-finite values".into()));
        }
        Ok(())
    }

    /// Serialized file bytes: magic, u64 LE header length, JSON header, f32 I/Q payload.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::with_capacity(16 + header.len() + self.values.len() * 8);
        out.extend_from_slice(CIR_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            push_f32_le(&mut out, v.re.as_f64());
            push_f32_le(&mut out, v.im.as_f64());
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CIR_MAGIC {
            return Err(Error::Format("not a CIR tensor file".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        if bytes.len() < 16 + hlen {
            return Err(Error::Format("truncated CIR header".into()));
        }
        let h: CirHeader = serde_json::from_slice(&bytes[16..16 + hlen]).map_err(|e| Error::Format(format!("CIR header: {e}")))?;
        if h.schema_version != CIR_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported CIR schema {}", h.schema_version)));
        }
        if h.window != "hann" {
            return Err(Error::Format(format!("unsupported window {:?}", h.window)));
        }
        if !(h.delay_step_s > 0.0 && h.delay_step_s.is_finite()) {
            return Err(Error::Format("CIR delay step must be positive".into()));
        }
        let n: usize = h
            .dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format("CIR dimensions overflow".into()))?;
        let payload = &bytes[16 + hlen..];
        if payload.len() != n * 8 {
            return Err(Error::Format(format!("CIR payload has {} bytes, expected {}", payload.len(), n * 8)));
        }
        let values = (0..n).map(|i| Complex::new(T::of(f32_le_at(payload, 2 * i)), T::of(f32_le_at(payload, 2 * i + 1)))).collect();
        let cir = CirTensor {
            n_snapshots: h.dims[0],
            n_tx: h.dims[1],
            n_rx: h.dims[2],
            n_delay: h.dims[3],
            values,
            delay_step_s: h.delay_step_s,
            center_frequency_hz: h.center_frequency_hz,
            bandwidth_hz: h.bandwidth_hz,
            n_avg: h.n_avg,
            schedule_checksum: h.schedule_checksum,
        };
        cir.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cir)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
