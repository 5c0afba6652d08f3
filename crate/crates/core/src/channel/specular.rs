use num_complex::Complex;

use super::scene::SpecularPath;
use crate::arrays::{ElementResponse, LinkManifolds};
use crate::error::Result;
use crate::num::{cis, Real};

/// `b_Rᵀ Γ b_T` for one element pair.
#[inline]
pub(crate) fn bilinear<T: Real>(rx: &ElementResponse<T>, gain: &[[Complex<T>; 2]; 2], tx: &ElementResponse<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for p in 0..2 {
        acc += rx[p] * (gain[p][0] * tx[0] + gain[p][1] * tx[1]);
    }
    acc
}

pub(crate) fn gain_as<T: Real>(p: &SpecularPath) -> [[Complex<T>; 2]; 2] {
    p.gain.map(|row| row.map(|g| Complex::new(T::of(g.re), T::of(g.im))))
}

/// Array coupling of one path for every element pair, laid out `[t][r]`.
pub fn path_coupling<T: Real>(path: &SpecularPath, manifolds: &LinkManifolds<T>) -> Result<Vec<Complex<T>>> {
    let bt = manifolds.tx_response(path.aod_az_rad, path.aod_el_rad)?;
    let br = manifolds.rx_response(path.aoa_az_rad, path.aoa_el_rad)?;
    let g = gain_as::<T>(path);
    Ok(bt.iter().flat_map(|t| br.iter().map(move |r| bilinear(r, &g, t))).collect())
}

/// `e^{−j2πfτ}` over the tone offsets.
pub fn delay_phasors<T: Real>(delay_s: f64, frequencies_hz: &[f64]) -> Vec<Complex<T>> {
    frequencies_hz
        .iter()
        .map(|f| cis(T::of(-2.0 * std::f64::consts::PI * (f * delay_s).rem_euclid(1.0))))
        .collect()
}

/// Doppler phasor `e^{j2πνt}`.
pub fn doppler_phasor<T: Real>(doppler_hz: f64, time_s: f64) -> Complex<T> {
    cis(T::of(2.0 * std::f64::consts::PI * (doppler_hz * time_s).rem_euclid(1.0)))
}

/// Specular transfer function for every (t, r, f) at one instant, laid out
/// `[t][r][f]`: `Σ_ℓ b_Rᵀ Γ_ℓ b_T · e^{−j2πfτ_ℓ} · e^{j2πν_ℓ t}`.
pub fn specular_response<T: Real>(
    paths: &[SpecularPath],
    manifolds: &LinkManifolds<T>,
    frequencies_hz: &[f64],
    time_s: f64,
) -> Result<Vec<Complex<T>>> {
    let m_f = frequencies_hz.len();
    let mut out = vec![Complex::new(T::zero(), T::zero()); manifolds.n_tx() * manifolds.n_rx() * m_f];
    for p in paths {
        p.validate()?;
        let c = path_coupling(p, manifolds)?;
        let d = delay_phasors::<T>(p.delay_s, frequencies_hz);
        let nu = doppler_phasor::<T>(p.doppler_hz, time_s);
        for (block, ci) in out.chunks_exact_mut(m_f).zip(&c) {
            let a = *ci * nu;
            for (o, di) in block.iter_mut().zip(&d) {
                *o += a * *di;
            }
        }
    }
    Ok(out)
}
