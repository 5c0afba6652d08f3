use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;

use super::cir::CirTensor;
use crate::arrays::LinkManifolds;
use crate::error::{Error, Result};
use crate::num::Real;

/// Which responses to average; `None` means all.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub snapshots: Option<Vec<usize>>,
    /// `(tx, rx)` pairs.
    pub pairs: Option<Vec<(usize, usize)>>,
}

/// Elementwise `|h|²` over the whole tensor, same layout.
pub fn pdp<T: Real>(cir: &CirTensor<T>) -> Vec<T> {
    cir.values.iter().map(|v| v.norm_sqr()).collect()
}

/// Delay profile averaged over the selected snapshots and antenna pairs.
pub fn pdp_average<T: Real>(cir: &CirTensor<T>, selection: &Selection) -> Result<Vec<T>> {
    let snaps: Vec<usize> = selection.snapshots.clone().unwrap_or_else(|| (0..cir.n_snapshots).collect());
    let pairs: Vec<(usize, usize)> = selection
        .pairs
        .clone()
        .unwrap_or_else(|| (0..cir.n_tx).flat_map(|t| (0..cir.n_rx).map(move |r| (t, r))).collect());
    if snaps.is_empty() || pairs.is_empty() {
        return Err(Error::invalid("empty PDP selection"));
    }
    if snaps.iter().any(|&s| s >= cir.n_snapshots) || pairs.iter().any(|&(t, r)| t >= cir.n_tx || r >= cir.n_rx) {
        return Err(Error::invalid("PDP selection index out of range"));
    }
    let mut out = vec![T::zero(); cir.n_delay];
    for &s in &snaps {
        for &(t, r) in &pairs {
            for (o, v) in out.iter_mut().zip(cir.response(s, t, r)) {
                *o += v.norm_sqr();
            }
        }
    }
    let n = T::of((snaps.len() * pairs.len()) as f64);
    out.iter_mut().for_each(|v| *v = *v / n);
    Ok(out)
}

/// Receive-side Bartlett spectrum `Σ_p |b_pᴴ h|² / ‖b_p‖²`, accumulated over
/// snapshots, delays and transmit elements, laid out `[az][el]` and
/// normalized to its maximum.
pub fn pas<T: Real>(cir: &CirTensor<T>, manifolds: &LinkManifolds<T>, az: &[f64], el: &[f64]) -> Result<Vec<T>> {
    if az.is_empty() || el.is_empty() {
        return Err(Error::invalid("PAS grid is empty"));
    }
    if manifolds.n_rx() != cir.n_rx {
        return Err(Error::dim("receive manifold does not match the CIR"));
    }
    let resp = manifolds.rx_grid(az, el)?;
    let n_rx = cir.n_rx;
    let cells = az.len() * el.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut power: Vec<T> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let b = &resp[c * n_rx..(c + 1) * n_rx];
            let mut acc = T::zero();
            for p in 0..2 {
                let norm: T = b.iter().fold(T::zero(), |a, v| a + v[p].norm_sqr());
                if norm <= T::zero() {
                    continue;
                }
                for s in 0..cir.n_snapshots {
                    for t in 0..cir.n_tx {
                        for d in 0..cir.n_delay {
                            let mut y = zero;
                            for (r, br) in b.iter().enumerate() {
                                y += br[p].conj() * cir.values[cir.offset(s, t, r) + d];
                            }
                            acc += y.norm_sqr() / norm;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let max = power.iter().fold(T::zero(), |a, &b| a.max(b));
    if max > T::zero() {
        power.iter_mut().for_each(|v| *v = *v / max);
    }
    Ok(power)
}

fn db(p: f64) -> f64 {
    10.0 * p.max(1e-30).log10()
}

/// CSV with header `delay_ns,power_db`.
pub fn write_pdp_csv(path: &Path, profile: &[f64], delay_step_s: f64) -> Result<()> {
    let mut s = String::from("delay_ns,power_db\n");
    for (i, p) in profile.iter().enumerate() {
        writeln!(s, "{:.6},{:.6}", i as f64 * delay_step_s * 1e9, db(*p)).expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// CSV with header `az_deg,el_deg,power_db`, rows in `[az][el]` order.
pub fn write_pas_csv(path: &Path, power: &[f64], az: &[f64], el: &[f64]) -> Result<()> {
    if power.len() != az.len() * el.len() {
        return Err(Error::dim("PAS grid mismatch"));
    }
    let mut s = String::from("az_deg,el_deg,power_db\n");
    for (i, a) in az.iter().enumerate() {
        for (j, e) in el.iter().enumerate() {
            writeln!(s, "{:.6},{:.6},{:.6}", a.to_degrees(), e.to_degrees(), db(power[i * el.len() + j])).expect("string write");
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdp_basics() {
        let mut c = CirTensor::<f64>::zeros([2, 1, 1, 8], 1e-9, 28e9, 1, String::new());
        assert!(pdp(&c).iter().all(|&v| v == 0.0));
        c.response_mut(0, 0, 0)[0] = Complex::new(1.0, 0.0);
        c.response_mut(1, 0, 0)[0] = Complex::new(0.0, 1.0);
        let p = pdp_average(&c, &Selection::default()).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&v| v == 0.0));
        let empty = Selection { snapshots: Some(vec![]), pairs: None };
        assert!(pdp_average(&c, &empty).is_err());
        let oob = Selection { snapshots: Some(vec![2]), pairs: None };
        assert!(pdp_average(&c, &oob).is_err());
    }
}
