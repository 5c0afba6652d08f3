//! Dense-multipath fit on a specular-free residual: exponential delay
//! profile from the averaged power-delay profile, von Mises parameters by
//! matching the normalized spatial covariance at each link end.

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::observation::Observation;
use crate::arrays::{ElementResponse, LinkManifolds};
use crate::channel::{dense_angle_grid, freq_psd, von_mises_weights, AngularProfile, DelayProfile, DenseProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseFit {
    pub profile: DenseProfile,
    pub detected: bool,
    /// Dense power per tone and element pair, in the units of `noise_var`.
    pub dense_power: f64,
    pub diagnostic: Option<String>,
}

/// Significance of the delay-profile peak, in robust standard deviations.
const DETECTION_SIGMAS: f64 = 8.0;
const KAPPA_TABLE: [f64; 10] = [0.0, 0.3, 0.7, 1.5, 3.0, 5.0, 8.0, 13.0, 20.0, 30.0];
const FIT_AZ_STEP_DEG: f64 = 8.0;
const FIT_EL_STEP_DEG: f64 = 15.0;

/// Pair-averaged delay profile of the residuals, scaled so white noise of
/// per-tone variance σ² sits at σ².
pub fn residual_delay_profile(residuals: &[Observation]) -> Result<Vec<f64>> {
    let first = residuals.first().ok_or_else(|| Error::invalid("no residual snapshots"))?;
    let m = first.m_f();
    let sum_w2: f64 = first.taper.iter().map(|w| w * w).sum();
    let mut acc = vec![0.0; m];
    let mut count = 0usize;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for obs in residuals {
        obs.validate()?;
        if obs.m_f() != m || obs.n_tx != first.n_tx || obs.n_rx != first.n_rx {
            return Err(Error::dim("residual snapshots differ in shape"));
        }
        for c in obs.data.chunks_exact(m) {
            buf.copy_from_slice(c);
            ifft.process(&mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += v.norm_sqr();
            }
            count += 1;
        }
    }
    // |unitary IDFT|² / (Σw²/M) = |raw IDFT|² / (M · Σw²/M).
    let scale = 1.0 / (sum_w2 * count as f64);
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

/// Expected delay profile of a unit-power dense component seen through the
/// taper, for onset `tau_bins` and decay `beta` per bin.
pub fn dense_profile_template(tau_bins: f64, beta: f64, taper: &[f64]) -> Result<Vec<f64>> {
    let m = taper.len();
    let lambda = freq_psd::<f64>(&DelayProfile { tau_d_s: tau_bins, beta_d: beta, gamma1: 1.0 }, m, 1.0)?;
    let sum_w2: f64 = taper.iter().map(|w| w * w).sum();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for d in 0..m {
        let c: f64 = (0..m - d).map(|k| taper[k + d] * taper[k]).sum::<f64>() / sum_w2;
        a[d] += lambda[d] * c;
        if d > 0 {
            a[m - d] += lambda[d].conj() * c;
        }
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut a);
    Ok(a.iter().map(|v| v.re).collect())
}

fn moving_average(p: &[f64], half: usize) -> Vec<f64> {
    let m = p.len();
    (0..m)
        .map(|n| (0..=2 * half).map(|i| p[(n + m + i - half) % m]).sum::<f64>() / (2 * half + 1) as f64)
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

struct DelayFit {
    tau_bins: f64,
    beta: f64,
    scale: f64,
    noise_var: f64,
}

/// `ln p − ln(γ·T(τ, β) + σ²)` for `x = [τ, ln β, ln γ, ln σ²]`.
fn log_residual(x: &Vector4<f64>, p: &[f64], taper: &[f64]) -> Result<Vec<f64>> {
    let t = dense_profile_template(x[0], x[1].exp(), taper)?;
    let (g, s) = (x[2].exp(), x[3].exp());
    Ok(p.iter().zip(&t).map(|(pv, tv)| pv.ln() - (g * tv.max(0.0) + s).ln()).collect())
}

fn fit_delay_profile(p: &[f64], taper: &[f64], floor_init: f64, peak: usize) -> Result<DelayFit> {
    let m = p.len();
    let tiny = 1e-12 * p.iter().cloned().fold(0.0, f64::max);
    let p: Vec<f64> = p.iter().map(|v| v.max(tiny)).collect();
    let floor = floor_init.max(tiny);

    // Onset: half-plateau crossing walking back from the peak.
    let q = moving_average(&p, 1);
    let top = q[peak] - floor;
    let mut onset = peak as f64;
    for back in 1..m {
        let n = (peak + m - back) % m;
        let prev = (n + 1) % m;
        if q[n] - floor < 0.5 * top {
            let (a, b) = (q[n] - floor, q[prev] - floor);
            let frac = if b > a { (0.5 * top - a) / (b - a) } else { 0.0 };
            onset = (peak + m - back) as f64 + frac;
            break;
        }
    }
    let onset = onset.rem_euclid(m as f64);

    // Decay: log-linear slope over the part well above the floor.
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 2..m {
        let n = (peak + i) % m;
        let e = p[n] - floor;
        if e < 2.0 * floor || e <= 0.0 {
            break;
        }
        let (x, y) = (i as f64, e.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        cnt += 1.0;
    }
    let slope = if cnt >= 3.0 { (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) } else { -0.1 };
    let beta0 = (-slope).clamp(1e-4, 5.0);
    let t0 = dense_profile_template(onset, beta0, taper)?;
    let t_peak = t0.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let scale0 = (top / t_peak).max(tiny);

    // Levenberg-Marquardt on the log misfit with a central-difference Jacobian.
    let mut x = Vector4::new(onset, beta0.ln(), scale0.ln(), floor.ln());
    let lo_s = tiny.ln();
    let mut r = log_residual(&x, &p, taper)?;
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 1e-3;
    let steps = [1e-3, 1e-5, 1e-5, 1e-5];
    for _ in 0..200 {
        let mut jac = vec![Vector4::zeros(); m];
        for k in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += steps[k];
            xm[k] -= steps[k];
            let rp = log_residual(&xp, &p, taper)?;
            let rm = log_residual(&xm, &p, taper)?;
            for n in 0..m {
                jac[n][k] = (rp[n] - rm[n]) / (2.0 * steps[k]);
            }
        }
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for n in 0..m {
            jtj += jac[n] * jac[n].transpose();
            jtr += jac[n] * r[n];
        }
        let mut improved = false;
        while mu < 1e10 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += mu * (jtj[(k, k)] + 1e-12);
            }
            let Some(dx) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            let mut xn = x + dx;
            xn[0] = xn[0].rem_euclid(m as f64);
            xn[1] = xn[1].clamp(-12.0, 3.0);
            xn[3] = xn[3].max(lo_s);
            let rn = log_residual(&xn, &p, taper)?;
            let cn: f64 = rn.iter().map(|v| v * v).sum();
            if cn < cost {
                let rel = (cost - cn) / cost.max(f64::MIN_POSITIVE);
                x = xn;
                r = rn;
                cost = cn;
                mu = (mu / 3.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            mu *= 5.0;
        }
        if !improved {
            break;
        }
    }
    Ok(DelayFit { tau_bins: x[0], beta: x[1].exp(), scale: x[2].exp(), noise_var: x[3].exp() })
}

/// Spatial sample covariance at one link end, noise-corrected.
fn end_covariance(residuals: &[Observation], rx: bool, noise_var: f64) -> DMatrix<Complex64> {
    let first = &residuals[0];
    let (n_tx, n_rx, m) = (first.n_tx, first.n_rx, first.m_f());
    let n = if rx { n_rx } else { n_tx };
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    let mut count = 0usize;
    for obs in residuals {
        let outer = if rx { n_tx } else { n_rx };
        for o in 0..outer {
            for k in 0..m {
                let v: Vec<Complex64> = (0..n)
                    .map(|i| {
                        let (t, r) = if rx { (o, i) } else { (i, o) };
                        obs.data[(t * n_rx + r) * m + k]
                    })
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        c[(i, j)] += v[i] * v[j].conj();
                    }
                }
                count += 1;
            }
        }
    }
    c /= Complex64::new(count as f64, 0.0);
    let mean_w2 = first.taper.iter().map(|w| w * w).sum::<f64>() / m as f64;
    for i in 0..n {
        c[(i, i)] -= Complex64::new(noise_var * mean_w2, 0.0);
    }
    c
}

/// Per-cell polarimetric outer products `Σ_p b_p b_pᴴ` on one angle grid,
/// so the covariance of any cell weighting is a weighted sum.
struct CellOuter {
    az: Vec<f64>,
    el: Vec<f64>,
    outer: Vec<Complex64>,
    n: usize,
}

impl CellOuter {
    fn new(resp: &[ElementResponse<f64>], az: Vec<f64>, el: Vec<f64>, n: usize) -> Self {
        let g = az.len() * el.len();
        let mut outer = vec![Complex64::new(0.0, 0.0); g * n * n];
        for c in 0..g {
            let b = &resp[c * n..(c + 1) * n];
            let o = &mut outer[c * n * n..(c + 1) * n * n];
            for i in 0..n {
                for j in 0..n {
                    o[i * n + j] = b[i][0] * b[j][0].conj() + b[i][1] * b[j][1].conj();
                }
            }
        }
        CellOuter { az, el, outer, n }
    }

    /// Model covariance under `profile`, scaled to unit trace.
    fn covariance(&self, profile: &AngularProfile) -> Vec<Complex64> {
        let nn = self.n * self.n;
        let w = von_mises_weights(profile, &self.az, &self.el);
        let mut r = vec![Complex64::new(0.0, 0.0); nn];
        for (c, &wc) in w.iter().enumerate() {
            if wc < 1e-12 {
                continue;
            }
            for (acc, v) in r.iter_mut().zip(&self.outer[c * nn..(c + 1) * nn]) {
                *acc += v * wc;
            }
        }
        unit_trace(r, self.n)
    }

    fn misfit(&self, profile: &AngularProfile, target: &[Complex64]) -> f64 {
        self.covariance(profile).iter().zip(target).map(|(a, b)| (a - b).norm_sqr()).sum()
    }
}

fn unit_trace(mut r: Vec<Complex64>, n: usize) -> Vec<Complex64> {
    let tr: f64 = (0..n).map(|i| r[i * n + i].re).sum();
    if tr > 0.0 {
        r.iter_mut().for_each(|v| *v /= tr);
    }
    r
}

/// Von Mises parameters of one link end by matching the normalized spatial
/// covariance: joint search on a coarse grid, then pattern search on the
/// forward-model grid.
fn fit_angular(cov: &DMatrix<Complex64>, coarse: &CellOuter, fine: &CellOuter) -> AngularProfile {
    let n = fine.n;
    let target = unit_trace((0..n * n).map(|k| cov[(k / n, k % n)]).collect(), n);
    let half_pi = std::f64::consts::FRAC_PI_2;
    // A planar array cannot tell a direction from its mirror behind the
    // aperture, so the mean direction is kept in the front half-space.
    let mus: Vec<f64> = (0..=12).map(|i| (-90.0 + 15.0 * i as f64).to_radians()).collect();
    let candidates: Vec<AngularProfile> = KAPPA_TABLE
        .iter()
        .flat_map(|&ka| KAPPA_TABLE.iter().map(move |&ke| (ka, ke)))
        .flat_map(|(ka, ke)| {
            let mus = &mus;
            mus.iter().flat_map(move |&ma| {
                mus.iter().map(move |&me| AngularProfile { mu_az_rad: ma, mu_el_rad: me, kappa_az: ka, kappa_el: ke, amp_az: 1.0, amp_el: 1.0 })
            })
        })
        .collect();
    let scores: Vec<f64> = candidates.par_iter().map(|p| coarse.misfit(p, &target)).collect();
    let mut best = 0;
    for (i, v) in scores.iter().enumerate() {
        if *v < scores[best] {
            best = i;
        }
    }
    let mut p = candidates[best];
    let mut cost = fine.misfit(&p, &target);
    let mut dk = [0.5 * p.kappa_az.max(0.2), 0.5 * p.kappa_el.max(0.2)];
    let mut dmu = 7.5f64.to_radians();
    for _ in 0..60 {
        let mut trials = Vec::with_capacity(8);
        for s in [1.0, -1.0] {
            let mut t = p;
            t.kappa_az = (p.kappa_az + s * dk[0]).max(0.0);
            trials.push(t);
            let mut t = p;
            t.kappa_el = (p.kappa_el + s * dk[1]).max(0.0);
            trials.push(t);
            let mut t = p;
            t.mu_az_rad = (p.mu_az_rad + s * dmu).clamp(-half_pi, half_pi);
            trials.push(t);
            let mut t = p;
            t.mu_el_rad = (p.mu_el_rad + s * dmu).clamp(-half_pi, half_pi);
            trials.push(t);
        }
        let scored: Vec<f64> = trials.par_iter().map(|t| fine.misfit(t, &target)).collect();
        let (i, &c) = scored.iter().enumerate().fold((0, &f64::INFINITY), |a, (i, c)| if c < a.1 { (i, c) } else { a });
        if c < cost {
            cost = c;
            p = trials[i];
        } else {
            dk = dk.map(|d| 0.5 * d);
            dmu *= 0.5;
            if dmu < 1e-4 {
                break;
            }
        }
    }
    p
}

fn fit_grid() -> (Vec<f64>, Vec<f64>) {
    let n_az = (360.0 / FIT_AZ_STEP_DEG).round() as usize;
    let n_el = (180.0 / FIT_EL_STEP_DEG).round() as usize + 1;
    let az = (0..n_az).map(|i| (-180.0 + i as f64 * FIT_AZ_STEP_DEG).to_radians()).collect();
    let el = (0..n_el).map(|j| (-90.0 + j as f64 * FIT_EL_STEP_DEG).to_radians()).collect();
    (az, el)
}

/// Mean diagonal of an end's angular covariance under `profile`, evaluated
/// on the same grid as the forward model.
fn mean_element_power(manifolds: &LinkManifolds<f64>, profile: &AngularProfile, rx: bool) -> Result<f64> {
    let eadf = if rx { &manifolds.rx } else { &manifolds.tx };
    let (az, el) = dense_angle_grid(&eadf.spec);
    let resp = if rx { manifolds.rx_grid(&az, &el)? } else { manifolds.tx_grid(&az, &el)? };
    let w = von_mises_weights(profile, &az, &el);
    let n = eadf.n_elements;
    let total: f64 = w
        .iter()
        .enumerate()
        .map(|(i, wi)| wi * resp[i * n..(i + 1) * n].iter().map(|r| r[0].norm_sqr() + r[1].norm_sqr()).sum::<f64>())
        .sum();
    Ok(total / n as f64)
}

/// Fit the dense component to specular-free residual snapshots.
///
/// Only the product of `γ̄₁` and the angular amplitudes is identifiable, so
/// the amplitudes are returned as 1 and `γ̄₁` carries the power.
pub fn estimate_dense(residuals: &[Observation], manifolds: &LinkManifolds<f64>) -> Result<DenseFit> {
    let p = residual_delay_profile(residuals)?;
    let first = &residuals[0];
    if first.n_rx != manifolds.n_rx() || first.n_tx != manifolds.n_tx() {
        return Err(Error::dim("residual and manifolds disagree in element counts"));
    }
    let m = p.len();
    let delay_step = match first.frequencies_hz.get(1) {
        Some(f1) => 1.0 / ((f1 - first.frequencies_hz[0]) * m as f64),
        None => return Err(Error::invalid("dense fit needs at least two tones")),
    };

    let q = moving_average(&p, 2);
    let base = median(&q);
    let dev: Vec<f64> = q.iter().map(|v| (v - base).abs()).collect();
    let spread = 1.4826 * median(&dev);
    let (peak, top) = q.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let noise_only = |msg: String| DenseFit {
        profile: DenseProfile {
            theta_f: DelayProfile { tau_d_s: 0.0, beta_d: 1.0, gamma1: 0.0 },
            theta_r: AngularProfile::uniform(),
            theta_t: AngularProfile::uniform(),
            noise_var: base.max(0.0),
        },
        detected: false,
        dense_power: 0.0,
        diagnostic: Some(msg),
    };
    if !(top > 0.0) {
        return Ok(noise_only("residual is zero".into()));
    }
    let significance = if spread > 0.0 { (top - base) / spread } else { f64::INFINITY };
    if significance < DETECTION_SIGMAS {
        return Ok(noise_only(format!("no dense component above the noise floor ({significance:.1} robust sigmas)")));
    }

    let floor = {
        let mut s = p.clone();
        s.sort_by(f64::total_cmp);
        s[s.len() / 10]
    };
    let fit = fit_delay_profile(&p, &first.taper, floor, peak)?;
    let template = dense_profile_template(fit.tau_bins, fit.beta, &first.taper)?;
    let dense_power = fit.scale * template.iter().sum::<f64>() / m as f64;

    let (az, el) = fit_grid();
    let ends: Vec<AngularProfile> = [true, false]
        .par_iter()
        .map(|&rx| -> Result<AngularProfile> {
            let eadf = if rx { &manifolds.rx } else { &manifolds.tx };
            let (faz, fel) = dense_angle_grid(&eadf.spec);
            let grid = |a: &[f64], e: &[f64]| if rx { manifolds.rx_grid(a, e) } else { manifolds.tx_grid(a, e) };
            let n = eadf.n_elements;
            let coarse = CellOuter::new(&grid(&az, &el)?, az.clone(), el.clone(), n);
            let fine = CellOuter::new(&grid(&faz, &fel)?, faz, fel, n);
            let cov = end_covariance(residuals, rx, fit.noise_var);
            Ok(fit_angular(&cov, &coarse, &fine))
        })
        .collect::<Result<_>>()?;
    let (theta_r, theta_t) = (ends[0], ends[1]);
    let gain = mean_element_power(manifolds, &theta_r, true)? * mean_element_power(manifolds, &theta_t, false)?;
    if !(gain > 0.0) {
        return Err(Error::Numerical("dense angular fit has zero element power".into()));
    }
    Ok(DenseFit {
        profile: DenseProfile {
            theta_f: DelayProfile { tau_d_s: fit.tau_bins * delay_step, beta_d: fit.beta, gamma1: fit.scale / gain },
            theta_r,
            theta_t,
            noise_var: fit.noise_var,
        },
        detected: true,
        dense_power,
        diagnostic: None,
    })
}
