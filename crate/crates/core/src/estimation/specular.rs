//! Successive specular-path extraction: coarse matched search, least-squares
//! gains, joint refinement, noise-referenced stopping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ambiguity::doppler_search_limit;
use super::model::Problem;
use super::observation::Observation;
use super::result::{EstimationResult, PathEstimate};
use crate::arrays::{ElementResponse, LinkManifolds};
use crate::channel::SpecularPath;
use crate::error::{Error, Result};
use crate::schedule::SwitchSchedule;
use crate::sounder::hann_window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub max_paths: usize,
    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub angle_step_deg: f64,
    /// Zero-padding factor of the coarse delay search.
    pub delay_oversample: usize,
    /// Doppler grid step is `1 / (doppler_oversample × snapshot span)`.
    pub doppler_oversample: usize,
    /// Doppler search half-width; derived from the schedule's ambiguity
    /// function when absent.
    pub doppler_limit_hz: Option<f64>,
    /// Extra margin over the noise-referenced acceptance level.
    pub threshold_margin_db: f64,
    pub max_iterations: usize,
    /// Larger tone grids are cut to their centre block.
    pub max_tones: usize,
    /// Tones whose taper weight is below this are left out of the fit.
    pub min_taper: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            max_paths: 8,
            az_min_deg: -90.0,
            az_max_deg: 90.0,
            el_min_deg: -60.0,
            el_max_deg: 60.0,
            angle_step_deg: 2.0,
            delay_oversample: 4,
            doppler_oversample: 4,
            doppler_limit_hz: None,
            threshold_margin_db: 6.0,
            max_iterations: 100,
            max_tones: 512,
            min_taper: 0.01,
        }
    }
}

/// Orthogonal projector onto the span of one direction's `[H, V]` responses.
fn projector(b: &[ElementResponse<f64>]) -> DMatrix<Complex64> {
    let n = b.len();
    let m = DMatrix::from_fn(n, 2, |e, p| b[e][p]);
    let gram = m.adjoint() * &m;
    let inv = gram.clone().try_inverse().unwrap_or_else(|| {
        // Rank-deficient direction: project on the stronger component.
        let mut d = DMatrix::<Complex64>::zeros(2, 2);
        let k = if gram[(0, 0)].re >= gram[(1, 1)].re { 0 } else { 1 };
        if gram[(k, k)].re > 0.0 {
            d[(k, k)] = Complex64::new(1.0 / gram[(k, k)].re, 0.0);
        }
        d
    });
    &m * inv * m.adjoint()
}

struct AngleGrid {
    az: Vec<f64>,
    el: Vec<f64>,
    projectors: Vec<DMatrix<Complex64>>,
}

impl AngleGrid {
    fn new(responses: Vec<ElementResponse<f64>>, az: Vec<f64>, el: Vec<f64>, n: usize) -> Self {
        let projectors = responses.par_chunks_exact(n).map(projector).collect();
        AngleGrid { az, el, projectors }
    }

    fn angles(&self, cell: usize) -> (f64, f64) {
        (self.az[cell / self.el.len()], self.el[cell % self.el.len()])
    }

    /// `Re tr(P C)` for a Hermitian `C`.
    fn score(p: &DMatrix<Complex64>, c: &DMatrix<Complex64>) -> f64 {
        p.iter().zip(c.transpose().iter()).map(|(a, b)| (a * b).re).sum()
    }

    /// Best cell for each covariance, returned as `(score, cell, which)`;
    /// ties resolve to the lowest cell index, then the lowest `which`.
    fn best(&self, covs: &[DMatrix<Complex64>]) -> (f64, usize, usize) {
        let per_cell: Vec<(f64, usize)> = self
            .projectors
            .par_iter()
            .map(|p| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (w, c) in covs.iter().enumerate() {
                    let s = Self::score(p, c);
                    if s > best.0 {
                        best = (s, w);
                    }
                }
                best
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (cell, (s, w)) in per_cell.into_iter().enumerate() {
            if s > best.0 {
                best = (s, cell, w);
            }
        }
        best
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| (lo + i as f64 * step).to_radians()).collect()
}

/// Specular estimator bound to a manifold pair and a schedule; the search
/// grids are built once and reused across snapshots.
pub struct SpecularEstimator<'a> {
    pub manifolds: &'a LinkManifolds<f64>,
    pub config: EstimatorConfig,
    pub doppler_limit_hz: f64,
    rx_grid: AngleGrid,
    tx_grid: AngleGrid,
}

impl<'a> SpecularEstimator<'a> {
    pub fn new(manifolds: &'a LinkManifolds<f64>, schedule: &SwitchSchedule, config: EstimatorConfig) -> Result<Self> {
        if config.angle_step_deg <= 0.0 || config.az_min_deg >= config.az_max_deg || config.el_min_deg > config.el_max_deg {
            return Err(Error::invalid("invalid angle search grid"));
        }
        if config.delay_oversample == 0 || config.doppler_oversample == 0 {
            return Err(Error::invalid("oversampling factors must be positive"));
        }
        if schedule.codebook.n_tx as usize != manifolds.n_tx() || schedule.codebook.n_rx as usize != manifolds.n_rx() {
            return Err(Error::dim("schedule and manifolds disagree in element counts"));
        }
        let doppler_limit_hz = match config.doppler_limit_hz {
            Some(v) if v >= 0.0 && v.is_finite() => v,
            Some(_) => return Err(Error::invalid("doppler_limit_hz must be non-negative")),
            None => doppler_search_limit(schedule)?,
        };
        let az = grid(config.az_min_deg, config.az_max_deg, config.angle_step_deg);
        let el = grid(config.el_min_deg, config.el_max_deg, config.angle_step_deg);
        let rx_grid = AngleGrid::new(manifolds.rx_grid(&az, &el)?, az.clone(), el.clone(), manifolds.n_rx());
        let tx_grid = AngleGrid::new(manifolds.tx_grid(&az, &el)?, az, el, manifolds.n_tx());
        Ok(SpecularEstimator { manifolds, config, doppler_limit_hz, rx_grid, tx_grid })
    }

    fn n_cells(&self, m_f: usize, span_s: f64) -> f64 {
        let n_delay = (m_f * self.config.delay_oversample) as f64;
        let n_dopp = self.doppler_grid(span_s).len() as f64;
        n_delay * n_dopp * self.rx_grid.projectors.len() as f64 * self.tx_grid.projectors.len() as f64
    }

    fn doppler_grid(&self, span_s: f64) -> Vec<f64> {
        let step = 1.0 / (self.config.doppler_oversample as f64 * span_s);
        let n = (self.doppler_limit_hz / step).floor() as i64;
        (-n..=n).map(|i| i as f64 * step).collect()
    }

    /// Coarse estimate of one new path from the residual.
    fn coarse(&self, problem: &Problem, obs: &Observation, residual: &[Complex64]) -> Result<Option<SpecularPath>> {
        let m = obs.m_f();
        let os = self.config.delay_oversample;
        let n = m * os;
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n);
        let mut profile = vec![0.0; n];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let window: Vec<f64> = hann_window::<f64>(m + 1).into_iter().skip(1).collect();
        for block in residual.chunks_exact(m) {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (k, (r, w)) in block.iter().zip(&window).enumerate() {
                buf[k] = r * w;
            }
            ifft.process(&mut buf);
            for (p, v) in profile.iter_mut().zip(&buf) {
                *p += v.norm_sqr();
            }
        }
        let mut best = (0.0, 0usize);
        for (i, &p) in profile.iter().enumerate() {
            if p > best.0 {
                best = (p, i);
            }
        }
        if best.0 <= 0.0 {
            return Ok(None);
        }
        let df = obs.frequencies_hz.get(1).map_or(1.0, |f1| f1 - obs.frequencies_hz[0]);
        let tau = best.1 as f64 / (n as f64 * df);

        // Matched value of every pair at the chosen delay.
        let sum_w2: f64 = window.iter().zip(&obs.taper).map(|(a, b)| a * b).sum();
        let z: Vec<Complex64> = residual
            .chunks_exact(m)
            .map(|block| {
                block
                    .iter()
                    .zip(&window)
                    .zip(&obs.frequencies_hz)
                    .map(|((r, w), f)| r * Complex64::from_polar(*w, 2.0 * std::f64::consts::PI * (f * tau).rem_euclid(1.0)))
                    .sum::<Complex64>()
                    / sum_w2
            })
            .collect();

        let (n_tx, n_rx) = (obs.n_tx, obs.n_rx);
        let zmat = |nu: f64| {
            DMatrix::from_fn(n_rx, n_tx, |r, t| {
                let i = t * n_rx + r;
                z[i] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (nu * obs.times_s[i]).rem_euclid(1.0))
            })
        };
        let dopplers = self.doppler_grid(obs.span_s);
        let covs: Vec<DMatrix<Complex64>> = dopplers
            .par_iter()
            .map(|&nu| {
                let zm = zmat(nu);
                &zm * zm.adjoint()
            })
            .collect();
        let (_, rx_cell, nu_idx) = self.rx_grid.best(&covs);
        let nu = dopplers[nu_idx];
        let (aoa_az, aoa_el) = self.rx_grid.angles(rx_cell);

        // Transmit side: rows of B_R⁺ Z lie in the span of the transmit responses.
        let br = self.manifolds.rx_response(aoa_az, aoa_el)?;
        let bm = DMatrix::from_fn(n_rx, 2, |e, p| br[e][p]);
        let pinv = (bm.adjoint() * &bm)
            .try_inverse()
            .map(|g| g * bm.adjoint())
            .unwrap_or_else(|| bm.adjoint());
        let g = pinv * zmat(nu);
        let gt = g.transpose();
        let (_, tx_cell, _) = self.tx_grid.best(&[&gt * gt.adjoint()]);
        let (aod_az, aod_el) = self.tx_grid.angles(tx_cell);

        let zero = Complex64::new(0.0, 0.0);
        let mut path = SpecularPath {
            delay_s: tau,
            aoa_az_rad: aoa_az,
            aoa_el_rad: aoa_el,
            aod_az_rad: aod_az,
            aod_el_rad: aod_el,
            gain: [[zero; 2]; 2],
            doppler_hz: nu,
        };
        path.gain = problem.solve_gain(&path, residual)?;
        Ok(Some(path))
    }

    /// Extract paths from one observation.
    pub fn estimate(&self, obs: &Observation) -> Result<EstimationResult> {
        let obs = obs.center_tones(self.config.max_tones);
        let noise_var = obs.noise_variance();
        let obs = obs.whitened(self.config.min_taper);
        let problem = Problem::new(&obs, self.manifolds)?;
        let energy = obs.energy();
        if energy <= 0.0 {
            return Ok(EstimationResult::empty(noise_var));
        }
        let sum_w2: f64 = obs.taper.iter().map(|w| w * w).sum();
        let sum_w4: f64 = obs.taper.iter().map(|w| w.powi(4)).sum();
        let per_dof = noise_var * sum_w4 / sum_w2;
        let threshold = (per_dof * (4.0 + self.n_cells(obs.m_f(), obs.span_s).ln()) * 10f64.powf(self.config.threshold_margin_db / 10.0))
            .max(1e-12 * energy);

        let mut paths: Vec<SpecularPath> = Vec::new();
        let mut cost = energy;
        let mut iterations = 0;
        let mut converged = true;
        let mut residual = obs.data.clone();
        while paths.len() < self.config.max_paths {
            let Some(candidate) = self.coarse(&problem, &obs, &residual)? else { break };
            let mut trial = paths.clone();
            trial.push(candidate);
            let refined = problem.refine(trial, self.config.max_iterations)?;
            iterations += refined.iterations;
            let improvement = cost - refined.cost;
            if !(improvement > threshold) {
                break;
            }
            converged = refined.converged;
            paths = refined.paths;
            cost = refined.cost;
            residual = problem.residual(&paths)?;
        }

        // Per-path contribution: cost increase when the path is removed.
        let model = problem.model(&paths)?;
        let mut estimates = Vec::with_capacity(paths.len());
        for (i, p) in paths.iter().enumerate() {
            let single = problem.model(std::slice::from_ref(p))?;
            let without: f64 = obs
                .data
                .iter()
                .zip(&model)
                .zip(&single)
                .map(|((y, s), q)| (y - (s - q)).norm_sqr())
                .sum();
            estimates.push((i, PathEstimate { path: p.clone(), power: p.power(), improvement: (without - cost).max(0.0) }));
        }
        estimates.sort_by(|a, b| b.1.power.total_cmp(&a.1.power).then(a.0.cmp(&b.0)));
        let log_likelihood = log_likelihood(&residual, &obs.taper, noise_var);
        Ok(EstimationResult {
            paths: estimates.into_iter().map(|(_, e)| e).collect(),
            dense_fit: None,
            noise_var_est: noise_var,
            residual_power: cost,
            log_likelihood,
            iterations,
            converged,
        })
    }

    /// Residual of an observation after removing `paths`, on its full tone grid.
    pub fn residual(&self, obs: &Observation, paths: &[SpecularPath]) -> Result<Observation> {
        let data = Problem::new(obs, self.manifolds)?.residual(paths)?;
        Ok(Observation { data, ..obs.clone() })
    }
}

/// Gaussian log-likelihood of the residual under tapered white noise.
fn log_likelihood(residual: &[Complex64], taper: &[f64], noise_var: f64) -> Option<f64> {
    if !(noise_var > 0.0) {
        return None;
    }
    let m = taper.len();
    let mut ll = 0.0;
    for block in residual.chunks_exact(m) {
        for (r, w) in block.iter().zip(taper) {
            let v = noise_var * w * w;
            if v > 0.0 {
                ll -= (std::f64::consts::PI * v).ln() + r.norm_sqr() / v;
            }
        }
    }
    Some(ll)
}

/// One-shot convenience around [`SpecularEstimator`].
pub fn estimate_specular(
    obs: &Observation,
    manifolds: &LinkManifolds<f64>,
    schedule: &SwitchSchedule,
    config: &EstimatorConfig,
) -> Result<EstimationResult> {
    SpecularEstimator::new(manifolds, schedule, config.clone())?.estimate(obs)
}
