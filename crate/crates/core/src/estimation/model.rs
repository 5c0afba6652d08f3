//! Specular data model on an observation, its normal equations and the
//! damped Gauss-Newton refinement.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;

use super::observation::Observation;
use crate::arrays::LinkManifolds;
use crate::channel::{bilinear, SpecularPath};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const EL_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-6;
/// Real parameters per path: delay, four angles, Doppler, eight gain components.
pub(crate) const N_PARAMS: usize = 14;

/// Per-path quantities shared by model evaluation and derivatives.
struct PathTerms {
    /// `w_k e^{−j2πf_kτ}`.
    base: Vec<Complex64>,
    /// `e^{j2πν t}` per pair.
    doppler: Vec<Complex64>,
    /// Per pair: coupling `b_Rᵀ Γ b_T`, its four angular derivatives, and the
    /// four gain basis couplings `b_R[p] b_T[q]`.
    coupling: Vec<[Complex64; 9]>,
}

pub struct Problem<'a> {
    pub obs: &'a Observation,
    pub manifolds: &'a LinkManifolds<f64>,
    /// Tone offsets in GHz.
    f_ghz: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub paths: Vec<SpecularPath>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl<'a> Problem<'a> {
    pub fn new(obs: &'a Observation, manifolds: &'a LinkManifolds<f64>) -> Result<Self> {
        obs.validate()?;
        if obs.n_tx != manifolds.n_tx() || obs.n_rx != manifolds.n_rx() {
            return Err(Error::dim("observation and manifolds disagree in element counts"));
        }
        Ok(Problem { obs, manifolds, f_ghz: obs.frequencies_hz.iter().map(|f| f * 1e-9).collect() })
    }

    fn terms(&self, p: &SpecularPath) -> Result<PathTerms> {
        let base = self
            .obs
            .frequencies_hz
            .iter()
            .zip(&self.obs.taper)
            .map(|(f, w)| Complex64::from_polar(*w, -TWO_PI * (f * p.delay_s).rem_euclid(1.0)))
            .collect();
        let doppler = self
            .obs
            .times_s
            .iter()
            .map(|t| Complex64::from_polar(1.0, TWO_PI * (p.doppler_hz * t).rem_euclid(1.0)))
            .collect();
        let gt = self.manifolds.tx_gradient(p.aod_az_rad, p.aod_el_rad)?;
        let gr = self.manifolds.rx_gradient(p.aoa_az_rad, p.aoa_el_rad)?;
        let g = &p.gain;
        let mut coupling = Vec::with_capacity(self.obs.n_pairs());
        for t in 0..self.obs.n_tx {
            for r in 0..self.obs.n_rx {
                let (bt, br) = (&gt.value[t], &gr.value[r]);
                coupling.push([
                    bilinear(br, g, bt),
                    bilinear(&gr.d_az[r], g, bt),
                    bilinear(&gr.d_el[r], g, bt),
                    bilinear(br, g, &gt.d_az[t]),
                    bilinear(br, g, &gt.d_el[t]),
                    br[0] * bt[0],
                    br[0] * bt[1],
                    br[1] * bt[0],
                    br[1] * bt[1],
                ]);
            }
        }
        Ok(PathTerms { base, doppler, coupling })
    }

    fn model_from_terms(&self, terms: &[PathTerms]) -> Vec<Complex64> {
        let m = self.obs.m_f();
        let mut out = vec![Complex64::new(0.0, 0.0); self.obs.data.len()];
        for pt in terms {
            for (i, block) in out.chunks_exact_mut(m).enumerate() {
                let a = pt.coupling[i][0] * pt.doppler[i];
                for (o, b) in block.iter_mut().zip(&pt.base) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn residual(&self, paths: &[SpecularPath]) -> Result<Vec<Complex64>> {
        let terms = paths.iter().map(|p| self.terms(p)).collect::<Result<Vec<_>>>()?;
        let model = self.model_from_terms(&terms);
        Ok(self.obs.data.iter().zip(&model).map(|(y, s)| y - s).collect())
    }

    pub fn model(&self, paths: &[SpecularPath]) -> Result<Vec<Complex64>> {
        let terms = paths.iter().map(|p| self.terms(p)).collect::<Result<Vec<_>>>()?;
        Ok(self.model_from_terms(&terms))
    }

    /// Least-squares polarimetric gain of `path` (angles, delay and Doppler
    /// fixed) against `residual`.
    pub fn solve_gain(&self, path: &SpecularPath, residual: &[Complex64]) -> Result<[[Complex64; 2]; 2]> {
        let pt = self.terms(path)?;
        let m = self.obs.m_f();
        let k0: f64 = pt.base.iter().map(|b| b.norm_sqr()).sum();
        let mut gram = Matrix4::<Complex64>::zeros();
        let mut rhs = Vector4::<Complex64>::zeros();
        for (i, block) in residual.chunks_exact(m).enumerate() {
            let proj: Complex64 = block.iter().zip(&pt.base).map(|(r, b)| b.conj() * r).sum();
            let u: [Complex64; 4] = std::array::from_fn(|q| pt.coupling[i][5 + q] * pt.doppler[i]);
            for a in 0..4 {
                rhs[a] += u[a].conj() * proj;
                for b in 0..4 {
                    gram[(a, b)] += u[a].conj() * u[b] * k0;
                }
            }
        }
        let scale = (0..4).map(|a| gram[(a, a)].re).fold(0.0, f64::max);
        if scale <= 0.0 {
            return Err(Error::Numerical("path has no response on the observation".into()));
        }
        for a in 0..4 {
            gram[(a, a)] += Complex64::new(1e-12 * scale, 0.0);
        }
        let x = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular gain normal equations".into()))?;
        Ok([[x[0], x[1]], [x[2], x[3]]])
    }

    /// `Re(JᴴJ)` and `Re(Jᴴ r)` for the packed parameters of `paths`.
    fn normal_equations(&self, terms: &[PathTerms], residual: &[Complex64]) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.obs.m_f();
        let n_p = terms.len() * N_PARAMS;
        let span = self.obs.span_s;
        // K[ℓ][ℓ'][n] = Σ_k conj(base_ℓ) base_ℓ' f^n
        let l = terms.len();
        let mut kk = vec![[Complex64::new(0.0, 0.0); 3]; l * l];
        for a in 0..l {
            for b in 0..l {
                let mut s = [Complex64::new(0.0, 0.0); 3];
                for ((x, y), f) in terms[a].base.iter().zip(&terms[b].base).zip(&self.f_ghz) {
                    let v = x.conj() * y;
                    s[0] += v;
                    s[1] += v * f;
                    s[2] += v * f * f;
                }
                kk[a * l + b] = s;
            }
        }
        let mut ata = DMatrix::<f64>::zeros(n_p, n_p);
        let mut atb = DVector::<f64>::zeros(n_p);
        let j = Complex64::new(0.0, 1.0);
        let mut alpha = vec![Complex64::new(0.0, 0.0); n_p];
        let mut order = vec![0usize; n_p];
        for i in 0..self.obs.n_pairs() {
            let t_i = self.obs.times_s[i];
            for (li, pt) in terms.iter().enumerate() {
                let c = pt.coupling[i];
                let e = pt.doppler[i];
                let o = li * N_PARAMS;
                alpha[o] = c[0] * e * Complex64::new(0.0, -TWO_PI);
                order[o] = 1;
                for q in 0..4 {
                    alpha[o + 1 + q] = c[1 + q] * e;
                }
                alpha[o + 5] = c[0] * e * j * (TWO_PI * t_i / span);
                for q in 0..4 {
                    alpha[o + 6 + 2 * q] = c[5 + q] * e;
                    alpha[o + 7 + 2 * q] = c[5 + q] * e * j;
                }
            }
            // projections of the residual onto each path's delay basis
            let block = &residual[i * m..(i + 1) * m];
            let mut rp = vec![[Complex64::new(0.0, 0.0); 2]; l];
            for (li, pt) in terms.iter().enumerate() {
                for ((b, r), f) in pt.base.iter().zip(block).zip(&self.f_ghz) {
                    let v = b.conj() * r;
                    rp[li][0] += v;
                    rp[li][1] += v * f;
                }
            }
            for a in 0..n_p {
                let la = a / N_PARAMS;
                let ca = alpha[a].conj();
                atb[a] += (ca * rp[la][order[a]]).re;
                for b in a..n_p {
                    let lb = b / N_PARAMS;
                    let v = (ca * alpha[b] * kk[la * l + lb][order[a] + order[b]]).re;
                    ata[(a, b)] += v;
                }
            }
        }
        for a in 0..n_p {
            for b in 0..a {
                ata[(a, b)] = ata[(b, a)];
            }
        }
        (ata, atb)
    }

    fn apply_step(&self, paths: &[SpecularPath], step: &DVector<f64>) -> Vec<SpecularPath> {
        let span = self.obs.span_s;
        paths
            .iter()
            .enumerate()
            .map(|(li, p)| {
                let d = &step.as_slice()[li * N_PARAMS..(li + 1) * N_PARAMS];
                let wrap = |a: f64| (a + std::f64::consts::PI).rem_euclid(TWO_PI) - std::f64::consts::PI;
                let mut q = p.clone();
                q.delay_s = (p.delay_s + d[0] * 1e-9).max(0.0);
                q.aoa_az_rad = wrap(p.aoa_az_rad + d[1]);
                q.aoa_el_rad = (p.aoa_el_rad + d[2]).clamp(-EL_LIMIT, EL_LIMIT);
                q.aod_az_rad = wrap(p.aod_az_rad + d[3]);
                q.aod_el_rad = (p.aod_el_rad + d[4]).clamp(-EL_LIMIT, EL_LIMIT);
                q.doppler_hz = p.doppler_hz + d[5] / span;
                for k in 0..4 {
                    q.gain[k / 2][k % 2] += Complex64::new(d[6 + 2 * k], d[7 + 2 * k]);
                }
                q
            })
            .collect()
    }

    /// Joint Levenberg-Marquardt refinement of every path parameter.
    pub fn refine(&self, paths: Vec<SpecularPath>, max_iterations: usize) -> Result<Refinement> {
        let cost_of = |r: &[Complex64]| r.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let mut paths = paths;
        let mut terms = paths.iter().map(|p| self.terms(p)).collect::<Result<Vec<_>>>()?;
        let mut residual: Vec<Complex64> =
            self.obs.data.iter().zip(self.model_from_terms(&terms)).map(|(y, s)| y - s).collect();
        let mut cost = cost_of(&residual);
        if paths.is_empty() {
            return Ok(Refinement { paths, cost, iterations: 0, converged: true });
        }
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut iterations = 0;
        let floor = 1e-28 * self.obs.energy().max(f64::MIN_POSITIVE);
        while iterations < max_iterations {
            iterations += 1;
            let (ata, atb) = self.normal_equations(&terms, &residual);
            let mut improved = false;
            while lambda < 1e12 {
                let mut a = ata.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += lambda * ata[(d, d)].max(1e-300) + 1e-300;
                }
                let Some(step) = a.clone().cholesky().map(|c| c.solve(&atb)).or_else(|| a.lu().solve(&atb)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = self.apply_step(&paths, &step);
                let trial_terms = match trial.iter().map(|p| self.terms(p)).collect::<Result<Vec<_>>>() {
                    Ok(t) => t,
                    Err(_) => {
                        lambda *= 10.0;
                        continue;
                    }
                };
                let trial_res: Vec<Complex64> =
                    self.obs.data.iter().zip(self.model_from_terms(&trial_terms)).map(|(y, s)| y - s).collect();
                let trial_cost = cost_of(&trial_res);
                if trial_cost <= cost {
                    let gain = cost - trial_cost;
                    paths = trial;
                    terms = trial_terms;
                    residual = trial_res;
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if gain <= 1e-12 * cost + floor {
                        converged = true;
                    }
                    break;
                }
                lambda *= 5.0;
            }
            if !improved {
                // No descent direction left at any damping: a stationary point.
                converged = true;
            }
            if converged {
                break;
            }
        }
        if !cost.is_finite() {
            return Err(Error::Numerical("refinement diverged".into()));
        }
        Ok(Refinement { paths, cost, iterations, converged })
    }
}
