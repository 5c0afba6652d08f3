//! Dense multipath: sampled PSD, von Mises angular weights, Kronecker covariance.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use rand::Rng;

use super::scene::{AngularProfile, DelayProfile, DenseProfile};
use crate::arrays::{ElementResponse, LinkManifolds};
use crate::error::{Error, Result};
use crate::num::{cis, Real};
use crate::rng::complex_gaussian;

/// Sampled frequency-domain PSD of the exponential delay profile:
/// `λ_k = (γ̄₁/M_f) · e^{−j2πk·τ_d/M_f} / (β_d + j2πk/M_f)`, with `τ_d`
/// converted to delay bins of width `delay_step_s` (= 1/bandwidth).
pub fn freq_psd<T: Real>(theta_f: &DelayProfile, m_f: usize, delay_step_s: f64) -> Result<Vec<Complex<T>>> {
    if !(theta_f.beta_d > 0.0 && theta_f.beta_d.is_finite()) {
        return Err(Error::invalid("beta_d must be positive"));
    }
    if m_f == 0 || !(delay_step_s > 0.0) {
        return Err(Error::invalid("freq_psd needs m_f ≥ 1 and a positive delay step"));
    }
    let m = m_f as f64;
    let tau_bins = theta_f.tau_d_s / delay_step_s;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((0..m_f)
        .map(|k| {
            let k = k as f64;
            let num = cis(T::of(-two_pi * (k * tau_bins / m).rem_euclid(1.0))) * T::of(theta_f.gamma1 / m);
            num / Complex::new(T::of(theta_f.beta_d), T::of(two_pi * k / m))
        })
        .collect())
}

/// Hermitian Toeplitz matrix with first column `λ`.
pub fn toeplitz_hermitian(lambda: &[Complex64]) -> DMatrix<Complex64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| if i >= j { lambda[i - j] } else { lambda[j - i].conj() })
}

/// Delay profile implied by `λ`: unitary inverse DFT of the Hermitian-wrapped
/// PSD (`λ_{−k} = λ_k*`), real part.
pub fn psd_delay_profile(lambda: &[Complex64]) -> Vec<f64> {
    let m = lambda.len();
    let mut spec: Vec<Complex64> = (0..m).map(|k| if k <= m / 2 { lambda[k] } else { lambda[m - k].conj() }).collect();
    rustfft::FftPlanner::new().plan_fft_inverse(m).process(&mut spec);
    spec.iter().map(|v| v.re).collect()
}

/// Discrete von Mises weights on an (az, el) grid, laid out `[az][el]`,
/// normalized to sum `amp_az · amp_el`.
pub fn von_mises_weights(profile: &AngularProfile, az: &[f64], el: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = az
        .iter()
        .flat_map(|&a| {
            el.iter().map(move |&e| {
                (profile.kappa_az * ((a - profile.mu_az_rad).cos() - 1.0)).exp()
                    * (profile.kappa_el * ((e - profile.mu_el_rad).cos() - 1.0)).exp()
            })
        })
        .collect();
    let total: f64 = w.iter().sum();
    let scale = profile.amp_az * profile.amp_el / total;
    w.iter_mut().for_each(|v| *v *= scale);
    w
}

/// `Σ_i Δ_i Σ_p b_{i,p} b_{i,p}^H` over grid responses laid out `[cell][element]`.
pub fn angular_covariance(weights: &[f64], responses: &[ElementResponse<f64>], n_elements: usize) -> Result<DMatrix<Complex64>> {
    if responses.len() != weights.len() * n_elements {
        return Err(Error::dim("angular weights and manifold grid disagree"));
    }
    let mut b = DMatrix::<Complex64>::zeros(n_elements, 2 * weights.len());
    for (i, w) in weights.iter().enumerate() {
        let s = w.sqrt();
        for e in 0..n_elements {
            let r = responses[i * n_elements + e];
            b[(e, 2 * i)] = r[0] * s;
            b[(e, 2 * i + 1)] = r[1] * s;
        }
    }
    Ok(&b * b.adjoint())
}

/// Angle grid used for the dense angular integration: the manifold's own
/// azimuth nodes and elevation nodes.
pub fn dense_angle_grid(spec: &crate::arrays::GridSpec) -> (Vec<f64>, Vec<f64>) {
    let az = (0..spec.n_az()).map(|i| spec.az_deg(i).to_radians()).collect();
    let el = (0..spec.n_el()).map(|j| spec.el_deg(j).to_radians()).collect();
    (az, el)
}

#[derive(Debug, Clone)]
struct Factor {
    eigenvalues: Vec<f64>,
    sqrt: DMatrix<Complex64>,
}

fn factorize(m: &DMatrix<Complex64>, clipped: &mut usize) -> Result<Factor> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.clone().symmetric_eigen();
    let trace: f64 = herm.diagonal().iter().map(|v| v.re).sum();
    let tol = 1e-10 * trace.abs().max(f64::MIN_POSITIVE);
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &l in eig.eigenvalues.iter() {
        if !l.is_finite() {
            return Err(Error::Numerical("non-finite eigenvalue in covariance factor".into()));
        }
        if l < -tol {
            return Err(Error::Numerical(format!("covariance factor is not positive semidefinite (eigenvalue {l:e})")));
        }
        if l < 0.0 {
            *clipped += 1;
        }
        vals.push(l.max(0.0));
    }
    let mut sqrt = eig.eigenvectors.clone();
    for (j, l) in vals.iter().enumerate() {
        let s = Complex64::new(l.sqrt(), 0.0);
        sqrt.column_mut(j).iter_mut().for_each(|v| *v *= s);
    }
    Ok(Factor { eigenvalues: vals, sqrt })
}

/// Applies `A ⊗ B ⊗ C` to `x` indexed `a·(n_b·n_c) + b·n_c + c`.
fn kron3_apply(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, c: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let (na, nb, nc) = (a.nrows(), b.nrows(), c.nrows());
    let z = Complex64::new(0.0, 0.0);
    // along c
    let mut y1 = vec![z; na * nb * nc];
    for ab in 0..na * nb {
        for i in 0..nc {
            y1[ab * nc + i] = (0..nc).map(|j| c[(i, j)] * x[ab * nc + j]).sum();
        }
    }
    // along b
    let mut y2 = vec![z; na * nb * nc];
    for ai in 0..na {
        for i in 0..nb {
            for k in 0..nc {
                y2[(ai * nb + i) * nc + k] = (0..nb).map(|j| b[(i, j)] * y1[(ai * nb + j) * nc + k]).sum();
            }
        }
    }
    // along a
    let mut y3 = vec![z; na * nb * nc];
    for i in 0..na {
        for bk in 0..nb * nc {
            y3[i * nb * nc + bk] = (0..na).map(|j| a[(i, j)] * y2[j * nb * nc + bk]).sum();
        }
    }
    y3
}

/// `R_dense = R_R ⊗ R_T ⊗ R_F`, kept in factored form. Vectors are indexed
/// `r·(M_T·M_f) + t·M_f + f`.
#[derive(Debug, Clone)]
pub struct DenseCovariance {
    pub r_r: DMatrix<Complex64>,
    pub r_t: DMatrix<Complex64>,
    pub r_f: DMatrix<Complex64>,
    /// Number of slightly negative factor eigenvalues clipped to zero.
    pub clipped_eigenvalues: usize,
    factors: [Factor; 3],
}

impl DenseCovariance {
    pub fn from_factors(r_r: DMatrix<Complex64>, r_t: DMatrix<Complex64>, r_f: DMatrix<Complex64>) -> Result<Self> {
        for m in [&r_r, &r_t, &r_f] {
            if !m.is_square() || m.nrows() == 0 {
                return Err(Error::dim("covariance factors must be non-empty square matrices"));
            }
        }
        let mut clipped = 0;
        let factors = [factorize(&r_r, &mut clipped)?, factorize(&r_t, &mut clipped)?, factorize(&r_f, &mut clipped)?];
        Ok(DenseCovariance { r_r, r_t, r_f, clipped_eigenvalues: clipped, factors })
    }

    /// `(M_R, M_T, M_f)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.r_r.nrows(), self.r_t.nrows(), self.r_f.nrows())
    }

    pub fn len(&self) -> usize {
        let (a, b, c) = self.dims();
        a * b * c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.len() {
            return Err(Error::dim(format!("vector of length {} for operator of size {}", x.len(), self.len())));
        }
        Ok(kron3_apply(&self.r_r, &self.r_t, &self.r_f, x))
    }

    /// All eigenvalues, as products of factor eigenvalues, in index order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let [a, b, c] = &self.factors;
        a.eigenvalues
            .iter()
            .flat_map(|x| b.eigenvalues.iter().flat_map(move |y| c.eigenvalues.iter().map(move |z| x * y * z)))
            .collect()
    }

    pub fn trace(&self) -> f64 {
        let t = |m: &DMatrix<Complex64>| m.diagonal().iter().map(|v| v.re).sum::<f64>();
        t(&self.r_r) * t(&self.r_t) * t(&self.r_f)
    }

    /// One draw from `CN(0, R_dense)`.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        let w: Vec<Complex64> = (0..self.len()).map(|_| complex_gaussian(rng, 1.0)).collect();
        let [a, b, c] = &self.factors;
        kron3_apply(&a.sqrt, &b.sqrt, &c.sqrt, &w)
    }

    /// Materialized matrix, for small cases and checks.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.r_r.kronecker(&self.r_t).kronecker(&self.r_f)
    }
}

/// Covariance of the dense component seen through `manifolds` on `m_f` tones.
pub fn dense_covariance(
    dense: &DenseProfile,
    manifolds: &LinkManifolds<f64>,
    m_f: usize,
    delay_step_s: f64,
) -> Result<DenseCovariance> {
    dense.validate()?;
    let lambda = freq_psd::<f64>(&dense.theta_f, m_f, delay_step_s)?;
    let r_f = toeplitz_hermitian(&lambda);
    let end = |profile: &AngularProfile, rx: bool| -> Result<DMatrix<Complex64>> {
        let eadf = if rx { &manifolds.rx } else { &manifolds.tx };
        let (az, el) = dense_angle_grid(&eadf.spec);
        let resp = if rx { manifolds.rx_grid(&az, &el)? } else { manifolds.tx_grid(&az, &el)? };
        angular_covariance(&von_mises_weights(profile, &az, &el), &resp, eadf.n_elements)
    };
    DenseCovariance::from_factors(end(&dense.theta_r, true)?, end(&dense.theta_t, false)?, r_f)
}
