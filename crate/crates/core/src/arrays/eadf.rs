//! Effective aperture distribution function: a 2-D Fourier compression of the
//! sampled element patterns that evaluates the array response at any angle.

use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::pattern::{ElevationExtension, GridSpec, PatternGrid};
use crate::error::{Error, Result};
use crate::num::{cis, Real};

pub const EADF_CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truncation {
    /// Keep every coefficient; exact at the grid nodes.
    Full,
    /// Keep azimuth orders `|m| ≤ az` and elevation orders `|n| ≤ el`.
    Orders { az: usize, el: usize },
    /// Smallest order pair whose discarded energy stays below `db` (relative).
    MaxErrorDb { db: f64 },
}

/// EADF coefficients stored `[element][pol][freq][m][n]` for
/// `m ∈ [-order_az, order_az]`, `n ∈ [-order_el, order_el]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eadf<T: Real> {
    pub spec: GridSpec,
    pub n_elements: usize,
    pub order_az: usize,
    pub order_el: usize,
    pub coefficients: Vec<Complex<T>>,
    /// Relative Frobenius error of the reconstruction at the source nodes, in dB.
    pub reconstruction_error_db: f64,
    pub source_checksum: String,
}

/// Array response of one element: `[H, V]` field components.
pub type ElementResponse<T> = [Complex<T>; 2];

struct Extended {
    n_az: usize,
    n_el_ext: usize,
}

fn extended_dims(spec: &GridSpec) -> Result<Extended> {
    spec.validate()?;
    if !spec.covers_full_sphere() {
        return Err(Error::invalid("EADF needs a pattern grid covering elevations -90° to 90°"));
    }
    let n_az = spec.n_az();
    if n_az % 2 != 0 {
        return Err(Error::invalid("EADF needs an even number of azimuth samples"));
    }
    Ok(Extended { n_az, n_el_ext: 2 * (spec.n_el() - 1) })
}

fn extend_slice<T: Real>(src: &[Complex<T>], spec: &GridSpec, ext: &Extended) -> Vec<Complex<T>> {
    let (n_az, n_el) = (ext.n_az, spec.n_el());
    let sign = match spec.elevation_extension {
        ElevationExtension::Mirrored => T::one(),
        ElevationExtension::MirroredFlipped => -T::one(),
    };
    let mut out = vec![Complex::new(T::zero(), T::zero()); ext.n_el_ext * n_az];
    for j in 0..ext.n_el_ext {
        for i in 0..n_az {
            out[j * n_az + i] = if j < n_el {
                src[j * n_az + i]
            } else {
                src[(ext.n_el_ext - j) * n_az + (i + n_az / 2) % n_az] * sign
            };
        }
    }
    out
}

/// In-place 2-D transform of a row-major `rows × cols` array.
fn fft2<T: Real>(data: &mut [Complex<T>], rows: usize, cols: usize, inverse: bool, planner: &mut FftPlanner<T>) {
    let row_fft = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    for r in data.chunks_exact_mut(cols) {
        row_fft.process(r);
    }
    let col_fft = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    let mut col = vec![Complex::new(T::zero(), T::zero()); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Weight applied to order `k` when keeping orders up to `order` of an
/// `n`-point spectrum: the Nyquist bin is split evenly between ±n/2.
fn nyquist_weight(k: i64, order: usize, n: usize) -> f64 {
    if n % 2 == 0 && order == n / 2 && k.unsigned_abs() as usize == n / 2 {
        0.5
    } else {
        1.0
    }
}

fn spectrum_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

pub fn grid_checksum<T: Real>(grid: &PatternGrid<T>) -> String {
    let mut bytes = serde_json::to_vec(&grid.spec).expect("serializable");
    bytes.extend_from_slice(&(grid.n_elements as u64).to_le_bytes());
    for g in &grid.gains {
        bytes.extend_from_slice(&g.re.as_f64().to_le_bytes());
        bytes.extend_from_slice(&g.im.as_f64().to_le_bytes());
    }
    crate::io::sha256_hex(&bytes)
}

/// Discarded-energy fraction (on the extended grid) for each order pair.
fn choose_orders(spectra: &[Vec<f64>], ext: &Extended, bound_db: f64) -> (usize, usize) {
    let (na, ne) = (ext.n_az, ext.n_el_ext);
    // Accumulate |F|² over all slices into one power map.
    let mut power = vec![0.0; na * ne];
    for s in spectra {
        for (p, v) in power.iter_mut().zip(s) {
            *p += v;
        }
    }
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return (0, 0);
    }
    let limit = total * 10f64.powf(bound_db / 10.0);
    let kept = |ka: usize, ke: usize| -> f64 {
        let mut s = 0.0;
        for n in -(ke as i64)..=ke as i64 {
            for m in -(ka as i64)..=ka as i64 {
                let w = nyquist_weight(m, ka, na) * nyquist_weight(n, ke, ne);
                s += w * power[spectrum_index(n, ne) * na + spectrum_index(m, na)];
            }
        }
        s
    };
    let mut best = (na / 2, ne / 2);
    let mut best_cost = usize::MAX;
    let mut ke = ne / 2;
    // Two-pointer sweep: as the azimuth order grows the needed elevation order shrinks.
    for ka in 0..=na / 2 {
        while ke > 0 && total - kept(ka, ke - 1) <= limit {
            ke -= 1;
        }
        if total - kept(ka, ke) <= limit {
            let cost = (2 * ka + 1) * (2 * ke + 1);
            if cost < best_cost {
                best_cost = cost;
                best = (ka, ke);
            }
        }
    }
    best
}

/// Compress a pattern grid into EADF coefficients.
pub fn compute_eadf<T: Real>(grid: &PatternGrid<T>, truncation: Truncation) -> Result<Eadf<T>> {
    grid.validate()?;
    let ext = extended_dims(&grid.spec)?;
    let (na, ne) = (ext.n_az, ext.n_el_ext);
    let n_f = grid.spec.frequencies_hz.len();
    let n_slices = grid.n_elements * 2 * n_f;
    let norm = T::one() / T::of((na * ne) as f64);
    let mut planner = FftPlanner::<T>::new();

    let mut spectra = Vec::with_capacity(n_slices);
    for s in 0..n_slices {
        let (e, rest) = (s / (2 * n_f), s % (2 * n_f));
        let mut buf = extend_slice(grid.slice(e, rest / n_f, rest % n_f), &grid.spec, &ext);
        fft2(&mut buf, ne, na, false, &mut planner);
        buf.iter_mut().for_each(|v| *v = *v * norm);
        spectra.push(buf);
    }

    let (order_az, order_el) = match truncation {
        Truncation::Full => (na / 2, ne / 2),
        Truncation::Orders { az, el } => {
            if az > na / 2 || el > ne / 2 {
                return Err(Error::invalid(format!("truncation ({az}, {el}) exceeds ({}, {})", na / 2, ne / 2)));
            }
            (az, el)
        }
        Truncation::MaxErrorDb { db } => {
            let pw: Vec<Vec<f64>> = spectra.iter().map(|s| s.iter().map(|v| v.norm_sqr().as_f64()).collect()).collect();
            choose_orders(&pw, &ext, db)
        }
    };

    let (wm, wn) = (2 * order_az + 1, 2 * order_el + 1);
    let mut coefficients = Vec::with_capacity(n_slices * wm * wn);
    for spec in &spectra {
        for m in -(order_az as i64)..=order_az as i64 {
            for n in -(order_el as i64)..=order_el as i64 {
                let w = T::of(nyquist_weight(m, order_az, na) * nyquist_weight(n, order_el, ne));
                coefficients.push(spec[spectrum_index(n, ne) * na + spectrum_index(m, na)] * w);
            }
        }
    }

    // Reconstruction at the source nodes via the inverse transform of the kept spectrum.
    let n_el = grid.spec.n_el();
    let (mut err, mut total) = (0.0f64, 0.0f64);
    for (s, _) in spectra.iter().enumerate() {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); na * ne];
        let c = &coefficients[s * wm * wn..(s + 1) * wm * wn];
        for (mi, m) in (-(order_az as i64)..=order_az as i64).enumerate() {
            for (ni, n) in (-(order_el as i64)..=order_el as i64).enumerate() {
                buf[spectrum_index(n, ne) * na + spectrum_index(m, na)] += c[mi * wn + ni];
            }
        }
        fft2(&mut buf, ne, na, true, &mut planner);
        let (e, rest) = (s / (2 * n_f), s % (2 * n_f));
        let src = grid.slice(e, rest / n_f, rest % n_f);
        for (r, g) in buf[..n_el * na].iter().zip(src) {
            err += (r - g).norm_sqr().as_f64();
            total += g.norm_sqr().as_f64();
        }
    }
    let rel = if total > 0.0 { (err / total).sqrt() } else { 0.0 };
    let reconstruction_error_db = if rel > 0.0 { 20.0 * rel.log10() } else { f64::NEG_INFINITY };

    Ok(Eadf {
        spec: grid.spec.clone(),
        n_elements: grid.n_elements,
        order_az,
        order_el,
        coefficients,
        reconstruction_error_db,
        source_checksum: grid_checksum(grid),
    })
}

fn basis<T: Real>(angle: f64, offset: f64, order: usize) -> Vec<Complex<T>> {
    (-(order as i64)..=order as i64).map(|k| cis(T::of(k as f64 * (angle + offset)))).collect()
}

fn basis_derivative<T: Real>(b: &[Complex<T>], order: usize) -> Vec<Complex<T>> {
    b.iter()
        .zip(-(order as i64)..=order as i64)
        .map(|(v, k)| *v * Complex::new(T::zero(), T::of(k as f64)))
        .collect()
}

const AZ_OFFSET: f64 = std::f64::consts::PI;
const EL_OFFSET: f64 = std::f64::consts::FRAC_PI_2;

/// Response and angular derivatives of all elements at one direction.
#[derive(Debug, Clone)]
pub struct ResponseWithGradient<T: Real> {
    pub value: Vec<ElementResponse<T>>,
    pub d_az: Vec<ElementResponse<T>>,
    pub d_el: Vec<ElementResponse<T>>,
}

impl<T: Real> Eadf<T> {
    fn block(&self) -> usize {
        (2 * self.order_az + 1) * (2 * self.order_el + 1)
    }

    fn coeffs(&self, element: usize, pol: usize, freq: usize) -> &[Complex<T>] {
        let n_f = self.spec.frequencies_hz.len();
        let o = ((element * 2 + pol) * n_f + freq) * self.block();
        &self.coefficients[o..o + self.block()]
    }

    /// Index of the calibration frequency nearest `frequency_hz`; errors when the
    /// query lies outside the calibrated band by more than half a step (or
    /// 500 MHz for single-frequency grids).
    pub fn frequency_index(&self, frequency_hz: f64) -> Result<usize> {
        let fs = &self.spec.frequencies_hz;
        let tol = if fs.len() > 1 { 0.5 * (fs[1] - fs[0]) } else { 5e8 };
        if !frequency_hz.is_finite() || frequency_hz < fs[0] - tol || frequency_hz > fs[fs.len() - 1] + tol {
            return Err(Error::invalid(format!(
                "frequency {frequency_hz} Hz outside calibrated band [{}, {}] Hz",
                fs[0],
                fs[fs.len() - 1]
            )));
        }
        Ok(fs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - frequency_hz).abs().total_cmp(&(b.1 - frequency_hz).abs()))
            .map(|(i, _)| i)
            .expect("non-empty"))
    }

    fn check_el(el: f64) -> Result<()> {
        if !el.is_finite() || el.abs() > std::f64::consts::FRAC_PI_2 + 1e-9 {
            return Err(Error::Coverage(format!("elevation {:.3}° outside [-90°, 90°]", el.to_degrees())));
        }
        Ok(())
    }

    fn contract(&self, c: &[Complex<T>], ea: &[Complex<T>], ee: &[Complex<T>]) -> Complex<T> {
        let wn = 2 * self.order_el + 1;
        let mut acc = Complex::new(T::zero(), T::zero());
        for (row, a) in c.chunks_exact(wn).zip(ea) {
            let mut inner = Complex::new(T::zero(), T::zero());
            for (v, e) in row.iter().zip(ee) {
                inner += *v * *e;
            }
            acc += inner * *a;
        }
        acc
    }

    /// Single-component evaluation.
    pub fn eval(&self, element: usize, pol: usize, freq: usize, az: f64, el: f64) -> Complex<T> {
        let ea = basis::<T>(az, AZ_OFFSET, self.order_az);
        let ee = basis::<T>(el, EL_OFFSET, self.order_el);
        self.contract(self.coeffs(element, pol, freq), &ea, &ee)
    }

    /// Responses of every element at calibration-frequency index `freq`.
    pub fn response_at(&self, freq: usize, az: f64, el: f64) -> Result<Vec<ElementResponse<T>>> {
        Self::check_el(el)?;
        let ea = basis::<T>(az, AZ_OFFSET, self.order_az);
        let ee = basis::<T>(el, EL_OFFSET, self.order_el);
        Ok((0..self.n_elements)
            .map(|e| [self.contract(self.coeffs(e, 0, freq), &ea, &ee), self.contract(self.coeffs(e, 1, freq), &ea, &ee)])
            .collect())
    }

    pub fn response_with_gradient(&self, freq: usize, az: f64, el: f64) -> Result<ResponseWithGradient<T>> {
        Self::check_el(el)?;
        let ea = basis::<T>(az, AZ_OFFSET, self.order_az);
        let ee = basis::<T>(el, EL_OFFSET, self.order_el);
        let da = basis_derivative(&ea, self.order_az);
        let de = basis_derivative(&ee, self.order_el);
        let mut out = ResponseWithGradient { value: vec![], d_az: vec![], d_el: vec![] };
        for e in 0..self.n_elements {
            let (c0, c1) = (self.coeffs(e, 0, freq), self.coeffs(e, 1, freq));
            out.value.push([self.contract(c0, &ea, &ee), self.contract(c1, &ea, &ee)]);
            out.d_az.push([self.contract(c0, &da, &ee), self.contract(c1, &da, &ee)]);
            out.d_el.push([self.contract(c0, &ea, &de), self.contract(c1, &ea, &de)]);
        }
        Ok(out)
    }

    /// Responses on the Cartesian product `az_list × el_list`, laid out
    /// `[az][el][element]`. Uses separable contraction, so it is much cheaper
    /// than repeated point queries.
    pub fn response_grid(&self, freq: usize, az_list: &[f64], el_list: &[f64]) -> Result<Vec<ElementResponse<T>>> {
        for &el in el_list {
            Self::check_el(el)?;
        }
        let wm = 2 * self.order_az + 1;
        let wn = 2 * self.order_el + 1;
        let eas: Vec<Vec<Complex<T>>> = az_list.iter().map(|&a| basis(a, AZ_OFFSET, self.order_az)).collect();
        let ees: Vec<Vec<Complex<T>>> = el_list.iter().map(|&e| basis(e, EL_OFFSET, self.order_el)).collect();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![[zero; 2]; az_list.len() * el_list.len() * self.n_elements];
        for e in 0..self.n_elements {
            for pol in 0..2 {
                let c = self.coeffs(e, pol, freq);
                // inner[el][m] = Σ_n c[m][n] ee[el][n]
                let inner: Vec<Vec<Complex<T>>> = ees
                    .iter()
                    .map(|ee| (0..wm).map(|m| c[m * wn..(m + 1) * wn].iter().zip(ee).fold(zero, |a, (v, b)| a + *v * *b)).collect())
                    .collect();
                for (ai, ea) in eas.iter().enumerate() {
                    for (ei, row) in inner.iter().enumerate() {
                        let v = row.iter().zip(ea).fold(zero, |a, (x, y)| a + *x * *y);
                        out[(ai * el_list.len() + ei) * self.n_elements + e][pol] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Coefficient for orders `(m, n)` of one slice.
    pub fn coefficient(&self, element: usize, pol: usize, freq: usize, m: i64, n: i64) -> Complex<T> {
        let wn = 2 * self.order_el + 1;
        let c = self.coeffs(element, pol, freq);
        c[(m + self.order_az as i64) as usize * wn + (n + self.order_el as i64) as usize]
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let cache = EadfCache {
            schema_version: EADF_CACHE_SCHEMA_VERSION,
            spec: self.spec.clone(),
            n_elements: self.n_elements,
            truncation: Truncation::Orders { az: self.order_az, el: self.order_el },
            reconstruction_error_db: self.reconstruction_error_db,
            source_checksum: self.source_checksum.clone(),
            coefficients: self.coefficients.iter().flat_map(|c| [c.re.as_f64(), c.im.as_f64()]).collect(),
        };
        std::fs::write(path, serde_json::to_vec(&cache)?)?;
        Ok(())
    }

    /// Load a cache; when `expected_checksum` is given it must match the source grid's.
    pub fn read_cache(path: &Path, expected_checksum: Option<&str>) -> Result<Self> {
        let cache: EadfCache = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Format(format!("EADF cache {}: {e}", path.display())))?;
        if cache.schema_version != EADF_CACHE_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported EADF cache version {}", cache.schema_version)));
        }
        if let Some(sum) = expected_checksum {
            if sum != cache.source_checksum {
                return Err(Error::Format("EADF cache was built from a different pattern grid".into()));
            }
        }
        let Truncation::Orders { az, el } = cache.truncation else {
            return Err(Error::Format("EADF cache must record explicit orders".into()));
        };
        let expect = cache.n_elements * 2 * cache.spec.frequencies_hz.len() * (2 * az + 1) * (2 * el + 1) * 2;
        if cache.coefficients.len() != expect {
            return Err(Error::Format("EADF cache coefficient count mismatch".into()));
        }
        Ok(Eadf {
            spec: cache.spec,
            n_elements: cache.n_elements,
            order_az: az,
            order_el: el,
            coefficients: cache.coefficients.chunks_exact(2).map(|c| Complex::new(T::of(c[0]), T::of(c[1]))).collect(),
            reconstruction_error_db: cache.reconstruction_error_db,
            source_checksum: cache.source_checksum,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EadfCache {
    schema_version: u32,
    spec: GridSpec,
    n_elements: usize,
    truncation: Truncation,
    reconstruction_error_db: f64,
    source_checksum: String,
    coefficients: Vec<f64>,
}

/// Complex response of every element (H and V components) toward
/// (`az`, `el`) radians, using the calibration frequency nearest `frequency_hz`.
pub fn manifold<T: Real>(eadf: &Eadf<T>, az: f64, el: f64, frequency_hz: f64) -> Result<Vec<ElementResponse<T>>> {
    let f = eadf.frequency_index(frequency_hz)?;
    eadf.response_at(f, az, el)
}
