use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::geometry::{direction, dot, ArrayGeometry, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::num::Real;

/// How the elevation axis is continued past the poles before the 2-D transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationExtension {
    /// `G(az + π, π − el)`.
    #[default]
    Mirrored,
    /// `−G(az + π, π − el)`, for patterns expressed in spherical field components.
    MirroredFlipped,
}

/// Angular sampling and frequencies of a pattern grid. Azimuth always covers
/// `[-180°, 180°)`; elevation runs from `el_min_deg` to `el_max_deg` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub az_step_deg: f64,
    pub el_step_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub frequencies_hz: Vec<f64>,
    #[serde(default)]
    pub elevation_extension: ElevationExtension,
}

impl GridSpec {
    /// 2° × 5° over the full sphere, 26–30 GHz in 250 MHz steps.
    pub fn reference() -> Self {
        GridSpec {
            az_step_deg: 2.0,
            el_step_deg: 5.0,
            el_min_deg: -90.0,
            el_max_deg: 90.0,
            frequencies_hz: (0..17).map(|i| 26e9 + 250e6 * i as f64).collect(),
            elevation_extension: ElevationExtension::Mirrored,
        }
    }

    /// Default angular sampling at a single calibration frequency.
    pub fn single_frequency(frequency_hz: f64) -> Self {
        GridSpec { frequencies_hz: vec![frequency_hz], ..GridSpec::reference() }
    }

    pub fn n_az(&self) -> usize {
        (360.0 / self.az_step_deg).round() as usize
    }

    pub fn n_el(&self) -> usize {
        ((self.el_max_deg - self.el_min_deg) / self.el_step_deg).round() as usize + 1
    }

    pub fn az_deg(&self, i: usize) -> f64 {
        -180.0 + i as f64 * self.az_step_deg
    }

    pub fn el_deg(&self, j: usize) -> f64 {
        self.el_min_deg + j as f64 * self.el_step_deg
    }

    pub fn validate(&self) -> Result<()> {
        let regular = |span: f64, step: f64| {
            step > 0.0 && step.is_finite() && ((span / step) - (span / step).round()).abs() < 1e-9
        };
        if !regular(360.0, self.az_step_deg) {
            return Err(Error::invalid(format!("azimuth step {}° does not divide 360°", self.az_step_deg)));
        }
        if !(self.el_min_deg >= -90.0 && self.el_max_deg <= 90.0 && self.el_min_deg < self.el_max_deg) {
            return Err(Error::invalid("elevation range must lie within [-90°, 90°]"));
        }
        if !regular(self.el_max_deg - self.el_min_deg, self.el_step_deg) {
            return Err(Error::invalid("elevation step does not divide the elevation range"));
        }
        if self.frequencies_hz.is_empty() || self.frequencies_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("pattern grid needs at least one positive frequency"));
        }
        if self.frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frequencies must be strictly increasing"));
        }
        Ok(())
    }

    pub fn covers_full_sphere(&self) -> bool {
        (self.el_min_deg + 90.0).abs() < 1e-9 && (self.el_max_deg - 90.0).abs() < 1e-9
    }
}

/// Complex element patterns sampled on a regular (az, el) grid, stored
/// `[element][pol][freq][el][az]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGrid<T: Real> {
    pub spec: GridSpec,
    pub n_elements: usize,
    pub gains: Vec<Complex<T>>,
}

impl<T: Real> PatternGrid<T> {
    pub fn zeros(spec: GridSpec, n_elements: usize) -> Result<Self> {
        spec.validate()?;
        let len = n_elements * 2 * spec.frequencies_hz.len() * spec.n_el() * spec.n_az();
        Ok(PatternGrid { spec, n_elements, gains: vec![Complex::new(T::zero(), T::zero()); len] })
    }

    pub fn slice_len(&self) -> usize {
        self.spec.n_el() * self.spec.n_az()
    }

    /// Offset of the `[element][pol][freq]` slice.
    pub fn slice_offset(&self, element: usize, pol: usize, freq: usize) -> usize {
        ((element * 2 + pol) * self.spec.frequencies_hz.len() + freq) * self.slice_len()
    }

    pub fn slice(&self, element: usize, pol: usize, freq: usize) -> &[Complex<T>] {
        let o = self.slice_offset(element, pol, freq);
        &self.gains[o..o + self.slice_len()]
    }

    pub fn get(&self, element: usize, pol: usize, freq: usize, az_i: usize, el_j: usize) -> Complex<T> {
        self.slice(element, pol, freq)[el_j * self.spec.n_az() + az_i]
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let expect = self.n_elements * 2 * self.spec.frequencies_hz.len() * self.slice_len();
        if self.gains.len() != expect {
            return Err(Error::dim(format!("pattern grid holds {} values, expected {expect}", self.gains.len())));
        }
        if self.gains.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
            return Err(Error::invalid("pattern grid contains non-finite values"));
        }
        Ok(())
    }
}

/// Parameters of the synthetic element pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementModel {
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    pub xpd_db: f64,
}

impl ElementModel {
    /// Patch elements: 85° × 50° half-power beamwidths, 30 dB XPD.
    pub fn reference_patch() -> Self {
        ElementModel { hpbw_az_deg: 85.0, hpbw_el_deg: 50.0, xpd_db: 30.0 }
    }

    pub fn isotropic() -> Self {
        ElementModel { hpbw_az_deg: 180.0, hpbw_el_deg: 180.0, xpd_db: f64::INFINITY }
    }

    fn validate(&self) -> Result<()> {
        for hp in [self.hpbw_az_deg, self.hpbw_el_deg] {
            if !(hp > 0.0 && hp <= 180.0) {
                return Err(Error::invalid(format!("HPBW {hp}° outside (0°, 180°]")));
            }
        }
        if self.xpd_db.is_nan() || self.xpd_db < 0.0 {
            return Err(Error::invalid("xpd_db must be non-negative"));
        }
        Ok(())
    }

    /// Co-polar amplitude at local angles. Azimuth uses a `cos²(φ/2)` power
    /// law, elevation a `cos(ϑ)` power law, each exponent fixed by its HPBW;
    /// 180° selects a constant factor.
    pub fn amplitude(&self, local_az: f64, local_el: f64) -> f64 {
        let az_factor = if self.hpbw_az_deg >= 180.0 {
            1.0
        } else {
            let q = 0.5f64.ln() / (self.hpbw_az_deg.to_radians() / 4.0).cos().powi(2).ln();
            (local_az / 2.0).cos().powi(2).powf(q)
        };
        let el_factor = if self.hpbw_el_deg >= 180.0 {
            1.0
        } else {
            let q = 0.5f64.ln() / (self.hpbw_el_deg.to_radians() / 2.0).cos().ln();
            local_el.cos().max(0.0).powf(q)
        };
        (az_factor * el_factor).sqrt()
    }
}

/// Synthesize patterns for every element of `geometry`: cosine-power element
/// response rotated to each element's orientation, cross-polar level `xpd_db`
/// below co-polar, and the plane-wave phase of the element position.
pub fn synth_pattern<T: Real>(model: &ElementModel, geometry: &ArrayGeometry, spec: &GridSpec) -> Result<PatternGrid<T>> {
    model.validate()?;
    geometry.validate()?;
    let mut grid = PatternGrid::zeros(spec.clone(), geometry.len())?;
    let cross = if model.xpd_db.is_infinite() { 0.0 } else { 10f64.powf(-model.xpd_db / 20.0) };
    let (n_az, n_el) = (spec.n_az(), spec.n_el());
    for e in 0..geometry.len() {
        let co = geometry.feed_pol[e].index();
        for (fi, &f) in spec.frequencies_hz.iter().enumerate() {
            let k = 2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT;
            for pol in 0..2 {
                let scale = if pol == co { 1.0 } else { cross };
                let off = grid.slice_offset(e, pol, fi);
                for j in 0..n_el {
                    let el = spec.el_deg(j).to_radians();
                    for i in 0..n_az {
                        let az = spec.az_deg(i).to_radians();
                        let u = direction(az, el);
                        let (laz, lel) = geometry.local_angles(e, &u);
                        let amp = model.amplitude(laz, lel) * scale;
                        let phase = k * dot(&geometry.element_positions[e], &u);
                        grid.gains[off + j * n_az + i] = Complex::new(T::of(amp * phase.cos()), T::of(amp * phase.sin()));
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Convenience: pattern grid for a geometry whose elements all share `model`.
pub fn synth_array<T: Real>(model: &ElementModel, geometry: &ArrayGeometry, frequency_hz: f64) -> Result<PatternGrid<T>> {
    synth_pattern(model, geometry, &GridSpec::single_frequency(frequency_hz))
}
