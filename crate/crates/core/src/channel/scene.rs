//! Scene description: specular paths, dense profile, receiver motion.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arrays::{direction, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// One specular component. Angles in radians, gain rows indexed by the
/// receive polarization and columns by the transmit polarization (`[H, V]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpecularPath {
    pub delay_s: f64,
    pub aoa_az_rad: f64,
    pub aoa_el_rad: f64,
    pub aod_az_rad: f64,
    pub aod_el_rad: f64,
    pub gain: [[Complex64; 2]; 2],
    pub doppler_hz: f64,
}

impl SpecularPath {
    /// Co-polar path with `γ_HH = γ_VV = amplitude` and no cross-polar leakage.
    pub fn co_polar(delay_s: f64, aoa: (f64, f64), aod: (f64, f64), amplitude: Complex64, doppler_hz: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        SpecularPath {
            delay_s,
            aoa_az_rad: aoa.0,
            aoa_el_rad: aoa.1,
            aod_az_rad: aod.0,
            aod_el_rad: aod.1,
            gain: [[amplitude, z], [z, amplitude]],
            doppler_hz,
        }
    }

    /// Frobenius power of the polarimetric gain matrix.
    pub fn power(&self) -> f64 {
        self.gain.iter().flatten().map(|g| g.norm_sqr()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.delay_s, self.aoa_az_rad, self.aoa_el_rad, self.aod_az_rad, self.aod_el_rad, self.doppler_hz]
            .iter()
            .all(|v| v.is_finite())
            && self.gain.iter().flatten().all(|g| g.re.is_finite() && g.im.is_finite());
        if !finite {
            return Err(Error::invalid("specular path has non-finite parameters"));
        }
        if self.delay_s < 0.0 {
            return Err(Error::invalid("path delay must be non-negative"));
        }
        let half_pi = std::f64::consts::FRAC_PI_2 + 1e-12;
        if self.aoa_el_rad.abs() > half_pi || self.aod_el_rad.abs() > half_pi {
            return Err(Error::invalid("path elevation outside [-90°, 90°]"));
        }
        Ok(())
    }
}

/// Frequency-domain parameters of the dense component. `tau_d_s` is the
/// onset delay, `beta_d` the decay rate per delay bin (1/bandwidth), `gamma1`
/// the power of the first delay-domain component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayProfile {
    pub tau_d_s: f64,
    pub beta_d: f64,
    pub gamma1: f64,
}

/// von Mises angular density for one link end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularProfile {
    pub mu_az_rad: f64,
    pub mu_el_rad: f64,
    pub kappa_az: f64,
    pub kappa_el: f64,
    pub amp_az: f64,
    pub amp_el: f64,
}

impl AngularProfile {
    pub fn uniform() -> Self {
        AngularProfile { mu_az_rad: 0.0, mu_el_rad: 0.0, kappa_az: 0.0, kappa_el: 0.0, amp_az: 1.0, amp_el: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseProfile {
    pub theta_f: DelayProfile,
    pub theta_r: AngularProfile,
    pub theta_t: AngularProfile,
    pub noise_var: f64,
}

impl DenseProfile {
    pub fn validate(&self) -> Result<()> {
        let f = &self.theta_f;
        if !(f.beta_d > 0.0 && f.beta_d.is_finite()) {
            return Err(Error::invalid("beta_d must be positive"));
        }
        if !(f.gamma1 >= 0.0 && f.gamma1.is_finite() && f.tau_d_s >= 0.0 && f.tau_d_s.is_finite()) {
            return Err(Error::invalid("gamma1 and tau_d must be non-negative"));
        }
        for a in [&self.theta_r, &self.theta_t] {
            if !(a.kappa_az >= 0.0 && a.kappa_el >= 0.0 && a.amp_az >= 0.0 && a.amp_el >= 0.0) {
                return Err(Error::invalid("kappa and amplitudes must be non-negative"));
            }
            if ![a.mu_az_rad, a.mu_el_rad, a.kappa_az, a.kappa_el, a.amp_az, a.amp_el].iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("angular profile has non-finite values"));
            }
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::invalid("noise_var must be non-negative"));
        }
        Ok(())
    }

    /// True when the dense component carries power.
    pub fn is_active(&self) -> bool {
        self.theta_f.gamma1 > 0.0
            && self.theta_r.amp_az * self.theta_r.amp_el > 0.0
            && self.theta_t.amp_az * self.theta_t.amp_el > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t_s: f64,
    pub position_m: [f64; 3],
}

/// Piecewise-linear receiver trajectory. Each path is treated as an apparent
/// point source fixed where it appears at `t = 0`: distance `c·τ` along the
/// initial AOA from the receiver's initial position. Path delay and AOA then
/// follow the geometry, and the Doppler shift is `v·u / λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Motion {
    pub waypoints: Vec<Waypoint>,
}

impl Motion {
    pub fn linear(velocity_mps: [f64; 3], duration_s: f64) -> Self {
        Motion {
            waypoints: vec![
                Waypoint { t_s: 0.0, position_m: [0.0; 3] },
                Waypoint { t_s: duration_s, position_m: velocity_mps.map(|v| v * duration_s) },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::invalid("motion needs at least one waypoint"));
        }
        if self.waypoints.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
            return Err(Error::invalid("waypoint times must be strictly increasing"));
        }
        if self.waypoints.iter().any(|w| !w.t_s.is_finite() || w.position_m.iter().any(|p| !p.is_finite())) {
            return Err(Error::invalid("non-finite waypoint"));
        }
        Ok(())
    }

    fn segment(&self, t: f64) -> usize {
        let w = &self.waypoints;
        w.windows(2).position(|s| t < s[1].t_s).unwrap_or(w.len().saturating_sub(2))
    }

    /// Position at time `t`, held constant outside the waypoint span.
    pub fn position(&self, t: f64) -> [f64; 3] {
        let w = &self.waypoints;
        if w.len() == 1 || t <= w[0].t_s {
            return w[0].position_m;
        }
        if t >= w[w.len() - 1].t_s {
            return w[w.len() - 1].position_m;
        }
        let i = self.segment(t);
        let a = (t - w[i].t_s) / (w[i + 1].t_s - w[i].t_s);
        std::array::from_fn(|k| w[i].position_m[k] + a * (w[i + 1].position_m[k] - w[i].position_m[k]))
    }

    pub fn velocity(&self, t: f64) -> [f64; 3] {
        let w = &self.waypoints;
        if w.len() == 1 || t < w[0].t_s || t >= w[w.len() - 1].t_s {
            return [0.0; 3];
        }
        let i = self.segment(t);
        let dt = w[i + 1].t_s - w[i].t_s;
        std::array::from_fn(|k| (w[i + 1].position_m[k] - w[i].position_m[k]) / dt)
    }

    /// Path parameters seen at time `t` for carrier wavelength `lambda`.
    pub fn apply(&self, path: &SpecularPath, t: f64, lambda: f64) -> SpecularPath {
        let p0 = self.position(self.waypoints[0].t_s);
        let u0 = direction(path.aoa_az_rad, path.aoa_el_rad);
        let src: [f64; 3] = std::array::from_fn(|k| p0[k] + SPEED_OF_LIGHT * path.delay_s * u0[k]);
        let p = self.position(t);
        let d: [f64; 3] = std::array::from_fn(|k| src[k] - p[k]);
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let mut out = path.clone();
        let u = if dist > 0.0 { d.map(|x| x / dist) } else { u0 };
        out.delay_s = dist / SPEED_OF_LIGHT;
        out.aoa_az_rad = u[1].atan2(u[0]);
        out.aoa_el_rad = u[2].clamp(-1.0, 1.0).asin();
        let v = self.velocity(t);
        out.doppler_hz = path.doppler_hz + (v[0] * u[0] + v[1] * u[1] + v[2] * u[2]) / lambda;
        out
    }
}

/// Specular paths, optional dense component and optional receiver motion,
/// observed on baseband tone offsets `frequencies_hz` around `carrier_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScene {
    pub paths: Vec<SpecularPath>,
    pub dense: Option<DenseProfile>,
    pub motion: Option<Motion>,
    pub frequencies_hz: Vec<f64>,
    pub carrier_hz: f64,
}

/// `(k − M/2)·δf` for `k = 0..M`, the tone grid used throughout.
pub fn tone_offsets(m_f: usize, spacing_hz: f64) -> Vec<f64> {
    (0..m_f).map(|k| (k as f64 - (m_f / 2) as f64) * spacing_hz).collect()
}

impl ChannelScene {
    pub fn new(paths: Vec<SpecularPath>, frequencies_hz: Vec<f64>, carrier_hz: f64) -> Self {
        ChannelScene { paths, dense: None, motion: None, frequencies_hz, carrier_hz }
    }

    pub fn m_f(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn bandwidth_hz(&self) -> f64 {
        match self.frequencies_hz.as_slice() {
            [a, b, ..] => (b - a) * self.m_f() as f64,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies_hz.is_empty() {
            return Err(Error::invalid("scene needs at least one frequency"));
        }
        if self.frequencies_hz.iter().any(|f| !f.is_finite()) || !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::invalid("non-finite scene frequencies"));
        }
        for p in &self.paths {
            p.validate()?;
        }
        if let Some(d) = &self.dense {
            d.validate()?;
        }
        if let Some(m) = &self.motion {
            m.validate()?;
        }
        Ok(())
    }

    /// Path parameters at absolute time `t` (motion applied when present).
    pub fn paths_at(&self, t: f64) -> Vec<SpecularPath> {
        match &self.motion {
            Some(m) => {
                let lambda = SPEED_OF_LIGHT / self.carrier_hz;
                self.paths.iter().map(|p| m.apply(p, t, lambda)).collect()
            }
            None => self.paths.clone(),
        }
    }

    pub fn noise_var(&self) -> f64 {
        self.dense.map_or(0.0, |d| d.noise_var)
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            schema_version: SCENE_SCHEMA_VERSION,
            carrier_hz: self.carrier_hz,
            tones: ToneSpec::Explicit { frequencies_hz: self.frequencies_hz.clone() },
            paths: self.paths.iter().map(PathRecord::from_path).collect(),
            dense: self.dense,
            motion: self.motion.clone(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f: SceneFile = serde_json::from_slice(&std::fs::read(path)?)?;
        f.into_scene()
    }
}

/// Path as written in scene files: nanoseconds, degrees, `[re, im]` gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub delay_ns: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    /// `[[γ_HH, γ_HV], [γ_VH, γ_VV]]`, each as `[re, im]`.
    pub gain: [[[f64; 2]; 2]; 2],
    #[serde(default)]
    pub doppler_hz: f64,
}

impl PathRecord {
    pub fn from_path(p: &SpecularPath) -> Self {
        PathRecord {
            delay_ns: p.delay_s * 1e9,
            aoa_az_deg: p.aoa_az_rad.to_degrees(),
            aoa_el_deg: p.aoa_el_rad.to_degrees(),
            aod_az_deg: p.aod_az_rad.to_degrees(),
            aod_el_deg: p.aod_el_rad.to_degrees(),
            gain: p.gain.map(|row| row.map(|g| [g.re, g.im])),
            doppler_hz: p.doppler_hz,
        }
    }

    pub fn to_path(&self) -> SpecularPath {
        SpecularPath {
            delay_s: self.delay_ns * 1e-9,
            aoa_az_rad: self.aoa_az_deg.to_radians(),
            aoa_el_rad: self.aoa_el_deg.to_radians(),
            aod_az_rad: self.aod_az_deg.to_radians(),
            aod_el_rad: self.aod_el_deg.to_radians(),
            gain: self.gain.map(|row| row.map(|g| Complex64::new(g[0], g[1]))),
            doppler_hz: self.doppler_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToneSpec {
    /// `m_f` tones at `(k − m_f/2)·spacing_hz`.
    Uniform { m_f: usize, spacing_hz: f64 },
    Explicit { frequencies_hz: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema_version: u32,
    pub carrier_hz: f64,
    pub tones: ToneSpec,
    #[serde(default)]
    pub paths: Vec<PathRecord>,
    #[serde(default)]
    pub dense: Option<DenseProfile>,
    #[serde(default)]
    pub motion: Option<Motion>,
}

impl SceneFile {
    pub fn into_scene(self) -> Result<ChannelScene> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported scene schema {}", self.schema_version)));
        }
        let frequencies_hz = match self.tones {
            ToneSpec::Uniform { m_f, spacing_hz } => {
                if m_f == 0 || !(spacing_hz > 0.0) {
                    return Err(Error::invalid("uniform tones need m_f ≥ 1 and positive spacing"));
                }
                tone_offsets(m_f, spacing_hz)
            }
            ToneSpec::Explicit { frequencies_hz } => frequencies_hz,
        };
        let scene = ChannelScene {
            paths: self.paths.iter().map(PathRecord::to_path).collect(),
            dense: self.dense,
            motion: self.motion,
            frequencies_hz,
            carrier_hz: self.carrier_hz,
        };
        scene.validate()?;
        Ok(scene)
    }
}
