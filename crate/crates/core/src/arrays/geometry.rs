use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Polarization;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    UpaPanel,
    Octagon,
    Custom,
}

/// Element positions (m), broadside directions and feed polarizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub element_positions: Vec<[f64; 3]>,
    pub element_orientations: Vec<[f64; 3]>,
    pub feed_pol: Vec<Polarization>,
    pub layout: Layout,
}

/// Unit vector for azimuth/elevation in radians (x toward az = 0 on the horizon, z up).
pub fn direction(az: f64, el: f64) -> [f64; 3] {
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    [ce * ca, ce * sa, se]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Patch grid in the plane normal to `broadside`, centred at `center`.
/// Columns run along the horizontal in-plane axis, rows along the vertical one.
fn panel(
    center: [f64; 3],
    broadside: [f64; 3],
    rows: usize,
    cols: usize,
    spacing: f64,
    dual_pol: bool,
    out: &mut ArrayGeometry,
) {
    let b = normalize(broadside);
    let horiz = normalize([-b[1], b[0], 0.0]);
    let up = [0.0, 0.0, 1.0];
    for r in 0..rows {
        for c in 0..cols {
            let dy = (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
            let dz = (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
            let p = [
                center[0] + dy * horiz[0] + dz * up[0],
                center[1] + dy * horiz[1] + dz * up[1],
                center[2] + dy * horiz[2] + dz * up[2],
            ];
            let pols: &[Polarization] = if dual_pol { &[Polarization::H, Polarization::V] } else { &[Polarization::H] };
            for &pol in pols {
                out.element_positions.push(p);
                out.element_orientations.push(b);
                out.feed_pol.push(pol);
            }
        }
    }
}

impl ArrayGeometry {
    fn empty(layout: Layout) -> Self {
        ArrayGeometry { element_positions: vec![], element_orientations: vec![], feed_pol: vec![], layout }
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    /// Planar array facing +x. With `dual_pol` every patch contributes an H feed
    /// followed by a V feed at the same position.
    pub fn upa(rows: usize, cols: usize, spacing_m: f64, dual_pol: bool) -> Self {
        let mut g = ArrayGeometry::empty(Layout::UpaPanel);
        panel([0.0; 3], [1.0, 0.0, 0.0], rows, cols, spacing_m, dual_pol, &mut g);
        g
    }

    /// Single isotropic-placement element at the origin.
    pub fn single(pol: Polarization) -> Self {
        ArrayGeometry {
            element_positions: vec![[0.0; 3]],
            element_orientations: vec![[1.0, 0.0, 0.0]],
            feed_pol: vec![pol],
            layout: Layout::Custom,
        }
    }

    /// Uniform linear array along y, facing +x.
    pub fn ula(n: usize, spacing_m: f64) -> Self {
        let mut g = ArrayGeometry::upa(1, n, spacing_m, false);
        g.layout = Layout::Custom;
        g
    }

    /// 128-feed transmit array: four 4×4 dual-feed panels tiled 2×2 in one plane.
    pub fn reference_tx(frequency_hz: f64) -> Self {
        let d = 0.5 * SPEED_OF_LIGHT / frequency_hz;
        let mut g = ArrayGeometry::empty(Layout::UpaPanel);
        let pitch = 4.0 * d + d;
        for pr in 0..2 {
            for pc in 0..2 {
                let y = (pc as f64 - 0.5) * pitch;
                let z = (pr as f64 - 0.5) * pitch;
                panel([0.0, y, z], [1.0, 0.0, 0.0], 4, 4, d, true, &mut g);
            }
        }
        g
    }

    /// 256-feed receive array: eight 4×4 dual-feed panels on the faces of an octagon.
    pub fn reference_rx(frequency_hz: f64) -> Self {
        let d = 0.5 * SPEED_OF_LIGHT / frequency_hz;
        let face = 4.0 * d + d;
        let radius = face / (2.0 * (std::f64::consts::PI / 8.0).tan());
        let mut g = ArrayGeometry::empty(Layout::Octagon);
        for k in 0..8 {
            let az = k as f64 * std::f64::consts::FRAC_PI_4;
            let b = direction(az, 0.0);
            panel([radius * b[0], radius * b[1], 0.0], b, 4, 4, d, true, &mut g);
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.element_positions.len();
        if n == 0 {
            return Err(Error::invalid("array has no elements"));
        }
        if self.element_orientations.len() != n || self.feed_pol.len() != n {
            return Err(Error::dim("geometry vectors disagree in length"));
        }
        for (p, o) in self.element_positions.iter().zip(&self.element_orientations) {
            if p.iter().chain(o.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite geometry"));
            }
            if (dot(o, o).sqrt() - 1.0).abs() > 1e-6 {
                return Err(Error::invalid("element orientation is not a unit vector"));
            }
        }
        Ok(())
    }

    /// Local (azimuth, elevation) of direction `u` in element `e`'s frame.
    pub(crate) fn local_angles(&self, e: usize, u: &[f64; 3]) -> (f64, f64) {
        let b = self.element_orientations[e];
        let horiz_len = (b[0] * b[0] + b[1] * b[1]).sqrt();
        let y = if horiz_len > 1e-12 { [-b[1] / horiz_len, b[0] / horiz_len, 0.0] } else { [0.0, 1.0, 0.0] };
        let z = [b[1] * y[2] - b[2] * y[1], b[2] * y[0] - b[0] * y[2], b[0] * y[1] - b[1] * y[0]];
        let el = dot(u, &z).clamp(-1.0, 1.0).asin();
        let az = dot(u, &y).atan2(dot(u, &b));
        (az, el)
    }
}
