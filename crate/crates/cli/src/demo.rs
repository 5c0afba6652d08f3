//! Built-in corridor-like scene: line of sight, two wall reflections and a
//! dense tail.

use mmsounder::channel::{tone_offsets, AngularProfile, ChannelScene, DelayProfile, DenseProfile, SpecularPath};
use num_complex::Complex64;

pub const CARRIER_HZ: f64 = 28e9;
pub const N_TONES: usize = 256;
pub const SPACING_HZ: f64 = 4e6;
/// On the delay grid: 20 bins of 1/1.024 GHz.
pub const LOS_DELAY_S: f64 = 20.0 / (N_TONES as f64 * SPACING_HZ);

pub fn corridor() -> ChannelScene {
    let r = |d: f64| d.to_radians();
    let c = Complex64::new;
    let los = SpecularPath::co_polar(LOS_DELAY_S, (0.0, 0.0), (0.0, 0.0), c(1.0, 0.0), 0.0);
    let mut left = SpecularPath::co_polar(27.3e-9, (r(38.0), r(2.0)), (r(-32.0), r(-2.0)), c(0.0, 0.45), 0.0);
    left.gain[0][1] = c(0.05, 0.02);
    let mut right = SpecularPath::co_polar(31.8e-9, (r(-41.0), r(-3.0)), (r(28.0), r(3.0)), c(-0.3, 0.2), 0.0);
    right.gain[1][0] = c(-0.03, 0.04);
    let mut scene = ChannelScene::new(vec![los, left, right], tone_offsets(N_TONES, SPACING_HZ), CARRIER_HZ);
    let spread = |mu_deg: f64| AngularProfile {
        mu_az_rad: r(mu_deg),
        mu_el_rad: 0.0,
        kappa_az: 2.0,
        kappa_el: 8.0,
        amp_az: 1.0,
        amp_el: 1.0,
    };
    scene.dense = Some(DenseProfile {
        theta_f: DelayProfile { tau_d_s: 24e-9, beta_d: 0.04, gamma1: 0.02 },
        theta_r: spread(0.0),
        theta_t: spread(0.0),
        noise_var: 0.0,
    });
    scene
}
