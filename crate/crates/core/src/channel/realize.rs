use num_complex::Complex64;
use rayon::prelude::*;

use super::dense::{dense_covariance, DenseCovariance};
use super::scene::ChannelScene;
use super::specular::{delay_phasors, doppler_phasor, path_coupling};
use crate::arrays::LinkManifolds;
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, substream, Domain};
use crate::schedule::SwitchSchedule;

/// Scene bound to a schedule and manifolds, ready to draw snapshots.
#[derive(Debug, Clone)]
pub struct Realizer<'a> {
    pub scene: &'a ChannelScene,
    pub schedule: &'a SwitchSchedule,
    pub manifolds: &'a LinkManifolds<f64>,
    pub dense: Option<DenseCovariance>,
    pub seed: u64,
}

impl<'a> Realizer<'a> {
    pub fn new(
        scene: &'a ChannelScene,
        schedule: &'a SwitchSchedule,
        manifolds: &'a LinkManifolds<f64>,
        seed: u64,
    ) -> Result<Self> {
        scene.validate()?;
        let cb = &schedule.codebook;
        if cb.n_tx as usize != manifolds.n_tx() || cb.n_rx as usize != manifolds.n_rx() {
            return Err(Error::dim(format!(
                "schedule is {}×{} but manifolds are {}×{}",
                cb.n_tx,
                cb.n_rx,
                manifolds.n_tx(),
                manifolds.n_rx()
            )));
        }
        let dense = match &scene.dense {
            Some(d) if d.is_active() => {
                let step = 1.0 / scene.bandwidth_hz();
                if !step.is_finite() {
                    return Err(Error::invalid("dense component needs at least two tones"));
                }
                Some(dense_covariance(d, manifolds, scene.m_f(), step)?)
            }
            _ => None,
        };
        Ok(Realizer { scene, schedule, manifolds, dense, seed })
    }

    /// Absolute start time of snapshot `s`.
    pub fn snapshot_start_s(&self, s: u64) -> f64 {
        (s * self.schedule.snapshot_duration_ns) as f64 * 1e-9
    }

    /// Noiseless specular part only, laid out `[entry][f]`.
    pub fn specular(&self, snapshot: u64) -> Result<Vec<Complex64>> {
        let m_f = self.scene.m_f();
        let t0 = self.snapshot_start_s(snapshot);
        let paths = self.scene.paths_at(t0);
        let n_rx = self.manifolds.n_rx();
        let mut prepared = Vec::with_capacity(paths.len());
        for p in &paths {
            prepared.push((path_coupling(p, self.manifolds)?, delay_phasors::<f64>(p.delay_s, &self.scene.frequencies_hz), p.doppler_hz));
        }
        let entries = &self.schedule.codebook.entries;
        let mut out = vec![Complex64::new(0.0, 0.0); entries.len() * m_f];
        out.par_chunks_mut(m_f).enumerate().for_each(|(i, block)| {
            let e = entries[i];
            let t = t0 + self.schedule.timestamps_ns[i] as f64 * 1e-9;
            for (c, d, nu) in &prepared {
                let a = c[e.tx as usize * n_rx + e.rx as usize] * doppler_phasor::<f64>(*nu, t);
                for (o, di) in block.iter_mut().zip(d) {
                    *o += a * di;
                }
            }
        });
        Ok(out)
    }

    /// `H(s, ·, ·, ·)` for every schedule entry, laid out `[entry][f]`:
    /// specular part at each entry's own timestamp, one dense draw for the
    /// snapshot, and white noise of variance `noise_var` per sample.
    pub fn realize(&self, snapshot: u64) -> Result<Vec<Complex64>> {
        let m_f = self.scene.m_f();
        let mut out = self.specular(snapshot)?;
        let entries = &self.schedule.codebook.entries;
        if let Some(cov) = &self.dense {
            let draw = cov.sample(&mut substream(self.seed, Domain::Dense, snapshot, 0));
            let n_tx = self.manifolds.n_tx();
            out.par_chunks_mut(m_f).enumerate().for_each(|(i, block)| {
                let e = entries[i];
                let o = (e.rx as usize * n_tx + e.tx as usize) * m_f;
                for (v, d) in block.iter_mut().zip(&draw[o..o + m_f]) {
                    *v += d;
                }
            });
        }
        let nv = self.scene.noise_var();
        if nv > 0.0 {
            out.par_chunks_mut(m_f).enumerate().for_each(|(i, block)| {
                let mut rng = substream(self.seed, Domain::SceneNoise, snapshot, i as u64);
                for v in block.iter_mut() {
                    *v += complex_gaussian(&mut rng, nv);
                }
            });
        }
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("channel realization produced non-finite values".into()));
        }
        Ok(out)
    }
}

/// One-shot convenience around [`Realizer`].
pub fn realize_snapshot(
    scene: &ChannelScene,
    schedule: &SwitchSchedule,
    manifolds: &LinkManifolds<f64>,
    snapshot_index: u64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    Realizer::new(scene, schedule, manifolds, seed)?.realize(snapshot_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrays::Truncation;
    use crate::channel::{tone_offsets, SpecularPath};
    use crate::schedule::{gen_codebook, snapshot_timing, FrameSpec, SwitchMode};

    fn setup(mode: SwitchMode) -> (LinkManifolds<f64>, SwitchSchedule) {
        let m = LinkManifolds::desk(28e9, 2, 2, true, Truncation::Orders { az: 12, el: 8 }).unwrap();
        let cb = gen_codebook(3, 8, 8, true, mode).unwrap();
        (m, snapshot_timing(&cb, &FrameSpec::reference()).unwrap())
    }

    #[test]
    fn empty_scene_is_all_zero() {
        let (m, s) = setup(SwitchMode::PseudoRandom);
        let scene = ChannelScene::new(vec![], tone_offsets(16, 62.5e6), 28e9);
        let h = realize_snapshot(&scene, &s, &m, 0, 1).unwrap();
        assert!(h.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn static_path_repeats_across_snapshots() {
        let (m, s) = setup(SwitchMode::PseudoRandom);
        let p = SpecularPath::co_polar(12e-9, (0.3, 0.1), (-0.2, 0.0), Complex64::new(0.7, 0.2), 0.0);
        let scene = ChannelScene::new(vec![p], tone_offsets(16, 62.5e6), 28e9);
        let r = Realizer::new(&scene, &s, &m, 0).unwrap();
        assert_eq!(r.realize(0).unwrap(), r.realize(4).unwrap());
    }

    #[test]
    fn doppler_advances_phase_with_entry_time() {
        let (m, s) = setup(SwitchMode::PseudoRandom);
        let p0 = SpecularPath::co_polar(12e-9, (0.3, 0.1), (-0.2, 0.0), Complex64::new(0.7, 0.2), 0.0);
        let p1 = SpecularPath { doppler_hz: 100.0, ..p0.clone() };
        let a = realize_snapshot(&ChannelScene::new(vec![p0], tone_offsets(4, 62.5e6), 28e9), &s, &m, 0, 0).unwrap();
        let b = realize_snapshot(&ChannelScene::new(vec![p1], tone_offsets(4, 62.5e6), 28e9), &s, &m, 0, 0).unwrap();
        for (i, &t) in s.timestamps_ns.iter().enumerate() {
            let ratio = b[i * 4] / a[i * 4];
            let expect = 2.0 * std::f64::consts::PI * 100.0 * t as f64 * 1e-9;
            let diff = (ratio.arg() - expect + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
            assert!(diff.abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (m, _) = setup(SwitchMode::Sequential);
        let cb = gen_codebook(0, 4, 8, false, SwitchMode::Sequential).unwrap();
        let s = snapshot_timing(&cb, &FrameSpec::reference()).unwrap();
        let scene = ChannelScene::new(vec![], tone_offsets(4, 1e6), 28e9);
        assert!(matches!(realize_snapshot(&scene, &s, &m, 0, 0), Err(Error::Dimension(_))));
    }
}
