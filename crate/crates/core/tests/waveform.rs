use mmsounder::waveform::{gen_multitone, papr_db, spectrum_flatness, PhaseRule, SoundingWaveform, ToneGrid};
use num_complex::Complex64;

/// `|Σ_k e^{j(2π f_k t + φ_k)}|²` at `t = n·T/(factor·N)` for one comb period,
/// summed tone by tone with a rotating phasor.
fn direct_envelope(w: &SoundingWaveform<f64>, factor: usize) -> Vec<f64> {
    let n = w.samples.len() * factor;
    let dt = 1.0 / (w.sample_rate_hz * factor as f64);
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (f, phi) in w.grid.tone_frequencies_hz().iter().zip(&w.phases) {
        let step = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (f * dt).rem_euclid(1.0));
        let mut z = Complex64::from_polar(1.0, *phi);
        for (i, a) in acc.iter_mut().enumerate() {
            // Re-anchor periodically so the recurrence does not drift.
            if i % 4096 == 0 {
                z = Complex64::from_polar(1.0, phi + 2.0 * std::f64::consts::PI * (f * dt * i as f64).rem_euclid(1.0));
            }
            *a += z;
            z *= step;
        }
    }
    acc.iter().map(|v| v.norm_sqr()).collect()
}

fn papr_of(p: &[f64]) -> f64 {
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    10.0 * (p.iter().cloned().fold(0.0, f64::max) / mean).log10()
}

#[test]
fn default_waveform_papr_matches_fine_grid_summation() {
    let w = gen_multitone::<f64>(&ToneGrid::reference(), 4, &PhaseRule::default()).unwrap();
    let sampled = papr_db(&w).unwrap();
    let fine = direct_envelope(&w, 10);
    let oracle = papr_of(&fine);
    eprintln!("PAPR sampled {sampled:.4} dB, 10x direct summation {oracle:.4} dB");
    assert!(oracle <= 0.5, "{oracle}");
    assert!(oracle >= sampled - 1e-9);
    assert!(oracle - sampled < 0.05);

    // Every tenth fine-grid point is a waveform sample, up to one overall scale.
    let scale = fine[0] / w.samples[0].norm_sqr();
    for (i, s) in w.samples.iter().enumerate() {
        assert!((s.norm_sqr() * scale - fine[10 * i]).abs() <= 1e-6 * fine[10 * i].max(1.0), "sample {i}");
    }
}

#[test]
fn refinement_lowers_papr_of_quadratic_phases() {
    let quadratic = gen_multitone::<f64>(&ToneGrid::reference(), 4, &PhaseRule::ZadoffChuQuadratic { root: 1 }).unwrap();
    let refined = gen_multitone::<f64>(&ToneGrid::reference(), 4, &PhaseRule::default()).unwrap();
    let (q, r) = (papr_db(&quadratic).unwrap(), papr_db(&refined).unwrap());
    eprintln!("quadratic {q:.3} dB, refined {r:.3} dB");
    assert!(r < q);
}

#[test]
fn every_rule_gives_a_flat_spectrum() {
    let grid = ToneGrid::new(301, 5e5);
    let rules = [
        PhaseRule::ZadoffChuQuadratic { root: 2 },
        PhaseRule::ZadoffChuRefined { root: 1, iterations: 50, clip_ratio: 1.05 },
        PhaseRule::Explicit { phases: (0..301).map(|k| (k * k) as f64 * 0.37).collect() },
    ];
    for rule in rules {
        let w = gen_multitone::<f64>(&grid, 2, &rule).unwrap();
        assert!(spectrum_flatness(&w).unwrap() <= 1e-9, "{rule:?}");
    }
}

#[test]
fn circular_shift_keeps_tone_magnitudes() {
    let w = gen_multitone::<f64>(&ToneGrid::new(200, 5e5), 4, &PhaseRule::ZadoffChuQuadratic { root: 3 }).unwrap();
    let before: Vec<f64> = w.tone_spectrum().iter().map(|v| v.norm()).collect();
    let mut shifted = w.clone();
    shifted.samples.rotate_left(137);
    let after: Vec<f64> = shifted.tone_spectrum().iter().map(|v| v.norm()).collect();
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn parseval_holds() {
    let w = gen_multitone::<f64>(&ToneGrid::new(500, 5e5), 4, &PhaseRule::ZadoffChuQuadratic { root: 1 }).unwrap();
    let n = w.samples.len() as f64;
    let time: f64 = w.samples.iter().map(|v| v.norm_sqr()).sum();
    let freq: f64 = w.spectrum().iter().map(|v| v.norm_sqr()).sum::<f64>() * n;
    assert!((time - freq).abs() <= 1e-9 * time);
}

#[test]
fn two_equal_tones_and_one_tone() {
    let two = gen_multitone::<f64>(&ToneGrid::new(2, 5e5), 4, &PhaseRule::Explicit { phases: vec![0.0, 0.0] }).unwrap();
    assert!((papr_db(&two).unwrap() - 3.010_299_956_639_812).abs() < 1e-9);
    let one = gen_multitone::<f64>(&ToneGrid::new(1, 5e5), 4, &PhaseRule::Explicit { phases: vec![1.3] }).unwrap();
    assert!(papr_db(&one).unwrap().abs() < 1e-12);
}
