use std::f64::consts::{FRAC_PI_2, PI};

use mmsounder::arrays::{compute_eadf, direction, synth_pattern, ArrayGeometry, ElementModel, GridSpec, PatternGrid, Truncation, SPEED_OF_LIGHT};
use mmsounder::schedule::Polarization;
use mmsounder::EadfF64;
use num_complex::Complex64;
use rustfft::FftPlanner;

const F: f64 = 28e9;

fn panel() -> (ArrayGeometry, PatternGrid<f64>) {
    let geometry = ArrayGeometry::upa(2, 2, 0.5 * SPEED_OF_LIGHT / F, true);
    let grid = synth_pattern(&ElementModel::reference_patch(), &geometry, &GridSpec::single_frequency(F)).unwrap();
    (geometry, grid)
}

/// Values of one slice on a grid `factor` times denser than the extended
/// source grid, by zero-padding the coefficient spectrum and transforming.
fn oversampled(eadf: &EadfF64, element: usize, pol: usize, factor: usize) -> (usize, usize, Vec<Complex64>) {
    let na = eadf.spec.n_az() * factor;
    let ne = 2 * (eadf.spec.n_el() - 1) * factor;
    let (oa, oe) = (eadf.order_az as i64, eadf.order_el as i64);
    let block = ((2 * oa + 1) * (2 * oe + 1)) as usize;
    let c = &eadf.coefficients[(element * 2 + pol) * block..(element * 2 + pol + 1) * block];
    let mut buf = vec![Complex64::new(0.0, 0.0); na * ne];
    for (mi, m) in (-oa..=oa).enumerate() {
        for (ni, n) in (-oe..=oe).enumerate() {
            let (r, col) = (n.rem_euclid(ne as i64) as usize, m.rem_euclid(na as i64) as usize);
            buf[r * na + col] += c[mi * (2 * oe + 1) as usize + ni];
        }
    }
    let mut planner = FftPlanner::new();
    let rows = planner.plan_fft_inverse(na);
    buf.chunks_exact_mut(na).for_each(|r| rows.process(r));
    let cols = planner.plan_fft_inverse(ne);
    let mut col = vec![Complex64::new(0.0, 0.0); ne];
    for i in 0..na {
        (0..ne).for_each(|j| col[j] = buf[j * na + i]);
        cols.process(&mut col);
        (0..ne).for_each(|j| buf[j * na + i] = col[j]);
    }
    (na, ne, buf)
}

#[test]
fn manifold_between_nodes_matches_oversampled_fft() {
    let (_, grid) = panel();
    let eadf = compute_eadf(&grid, Truncation::Full).unwrap();
    let factor = 10;
    let mut worst: f64 = 0.0;
    for (element, pol) in [(0, 0), (1, 1), (2, 0), (3, 1), (3, 0)] {
        let (na, ne, dense) = oversampled(&eadf, element, pol, factor);
        let peak = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let el_max = factor * (eadf.spec.n_el() - 1);
        for j in (0..=el_max).step_by(7) {
            for i in (0..na).step_by(13) {
                let az = -PI + 2.0 * PI * i as f64 / na as f64;
                let el = -FRAC_PI_2 + 2.0 * PI * j as f64 / ne as f64;
                let got = eadf.eval(element, pol, 0, az, el);
                worst = worst.max((got - dense[j * na + i]).norm() / peak);
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative deviation {worst:e}");
}

#[test]
fn full_truncation_round_trip() {
    let (_, grid) = panel();
    let eadf = compute_eadf(&grid, Truncation::Full).unwrap();
    assert!(eadf.reconstruction_error_db <= -40.0, "{}", eadf.reconstruction_error_db);
    let spec = &grid.spec;
    let (mut err, mut total) = (0.0, 0.0);
    for j in (0..spec.n_el()).step_by(3) {
        for i in (0..spec.n_az()).step_by(5) {
            let resp = eadf.response_at(0, spec.az_deg(i).to_radians(), spec.el_deg(j).to_radians()).unwrap();
            for (e, r) in resp.iter().enumerate() {
                for p in 0..2 {
                    err += (r[p] - grid.get(e, p, 0, i, j)).norm_sqr();
                    total += grid.get(e, p, 0, i, j).norm_sqr();
                }
            }
        }
    }
    let db = 10.0 * (err / total).log10();
    assert!(db <= -40.0, "{db}");
}

#[test]
fn lossy_truncation_is_reported() {
    let (_, grid) = panel();
    let eadf = compute_eadf(&grid, Truncation::Orders { az: 1, el: 1 }).unwrap();
    assert!(eadf.reconstruction_error_db > -10.0, "{}", eadf.reconstruction_error_db);
}

#[test]
fn element_phase_follows_geometry() {
    let (geometry, grid) = panel();
    let eadf = compute_eadf(&grid, Truncation::Full).unwrap();
    let k = 2.0 * PI * F / SPEED_OF_LIGHT;
    let spec = &grid.spec;
    for (i, j) in [(90, 18), (100, 20), (75, 15), (110, 24)] {
        let (az, el) = (spec.az_deg(i).to_radians(), spec.el_deg(j).to_radians());
        let resp = eadf.response_at(0, az, el).unwrap();
        let u = direction(az, el);
        // Elements 0 and 2 are the H feeds of two different patches.
        let dp: f64 = (0..3).map(|d| (geometry.element_positions[2][d] - geometry.element_positions[0][d]) * u[d]).sum();
        let measured = (resp[2][0] / resp[0][0]).arg();
        let expected = (k * dp + PI).rem_euclid(2.0 * PI) - PI;
        assert!((measured - expected).abs() < 1e-6, "({i}, {j}): {measured} vs {expected}");
    }
}

#[test]
fn broadside_is_the_scan_maximum() {
    let grid = synth_pattern::<f64>(&ElementModel::reference_patch(), &ArrayGeometry::single(Polarization::H), &GridSpec::single_frequency(F)).unwrap();
    let eadf = compute_eadf(&grid, Truncation::Full).unwrap();
    let broadside = eadf.eval(0, 0, 0, 0.0, 0.0).norm();
    for az in (-180..180).step_by(5) {
        for el in (-90..=90).step_by(5) {
            let v = eadf.eval(0, 0, 0, (az as f64).to_radians(), (el as f64).to_radians()).norm();
            assert!(v <= broadside + 1e-9, "({az}, {el})");
        }
    }
}
