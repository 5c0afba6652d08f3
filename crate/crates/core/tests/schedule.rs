use std::collections::HashSet;

use mmsounder::schedule::{
    build_frame, gen_codebook, max_unambiguous_doppler, snapshot_timing, FrameSpec, Polarization, SwitchCodebook, SwitchMode,
};

const SIZES: [(u32, u32); 5] = [(1, 2), (8, 8), (16, 32), (64, 128), (128, 256)];

fn check_invariants(cb: &SwitchCodebook) {
    let mut seen: Vec<(u32, u32)> = cb.entries.iter().map(|e| (e.tx, e.rx)).collect();
    seen.sort_unstable();
    let all: Vec<(u32, u32)> = (0..cb.n_tx).flat_map(|t| (0..cb.n_rx).map(move |r| (t, r))).collect();
    assert_eq!(seen, all, "not a permutation");
    if cb.dual_pol {
        let pos = cb.positions();
        for t in 0..cb.n_tx {
            for k in 0..cb.n_rx / 2 {
                let h = pos[(t * cb.n_rx + 2 * k) as usize];
                let v = pos[(t * cb.n_rx + 2 * k + 1) as usize];
                assert_eq!(v, h + 1, "pair ({t}, {k}) split");
                assert_eq!(cb.entries[h].pol, Polarization::H);
                assert_eq!(cb.entries[v].pol, Polarization::V);
            }
        }
    }
}

#[test]
fn codebook_invariants_over_seeds_and_sizes() {
    for seed in 0..20 {
        for &(n_tx, n_rx) in &SIZES {
            for dual in [false, true] {
                for mode in [SwitchMode::Sequential, SwitchMode::PseudoRandom] {
                    let cb = gen_codebook(seed, n_tx, n_rx, dual, mode).unwrap();
                    assert_eq!(cb.len(), (n_tx * n_rx) as usize);
                    check_invariants(&cb);
                }
            }
        }
    }
}

#[test]
fn seeds_reproduce_and_differ() {
    let a = gen_codebook(11, 8, 8, true, SwitchMode::PseudoRandom).unwrap();
    assert_eq!(a, gen_codebook(11, 8, 8, true, SwitchMode::PseudoRandom).unwrap());
    let orders: HashSet<Vec<(u32, u32)>> = (0..100)
        .map(|s| gen_codebook(s, 8, 8, true, SwitchMode::PseudoRandom).unwrap().entries.iter().map(|e| (e.tx, e.rx)).collect())
        .collect();
    assert_eq!(orders.len(), 100);
}

#[test]
fn full_snapshot_timing() {
    let frame = FrameSpec::reference();
    assert_eq!(frame.frame_duration_ns(), 7 * 2600 + 100);
    let cb = gen_codebook(0, 128, 256, true, SwitchMode::PseudoRandom).unwrap();
    let s = snapshot_timing(&cb, &frame).unwrap();
    assert_eq!(s.n_entries(), 32768);
    assert_eq!(s.snapshot_duration_ns, 32768 * 18_300);
    assert!((s.snapshot_duration_s() - 0.599_654_4).abs() < 1e-12);
    assert!(s.timestamps_ns.windows(2).all(|w| w[1] - w[0] == 18_300));
}

#[test]
fn frame_arithmetic() {
    let us = |f: FrameSpec| build_frame(&f).unwrap() * 1e6;
    assert!((us(FrameSpec::from_seconds(2.6e-6, 1, 0, 0, 0.0).unwrap()) - 2.6).abs() < 1e-12);
    assert!((us(FrameSpec::from_seconds(2.6e-6, 2, 2, 1, 1e-7).unwrap()) - 13.1).abs() < 1e-12);
}

#[test]
fn across_snapshot_doppler_limit() {
    let frame = FrameSpec::reference();
    let s = |n_tx, n_rx| snapshot_timing(&gen_codebook(0, n_tx, n_rx, false, SwitchMode::Sequential).unwrap(), &frame).unwrap();
    assert!((max_unambiguous_doppler(&s(8, 8)) - 1.0 / (2.0 * 64.0 * 18.3e-6)).abs() < 1e-9);
    assert!((max_unambiguous_doppler(&s(1, 1)) - 1.0 / (2.0 * 18.3e-6)).abs() < 1e-6);
    assert!((max_unambiguous_doppler(&s(128, 256)) - 1.0 / (2.0 * 0.599_654_4)).abs() < 1e-9);
}
