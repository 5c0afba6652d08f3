mod common;

use common::{desk_manifolds, measure, observe, schedule, scene, three_paths};
use mmsounder::estimation::{estimate_specular, EstimatorConfig};
use mmsounder::schedule::SwitchMode;
use mmsounder::sounder::NoiseSpec;

fn run_once() -> (Vec<u8>, String) {
    let (m, s) = (desk_manifolds(), schedule(SwitchMode::PseudoRandom, 7));
    let acq = measure(&scene(three_paths()), &s, &m, NoiseSpec::Snr { snr_db: 30.0 }, 2, 11);
    let result = estimate_specular(&observe(&acq, &s, 1), &m, &s, &EstimatorConfig::default()).unwrap();
    (acq.cir.to_bytes().unwrap(), serde_json::to_string(&result.to_file(1, 0.6)).unwrap())
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let in_pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(run_once);
    let reference = in_pool(1);
    for threads in [2, 4] {
        let (cir, json) = in_pool(threads);
        assert!(cir == reference.0, "CIR bytes differ with {threads} threads");
        assert_eq!(json, reference.1, "{threads} threads");
    }
}
