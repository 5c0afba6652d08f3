use std::path::Path;
use std::process::{Command, Output};

use mmsounder::channel::{tone_offsets, ChannelScene};
use serde_json::Value;
use tempfile::TempDir;

fn mmsounder(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsounder")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn ok(output: Output) -> Output {
    assert!(output.status.success(), "exit {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr));
    output
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, value: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(&value).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn budget_reports_receiver_figures() {
    let dir = TempDir::new().unwrap();
    ok(mmsounder(&["budget"], dir.path()));
    let r = read_json(&dir.path().join("budget.json"));
    assert_eq!(r["sensitivity_dbm"].as_f64().unwrap(), -79.0);
    assert!((r["isotropic_sensitivity_dbm"].as_f64().unwrap() + 109.08).abs() < 1e-9);
    assert!((r["max_pathloss_db"].as_f64().unwrap() - 152.08).abs() <= 0.01);
    assert_eq!(r["dynamic_range_db"].as_f64().unwrap(), 75.0);
}

#[test]
fn default_waveform_has_low_papr() {
    let dir = TempDir::new().unwrap();
    ok(mmsounder(&["waveform"], dir.path()));
    let r = read_json(&dir.path().join("waveform_report.json"));
    assert!(r["papr_db"].as_f64().unwrap() <= 0.5);
    assert!(r["flatness_db"].as_f64().unwrap() <= 1e-9);
    for file in ["waveform.bin", "waveform.bin.json", "waveform.csv", "manifest.json"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn single_tone_waveform_is_constant_envelope() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "wf.json", serde_json::json!({ "tones": { "n_tones": 1, "tone_spacing_hz": 5e5 } }));
    ok(mmsounder(&["waveform", "--config", &cfg], &dir.path().join("out")));
    let r = read_json(&dir.path().join("out/waveform_report.json"));
    assert!(r["papr_db"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn invalid_inputs_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let zero_spacing = write_config(dir.path(), "a.json", serde_json::json!({ "tones": { "n_tones": 64, "tone_spacing_hz": 0.0 } }));
    assert_eq!(mmsounder(&["waveform", "--config", &zero_spacing], dir.path()).status.code(), Some(2));
    let unknown = write_config(dir.path(), "b.json", serde_json::json!({ "n_tx": 8, "colour": "blue" }));
    assert_eq!(mmsounder(&["codebook", "--config", &unknown], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("nope.json").display().to_string();
    assert_eq!(mmsounder(&["budget", "--config", &missing], dir.path()).status.code(), Some(2));
    assert_eq!(mmsounder(&["budget", "--threads", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn demo_pdp_peaks_at_the_line_of_sight_bin() {
    let dir = TempDir::new().unwrap();
    ok(mmsounder(&["simulate", "--seed", "3"], dir.path()));
    let csv = std::fs::read_to_string(dir.path().join("pdp.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let peak = rows.iter().cloned().fold((0.0, f64::MIN), |a, r| if r.1 > a.1 { r } else { a });
    // 20 bins of 1/(256 · 4 MHz).
    assert!((peak.0 - 20.0 / 1.024).abs() < 1e-3, "peak at {} ns", peak.0);
    for file in ["cir.bin", "codebook.json", "scene.json", "pas.csv", "acquire_report.json", "manifest.json"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(mmsounder(&["simulate", "--seed", "5", "--threads", "1"], &a));
    ok(mmsounder(&["simulate", "--seed", "5", "--threads", "3"], &b));
    for file in ["cir.bin", "pdp.csv", "pas.csv", "manifest.json"] {
        assert!(std::fs::read(a.join(file)).unwrap() == std::fs::read(b.join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn estimate_on_simulated_noise_finds_no_paths() {
    let dir = TempDir::new().unwrap();
    let scene = ChannelScene::new(vec![], tone_offsets(64, 4e6), 28e9);
    scene.write_json(&dir.path().join("scene.json")).unwrap();
    let sim = write_config(
        dir.path(),
        "sim.json",
        serde_json::json!({ "scene": "scene.json", "noise": { "kind": "delay_floor", "power": 1e-6 }, "n_snapshots": 1 }),
    );
    ok(mmsounder(&["simulate", "--config", &sim], dir.path()));
    let est = write_config(dir.path(), "est.json", serde_json::json!({ "cir": "cir.bin", "codebook": "codebook.json" }));
    ok(mmsounder(&["estimate", "--config", &est], &dir.path().join("est")));
    let r = read_json(&dir.path().join("est/estimates.json"));
    assert_eq!(r[0]["paths"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("est/tracks.csv").exists());
}

#[test]
fn corrupted_cir_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    ok(mmsounder(&["simulate", "--seed", "1"], dir.path()));
    let cir = dir.path().join("cir.bin");
    let mut bytes = std::fs::read(&cir).unwrap();
    let n = bytes.len();
    bytes.truncate(n - 17);
    std::fs::write(&cir, bytes).unwrap();
    let est = write_config(dir.path(), "est.json", serde_json::json!({ "cir": "cir.bin", "codebook": "codebook.json" }));
    let out = mmsounder(&["estimate", "--config", &est], &dir.path().join("est"));
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ambiguity_writes_curve_and_summary() {
    let dir = TempDir::new().unwrap();
    ok(mmsounder(&["ambiguity", "--seed", "2"], dir.path()));
    let s = read_json(&dir.path().join("ambiguity_summary.json"));
    assert!(s["doppler_search_limit_hz"].as_f64().unwrap() > 1000.0);
    let csv = std::fs::read_to_string(dir.path().join("ambiguity.csv")).unwrap();
    assert!(csv.starts_with("doppler_hz,magnitude\n1") || csv.starts_with("doppler_hz,magnitude\n0"));
}
