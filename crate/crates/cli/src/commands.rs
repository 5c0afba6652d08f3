use std::path::{Path, PathBuf};

use anyhow::Context as _;
use log::{debug, info};
use mmsounder::arrays::LinkManifolds;
use mmsounder::channel::{tone_offsets, ChannelScene};
use mmsounder::estimation::{
    estimate_dense, doppler_ambiguity, doppler_search_limit, read_results_json, track_aoa, write_results_json,
    write_tracks_csv, EstimationResult, Observation, SpecularEstimator, Tracks,
};
use mmsounder::schedule::{gen_codebook, snapshot_timing, SwitchSchedule};
use mmsounder::sounder::{
    acquire, link_budget_report, pas, pdp_average, write_pas_csv, write_pdp_csv, AcquireConfig, CirTensor, Selection,
};
use mmsounder::waveform::{gen_multitone, papr_db, spectrum_flatness, ToneGrid};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::*;
use crate::manifest::write_manifest;
use crate::{demo, input_error, Context};

/// PAPR of the optimized sounding waveform the default configuration is
/// compared against.
const REFERENCE_PAPR_DB: f64 = 0.349;

fn load<C: DeserializeOwned + Default>(ctx: &Context) -> anyhow::Result<C> {
    match &ctx.config {
        None => Ok(C::default()),
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| input_error(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| input_error(format!("config {}: {e}", p.display())))
        }
    }
}

fn out_dir(ctx: &Context) -> anyhow::Result<&Path> {
    std::fs::create_dir_all(&ctx.out).map_err(|e| input_error(format!("cannot create {}: {e}", ctx.out.display())))?;
    Ok(&ctx.out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Relative paths in a config are taken relative to the config file.
fn resolve(ctx: &Context, p: &Path) -> PathBuf {
    match ctx.config.as_ref().and_then(|c| c.parent()) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn build_schedule(ctx: &Context, cfg: &ScheduleConfig, n_tx: u32, n_rx: u32, dual_pol: bool, seed: u64) -> anyhow::Result<SwitchSchedule> {
    let schedule = match &cfg.codebook {
        Some(p) => SwitchSchedule::read_json(&resolve(ctx, p))?,
        None => snapshot_timing(&gen_codebook(seed, n_tx, n_rx, dual_pol, cfg.mode)?, &cfg.frame)?,
    };
    if schedule.codebook.n_tx != n_tx || schedule.codebook.n_rx != n_rx {
        return Err(input_error(format!(
            "codebook is {}×{}, arrays have {n_tx}×{n_rx} elements",
            schedule.codebook.n_tx, schedule.codebook.n_rx
        )));
    }
    Ok(schedule)
}

fn manifolds(array: &ArrayConfig, carrier_hz: f64) -> anyhow::Result<LinkManifolds<f64>> {
    Ok(LinkManifolds::desk(carrier_hz, array.rows, array.cols, array.dual_pol, array.truncation)?)
}

pub fn waveform(ctx: &Context) -> anyhow::Result<()> {
    let cfg: WaveformConfig = load(ctx)?;
    let w = gen_multitone::<f64>(&cfg.tones, cfg.oversampling, &cfg.phase_rule)?;
    let out = out_dir(ctx)?;
    let papr = papr_db(&w)?;
    let flatness = spectrum_flatness(&w)?;
    let bin = out.join("waveform.bin");
    w.export(&bin)?;
    let mut csv = String::from("time_s,i,q,magnitude\n");
    for (n, s) in w.samples.iter().enumerate() {
        csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", n as f64 / w.sample_rate_hz, s.re, s.im, s.norm()));
    }
    let csv_path = out.join("waveform.csv");
    std::fs::write(&csv_path, csv)?;
    let report_path = out.join("waveform_report.json");
    write_json(
        &report_path,
        &serde_json::json!({
            "n_tones": cfg.tones.n_tones,
            "n_samples": w.samples.len(),
            "sample_rate_hz": w.sample_rate_hz,
            "papr_db": papr,
            "flatness_db": flatness,
            "reference_papr_db": REFERENCE_PAPR_DB,
        }),
    )?;
    println!("PAPR {papr:.3} dB (reference {REFERENCE_PAPR_DB} dB), tone flatness {flatness:.2e} dB");
    let mut side = bin.clone().into_os_string();
    side.push(".json");
    write_manifest(out, "waveform", None, &cfg, &[bin, side.into(), csv_path, report_path])
}

pub fn codebook(ctx: &Context) -> anyhow::Result<()> {
    let cfg: CodebookConfig = load(ctx)?;
    let seed = ctx.seed.unwrap_or(0);
    let schedule = snapshot_timing(&gen_codebook(seed, cfg.n_tx, cfg.n_rx, cfg.dual_pol, cfg.mode)?, &cfg.frame)?;
    let out = out_dir(ctx)?;
    let path = out.join("codebook.json");
    schedule.write_json(&path)?;
    println!(
        "{} entries, frame {} ns, snapshot {:.4} ms, checksum {}",
        schedule.n_entries(),
        schedule.frame_duration_ns(),
        schedule.snapshot_duration_s() * 1e3,
        schedule.checksum()
    );
    write_manifest(out, "codebook", Some(seed), &cfg, &[path])
}

fn tone_grid_of(scene: &ChannelScene) -> anyhow::Result<ToneGrid> {
    let f = &scene.frequencies_hz;
    let m = f.len();
    let spacing = if m > 1 { f[1] - f[0] } else { 1.0 };
    let expect = tone_offsets(m, spacing);
    if f.iter().zip(&expect).any(|(a, b)| (a - b).abs() > 1e-6 * spacing) {
        return Err(input_error("simulation needs a uniform tone grid centred as (k − M/2)·δf"));
    }
    Ok(ToneGrid::new(m, spacing))
}

pub fn simulate(ctx: &Context) -> anyhow::Result<()> {
    let cfg: SimulateConfig = load(ctx)?;
    let seed = ctx.seed.unwrap_or(0);
    let scene = match &cfg.scene {
        Some(p) => ChannelScene::read_json(&resolve(ctx, p))?,
        None => demo::corridor(),
    };
    let m = manifolds(&cfg.array, scene.carrier_hz)?;
    let n = cfg.array.n_elements() as u32;
    let schedule = build_schedule(ctx, &cfg.schedule, n, n, cfg.array.dual_pol, seed)?;
    let waveform = gen_multitone::<f64>(&tone_grid_of(&scene)?, 4, &cfg.phase_rule)?;
    let acq_cfg = AcquireConfig { noise: cfg.noise, n_snapshots: cfg.n_snapshots, seed, lo_phase_max_rad: cfg.lo_phase_max_rad };
    info!("acquiring {} snapshots of {} entries", cfg.n_snapshots, schedule.n_entries());
    let acq = acquire(&scene, &schedule, &waveform, &m, &acq_cfg)?;
    if acq.report.saturated {
        log::warn!("receiver saturates: peak {:?} dBm", acq.report.peak_rx_dbm);
    }

    let out = out_dir(ctx)?;
    let files = [
        out.join("cir.bin"),
        out.join("codebook.json"),
        out.join("scene.json"),
        out.join("pdp.csv"),
        out.join("pas.csv"),
        out.join("acquire_report.json"),
    ];
    acq.cir.write(&files[0])?;
    schedule.write_json(&files[1])?;
    scene.write_json(&files[2])?;
    let profile = pdp_average(&acq.cir, &Selection::default())?;
    write_pdp_csv(&files[3], &profile, acq.cir.delay_step_s)?;
    let (az, el) = cfg.pas.axes()?;
    let rad = |v: &[f64]| v.iter().map(|d| d.to_radians()).collect::<Vec<_>>();
    let spectrum = pas(&acq.cir, &m, &rad(&az), &rad(&el))?;
    write_pas_csv(&files[4], &spectrum, &az, &el)?;
    write_json(&files[5], &acq.report)?;
    let peak = profile.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    println!(
        "CIR {:?}, PDP peak at {:.3} ns, averaged noise variance {:.3e}",
        acq.cir.dims(),
        peak.0 as f64 * acq.cir.delay_step_s * 1e9,
        acq.report.averaged_noise_var
    );
    write_manifest(out, "simulate", Some(seed), &cfg, &files)
}

fn write_tracks(out: &Path, tracks: &Tracks) -> anyhow::Result<[PathBuf; 2]> {
    let csv = out.join("tracks.csv");
    let events = out.join("track_events.json");
    write_tracks_csv(&csv, tracks)?;
    write_json(&events, &tracks.events)?;
    Ok([csv, events])
}

pub fn estimate(ctx: &Context) -> anyhow::Result<()> {
    let cfg: EstimateConfig = load(ctx)?;
    let cir = CirTensor::<f64>::read(&resolve(ctx, &cfg.cir))?;
    let schedule = SwitchSchedule::read_json(&resolve(ctx, &cfg.codebook))?;
    let m = manifolds(&cfg.array, cfg.carrier_hz)?;
    let snapshots = cfg.snapshots.clone().unwrap_or_else(|| (0..cir.n_snapshots).collect());
    if snapshots.is_empty() {
        return Err(input_error("no snapshots selected"));
    }
    let estimator = SpecularEstimator::new(&m, &schedule, cfg.estimator.clone())?;
    debug!("Doppler search limit {:.1} Hz", estimator.doppler_limit_hz);
    let span = schedule.snapshot_duration_s();
    let mut observations = Vec::with_capacity(snapshots.len());
    let mut results: Vec<EstimationResult> = Vec::with_capacity(snapshots.len());
    for &s in &snapshots {
        let obs = Observation::from_cir(&cir, s, &schedule)?;
        let r = estimator.estimate(&obs)?;
        info!("snapshot {s}: {} paths, converged {}", r.paths.len(), r.converged);
        if !r.converged {
            log::warn!("snapshot {s}: refinement did not converge");
        }
        observations.push(obs);
        results.push(r);
    }
    if cfg.dense {
        let residuals = observations
            .iter()
            .zip(&results)
            .map(|(o, r)| estimator.residual(o, &r.specular_paths()))
            .collect::<mmsounder::Result<Vec<_>>>()?;
        let fit = estimate_dense(&residuals, &m)?;
        if let Some(d) = &fit.diagnostic {
            info!("dense fit: {d}");
        }
        results.iter_mut().for_each(|r| r.dense_fit = Some(fit.clone()));
    }

    let out = out_dir(ctx)?;
    let files: Vec<_> = snapshots.iter().zip(&results).map(|(&s, r)| r.to_file(s, s as f64 * span)).collect();
    let est_path = out.join("estimates.json");
    write_results_json(&est_path, &files)?;
    let timed: Vec<_> = snapshots.iter().map(|&s| s as f64 * span).zip(results.iter().cloned()).collect();
    let tracks = track_aoa(&timed, &cfg.tracking)?;
    let [csv, events] = write_tracks(out, &tracks)?;
    for f in &files {
        println!("snapshot {}: {} paths", f.snapshot, f.paths.len());
        for p in &f.paths {
            println!(
                "  τ {:8.3} ns  AoA ({:7.2}°, {:6.2}°)  AoD ({:7.2}°, {:6.2}°)  ν {:9.2} Hz  {:7.2} dB",
                p.path.delay_ns, p.path.aoa_az_deg, p.path.aoa_el_deg, p.path.aod_az_deg, p.path.aod_el_deg, p.path.doppler_hz, p.power_db
            );
        }
    }
    write_manifest(out, "estimate", None, &cfg, &[est_path, csv, events])
}

pub fn budget(ctx: &Context) -> anyhow::Result<()> {
    let cfg: BudgetConfig = load(ctx)?;
    let report = link_budget_report(&cfg.budget)?;
    let out = out_dir(ctx)?;
    let path = out.join("budget.json");
    write_json(&path, &report)?;
    println!("sensitivity {:.2} dBm", report.sensitivity_dbm);
    println!("isotropic sensitivity {:.2} dBm", report.isotropic_sensitivity_dbm);
    println!("max pathloss {:.2} dB", report.max_pathloss_db);
    println!("dynamic range {:.2} dB", report.dynamic_range_db);
    write_manifest(out, "budget", None, &cfg, &[path])
}

pub fn ambiguity(ctx: &Context) -> anyhow::Result<()> {
    let cfg: AmbiguityConfig = load(ctx)?;
    let seed = ctx.seed.unwrap_or(0);
    let schedule = build_schedule(ctx, &cfg.schedule, cfg.n_tx, cfg.n_rx, cfg.dual_pol, seed)?;
    if !(cfg.step_hz > 0.0) {
        return Err(input_error("step_hz must be positive"));
    }
    let top = cfg.max_hz.unwrap_or(0.5 / (schedule.frame_duration_ns() as f64 * 1e-9));
    if !(top >= 0.0 && top.is_finite()) {
        return Err(input_error("max_hz must be non-negative"));
    }
    let n = (top / cfg.step_hz).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * cfg.step_hz).collect();
    let af = doppler_ambiguity(&schedule, &grid)?;
    let span = schedule.snapshot_duration_s();
    let out = out_dir(ctx)?;
    let csv = out.join("ambiguity.csv");
    let mut s = String::from("doppler_hz,magnitude\n");
    for (nu, m) in af.doppler_grid_hz.iter().zip(&af.magnitude) {
        s.push_str(&format!("{nu},{m}\n"));
    }
    std::fs::write(&csv, s)?;
    let limit = doppler_search_limit(&schedule)?;
    let summary = out.join("ambiguity_summary.json");
    let max_sidelobe = af.max_sidelobe(2.0 / span);
    write_json(
        &summary,
        &serde_json::json!({
            "mode": schedule.codebook.mode,
            "seed": seed,
            "first_grating_hz": af.first_grating(0.9),
            "max_sidelobe": max_sidelobe,
            "doppler_search_limit_hz": limit,
        }),
    )?;
    println!("max sidelobe {max_sidelobe:.3}, unambiguous Doppler ±{limit:.1} Hz");
    write_manifest(out, "ambiguity", Some(seed), &cfg, &[csv, summary])
}

pub fn track(ctx: &Context) -> anyhow::Result<()> {
    let cfg: TrackRunConfig = load(ctx)?;
    let files = read_results_json(&resolve(ctx, &cfg.results))?;
    let timed: Vec<_> = files.iter().map(|f| (f.time_s, f.to_result())).collect();
    let tracks = track_aoa(&timed, &cfg.tracking)?;
    let out = out_dir(ctx)?;
    let paths = write_tracks(out, &tracks)?;
    println!("{} tracks over {} snapshots", tracks.n_tracks(), files.len());
    write_manifest(out, "track", None, &cfg, &paths)
}
