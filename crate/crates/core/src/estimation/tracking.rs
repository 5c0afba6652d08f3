//! Snapshot-to-snapshot association of estimated paths.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::result::EstimationResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub gate_delay_ns: f64,
    pub gate_az_deg: f64,
    /// Paths weaker than the snapshot's strongest by more than this are ignored.
    pub cutoff_db: f64,
    /// Snapshots a track may go unmatched before it ends.
    pub max_missed: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig { gate_delay_ns: 2.0, gate_az_deg: 5.0, cutoff_db: 30.0, max_missed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub time_s: f64,
    pub track_id: usize,
    pub az_deg: f64,
    pub el_deg: f64,
    pub delay_ns: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackEvent {
    Appeared { track_id: usize, snapshot: usize },
    /// `snapshot` is the last one the track was seen in.
    Disappeared { track_id: usize, snapshot: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tracks {
    pub records: Vec<TrackRecord>,
    pub events: Vec<TrackEvent>,
}

impl Tracks {
    pub fn track(&self, id: usize) -> impl Iterator<Item = &TrackRecord> {
        self.records.iter().filter(move |r| r.track_id == id)
    }

    pub fn n_tracks(&self) -> usize {
        self.records.iter().map(|r| r.track_id + 1).max().unwrap_or(0)
    }
}

struct Live {
    id: usize,
    last: TrackRecord,
    last_snapshot: usize,
}

fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

/// Nearest-neighbour association in (delay, azimuth AOA). `snapshots` holds
/// each snapshot's time and estimate, in time order.
pub fn track_aoa(snapshots: &[(f64, EstimationResult)], config: &TrackConfig) -> Result<Tracks> {
    if !(config.gate_delay_ns > 0.0 && config.gate_az_deg > 0.0) {
        return Err(Error::invalid("tracking gates must be positive"));
    }
    if snapshots.windows(2).any(|w| !(w[1].0 >= w[0].0)) {
        return Err(Error::invalid("snapshot times must be non-decreasing"));
    }
    let mut out = Tracks::default();
    let mut live: Vec<Live> = Vec::new();
    let mut next_id = 0;
    for (s, (time_s, result)) in snapshots.iter().enumerate() {
        let strongest = result.paths.iter().map(|p| p.power).fold(0.0, f64::max);
        let keep = strongest * 10f64.powf(-config.cutoff_db / 10.0);
        let obs: Vec<TrackRecord> = result
            .paths
            .iter()
            .filter(|p| p.power > 0.0 && p.power >= keep)
            .map(|p| TrackRecord {
                time_s: *time_s,
                track_id: usize::MAX,
                az_deg: p.path.aoa_az_rad.to_degrees(),
                el_deg: p.path.aoa_el_rad.to_degrees(),
                delay_ns: p.path.delay_s * 1e9,
                power_db: 10.0 * p.power.log10(),
            })
            .collect();

        let mut pairs = Vec::new();
        for (li, l) in live.iter().enumerate() {
            for (oi, o) in obs.iter().enumerate() {
                let dt = (o.delay_ns - l.last.delay_ns) / config.gate_delay_ns;
                let da = wrap_deg(o.az_deg - l.last.az_deg) / config.gate_az_deg;
                let d = (dt * dt + da * da).sqrt();
                if d <= 1.0 {
                    pairs.push((d, l.id, li, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
        let mut live_used = vec![false; live.len()];
        let mut obs_track = vec![None; obs.len()];
        for (_, _, li, oi) in pairs {
            if !live_used[li] && obs_track[oi].is_none() {
                live_used[li] = true;
                obs_track[oi] = Some(li);
            }
        }
        for (oi, mut rec) in obs.into_iter().enumerate() {
            match obs_track[oi] {
                Some(li) => {
                    rec.track_id = live[li].id;
                    live[li].last = rec.clone();
                    live[li].last_snapshot = s;
                }
                None => {
                    rec.track_id = next_id;
                    out.events.push(TrackEvent::Appeared { track_id: next_id, snapshot: s });
                    live.push(Live { id: next_id, last: rec.clone(), last_snapshot: s });
                    next_id += 1;
                }
            }
            out.records.push(rec);
        }
        live.retain(|l| {
            let alive = s - l.last_snapshot <= config.max_missed;
            if !alive {
                out.events.push(TrackEvent::Disappeared { track_id: l.id, snapshot: l.last_snapshot });
            }
            alive
        });
    }
    Ok(out)
}

pub fn write_tracks_csv(path: &Path, tracks: &Tracks) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "time_s,track_id,az_deg,el_deg,delay_ns,power_db")?;
    for r in &tracks.records {
        writeln!(f, "{},{},{},{},{},{}", r.time_s, r.track_id, r.az_deg, r.el_deg, r.delay_ns, r.power_db)?;
    }
    f.flush()?;
    Ok(())
}
