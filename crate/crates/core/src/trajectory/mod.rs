//! Trajectory corpora: CSV ingestion, scene windows, resampling and splits.

mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

pub use synth::{synth_generate, synth_tracks, SynthKind, SynthParams};

/// Slack used when comparing sample times.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Ground-plane position (x, z) in meters.
    pub pos: Vec2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrack {
    pub id: String,
    /// Strictly increasing in `t`.
    pub samples: Vec<TrajectorySample>,
}

impl RawTrack {
    pub fn start(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.t)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.t)
    }

    fn covers(&self, t: f64) -> bool {
        t >= self.start() - TIME_EPS && t <= self.end() + TIME_EPS
    }

    /// Linear interpolation between bracketing samples. Times within 1e-9 of
    /// a sample return that sample unchanged.
    pub fn position_at(&self, t: f64) -> Result<Vec2<f64>> {
        if self.samples.is_empty() || !self.covers(t) {
            return Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let idx = self.samples.partition_point(|s| s.t < t);
        for k in [idx.saturating_sub(1), idx] {
            if let Some(s) = self.samples.get(k) {
                if (s.t - t).abs() <= TIME_EPS {
                    return Ok(s.pos);
                }
            }
        }
        let (a, b) = (&self.samples[idx - 1], &self.samples[idx]);
        let w = (t - a.t) / (b.t - a.t);
        Ok(a.pos + (b.pos - a.pos) * w)
    }
}

/// Per-step positions and finite-difference velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resampled {
    pub positions: Vec<Vec2<f64>>,
    pub velocities: Vec<Vec2<f64>>,
}

/// Samples `track` at `t0 + k*dt` for `k in 0..count`.
///
/// Velocity at step k is `(pos_k - pos_{k-1}) / dt`; step 0 copies step 1.
pub fn resample(track: &RawTrack, t0: f64, dt: f64, count: usize) -> Result<Resampled> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let positions = (0..count)
        .map(|k| track.position_at(t0 + k as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(Resampled {
        velocities: finite_difference(&positions, dt),
        positions,
    })
}

fn finite_difference(positions: &[Vec2<f64>], dt: f64) -> Vec<Vec2<f64>> {
    let mut v: Vec<Vec2<f64>> = positions
        .windows(2)
        .map(|w| (w[1] - w[0]) * (1.0 / dt))
        .collect();
    match v.first().copied() {
        Some(first) => v.insert(0, first),
        None if !positions.is_empty() => v.push(Vec2::zero()),
        None => {}
    }
    v
}

/// Reads `t,id,x,z` rows (with header) into tracks grouped by id and sorted by time.
pub fn ingest_csv<R: Read>(reader: R) -> Result<Vec<RawTrack>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if !header.is_empty() && header.iter().collect::<Vec<_>>() != ["t", "id", "x", "z"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header t,id,x,z, found {:?}", header.iter().collect::<Vec<_>>()),
        });
    }

    let mut by_id: BTreeMap<String, Vec<(TrajectorySample, u64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {name} value {:?}", &rec[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite {name}"),
                });
            }
            Ok(v)
        };
        let t = num(0, "t")?;
        if t < 0.0 {
            return Err(Error::Parse {
                line,
                msg: format!("negative time {t}"),
            });
        }
        let pos = Vec2::new(num(2, "x")?, num(3, "z")?);
        by_id
            .entry(rec[1].to_string())
            .or_default()
            .push((TrajectorySample { t, pos }, line));
    }

    let mut tracks = Vec::with_capacity(by_id.len());
    for (id, mut rows) in by_id {
        rows.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
        if let Some(w) = rows.windows(2).find(|w| w[0].0.t == w[1].0.t) {
            return Err(Error::DuplicateTimestamp {
                id,
                t: w[1].0.t,
                line: w[0].1.max(w[1].1),
            });
        }
        if rows.len() < 2 {
            log::warn!("dropping track {id:?}: fewer than two samples");
            continue;
        }
        tracks.push(RawTrack {
            id,
            samples: rows.into_iter().map(|(s, _)| s).collect(),
        });
    }
    Ok(tracks)
}

/// Writes tracks in the ingestion format. Floats use shortest round-trip notation.
pub fn write_csv<W: Write>(tracks: &[RawTrack], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["t", "id", "x", "z"]).map_err(to_io)?;
    for tr in tracks {
        for s in &tr.samples {
            w.write_record([
                s.t.to_string(),
                tr.id.clone(),
                s.pos.x.to_string(),
                s.pos.y.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One entity's resampled motion inside a scene window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTrack {
    pub entry_step: usize,
    pub exit_step: usize,
    /// Positions for steps `entry_step..=exit_step`.
    pub positions: Vec<Vec2<f64>>,
    pub velocities: Vec<Vec2<f64>>,
}

impl SceneTrack {
    pub fn is_active(&self, step: usize) -> bool {
        step >= self.entry_step && step <= self.exit_step
    }

    /// Position and velocity at `step`, clamped to the active range.
    pub fn state(&self, step: usize) -> (Vec2<f64>, Vec2<f64>) {
        let k = step.clamp(self.entry_step, self.exit_step) - self.entry_step;
        (self.positions[k], self.velocities[k])
    }
}

/// A fixed-length episode window resampled to the decision interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    /// Corpus time of step 0.
    pub t0: f64,
    pub duration: f64,
    pub dt: f64,
    /// Number of decision steps; positions exist for steps `0..=steps`.
    pub steps: usize,
    pub tracks: BTreeMap<String, SceneTrack>,
}

impl Scene {
    pub fn track_ids(&self) -> impl Iterator<Item = &str> {
        self.tracks.keys().map(String::as_str)
    }

    pub fn stats(&self) -> SceneStats {
        let max_objects = (0..=self.steps)
            .map(|k| self.tracks.values().filter(|t| t.is_active(k)).count())
            .max()
            .unwrap_or(0);
        let mut speed_sum = 0.0;
        let mut speed_n = 0usize;
        let mut dist_sum = 0.0;
        for tr in self.tracks.values() {
            for v in &tr.velocities {
                speed_sum += v.norm();
                speed_n += 1;
            }
            dist_sum += tr
                .positions
                .windows(2)
                .map(|w| (w[1] - w[0]).norm())
                .sum::<f64>();
        }
        SceneStats {
            max_objects,
            mean_speed: if speed_n > 0 { speed_sum / speed_n as f64 } else { 0.0 },
            mean_distance: if self.tracks.is_empty() {
                0.0
            } else {
                dist_sum / self.tracks.len() as f64
            },
        }
    }
}

/// Per-scene summary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneStats {
    pub max_objects: usize,
    /// m/s averaged over all entity-steps.
    pub mean_speed: f64,
    /// Path length per entity, meters.
    pub mean_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    /// Tracks that must cover the full window for it to be kept. Empty means
    /// only the corpus time range matters.
    pub required_ids: Vec<String>,
    /// Window indices dropped by hand (e.g. game stoppages).
    pub excluded_windows: Vec<usize>,
}

/// Step count for a window, or an error if `dt` does not divide `scene_len`.
pub fn step_count(scene_len: f64, dt: f64) -> Result<usize> {
    if !(scene_len > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scene length and dt must be positive (got {scene_len}, {dt})"
        )));
    }
    let steps = (scene_len / dt).round();
    if (steps * dt - scene_len).abs() > 1e-9 * scene_len.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "dt {dt} does not divide scene length {scene_len}"
        )));
    }
    Ok(steps as usize)
}

/// Cuts consecutive non-overlapping windows of `scene_len` seconds.
///
/// Window k spans `[t_min + k*scene_len, t_min + (k+1)*scene_len]`; its final
/// state shares the boundary instant with the next window's first state.
/// Windows not fully covered by the corpus are discarded.
pub fn split_scenes(
    tracks: &[RawTrack],
    scene_len: f64,
    dt: f64,
    opts: &SplitOptions,
) -> Result<Vec<Scene>> {
    let steps = step_count(scene_len, dt)?;
    if tracks.is_empty() {
        return Ok(Vec::new());
    }
    let t_min = tracks.iter().map(RawTrack::start).fold(f64::INFINITY, f64::min);
    let t_max = tracks.iter().map(RawTrack::end).fold(f64::NEG_INFINITY, f64::max);
    let required: BTreeSet<&str> = opts.required_ids.iter().map(String::as_str).collect();
    for id in &required {
        if !tracks.iter().any(|t| t.id == *id) {
            return Err(Error::UnknownEntity(id.to_string()));
        }
    }

    let mut scenes = Vec::new();
    let mut k = 0usize;
    loop {
        let start = t_min + k as f64 * scene_len;
        let end = start + scene_len;
        if end > t_max + TIME_EPS {
            break;
        }
        let window = k;
        k += 1;
        if opts.excluded_windows.contains(&window) {
            continue;
        }
        let times: Vec<f64> = (0..=steps).map(|s| start + s as f64 * dt).collect();
        let mut scene_tracks = BTreeMap::new();
        let mut complete = true;
        for tr in tracks {
            let covered: Vec<usize> = (0..=steps).filter(|&s| tr.covers(times[s])).collect();
            let full = covered.len() == steps + 1;
            if required.contains(tr.id.as_str()) && !full {
                complete = false;
                break;
            }
            let (Some(&entry), Some(&exit)) = (covered.first(), covered.last()) else {
                continue;
            };
            let positions = times[entry..=exit]
                .iter()
                .map(|&t| tr.position_at(t))
                .collect::<Result<Vec<_>>>()?;
            scene_tracks.insert(
                tr.id.clone(),
                SceneTrack {
                    entry_step: entry,
                    exit_step: exit,
                    velocities: finite_difference(&positions, dt),
                    positions,
                },
            );
        }
        if !complete || scene_tracks.is_empty() {
            continue;
        }
        scenes.push(Scene {
            scene_id: format!("scene_{window:03}"),
            t0: start,
            duration: scene_len,
            dt,
            steps,
            tracks: scene_tracks,
        });
    }
    Ok(scenes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
    pub seed: u64,
}

/// Seeded shuffle, then `max(1, floor(ratio * n))` training scenes.
pub fn train_test_split(scenes: Vec<Scene>, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio {ratio} not in (0,1)")));
    }
    let n = scenes.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n_train = ((ratio * n as f64 + 1e-9).floor() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<Scene>> = scenes.into_iter().map(Some).collect();
    let mut take = |i: &usize| slots[*i].take().expect("each index taken once");
    let train = order[..n_train].iter().map(&mut take).collect();
    let test = order[n_train..].iter().map(&mut take).collect();
    Ok(DatasetSplit { train, test, seed })
}

/// Listing written next to ingested scene files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene_len: f64,
    pub dt: f64,
    pub scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub file: String,
    pub steps: usize,
    pub track_ids: Vec<String>,
    pub stats: SceneStats,
}

impl SceneManifest {
    pub fn from_scenes(scenes: &[Scene], scene_len: f64, dt: f64) -> Self {
        Self {
            scene_len,
            dt,
            scenes: scenes
                .iter()
                .map(|s| ManifestEntry {
                    scene_id: s.scene_id.clone(),
                    file: format!("{}.json", s.scene_id),
                    steps: s.steps,
                    track_ids: s.tracks.keys().cloned().collect(),
                    stats: s.stats(),
                })
                .collect(),
        }
    }
}
