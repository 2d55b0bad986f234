//! Synthetic trajectory scenarios used in place of recorded corpora.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{split_scenes, RawTrack, Scene, SplitOptions, TrajectorySample};
use crate::error::{Error, Result};
use crate::linalg::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Two objects on converging straight lines; the rear one is faster and
    /// catches up at mid-scene.
    CrossingPair,
    /// Objects circling a common center.
    Roundabout,
    /// Shuttle runs along parallel lanes.
    LaneDrill,
    /// Constant-speed wandering with reflection at the arena walls.
    RandomWalk,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::CrossingPair => "crossing_pair",
            SynthKind::Roundabout => "roundabout",
            SynthKind::LaneDrill => "lane_drill",
            SynthKind::RandomWalk => "random_walk",
        })
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "crossing_pair" => SynthKind::CrossingPair,
            "roundabout" => SynthKind::Roundabout,
            "lane_drill" => SynthKind::LaneDrill,
            "random_walk" => SynthKind::RandomWalk,
            other => return Err(Error::InvalidParameter(format!("unknown scenario {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub count: usize,
    /// Slow object speed for `crossing_pair`; lower speed bound otherwise.
    pub speed_min: f64,
    /// Fast object speed for `crossing_pair`; upper speed bound otherwise.
    pub speed_max: f64,
    pub center: [f64; 2],
    /// Half extents of the arena along x and z.
    pub arena_half: [f64; 2],
    pub radius: f64,
    /// Crossing angle range between the two paths, degrees.
    pub crossing_angle: [f64; 2],
    /// Maximum deviation of the mean heading from the x axis, degrees.
    pub heading_jitter: f64,
    /// Random-walk heading diffusion, rad/sqrt(s).
    pub turn_rate: f64,
    pub duration: f64,
    pub dt: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            count: 2,
            speed_min: 1.2,
            speed_max: 2.0,
            center: [0.0, 0.0],
            arena_half: [16.0, 8.0],
            radius: 3.0,
            crossing_angle: [10.0, 30.0],
            heading_jitter: 10.0,
            turn_rate: 0.6,
            duration: 15.0,
            dt: 0.1,
        }
    }
}

impl SynthParams {
    fn validate(&self, kind: SynthKind) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if kind != SynthKind::CrossingPair && self.count == 0 {
            return bad("object count must be positive");
        }
        if !(self.speed_min >= 0.0) || !(self.speed_max >= self.speed_min) {
            return bad("speeds must satisfy 0 <= speed_min <= speed_max");
        }
        if kind != SynthKind::RandomWalk && !(self.speed_max > 0.0) {
            return bad("speed must be positive");
        }
        if kind == SynthKind::CrossingPair && !(self.speed_min > 0.0) {
            return bad("crossing_pair speeds must be positive");
        }
        if kind == SynthKind::Roundabout && !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if !(self.arena_half[0] > 0.0 && self.arena_half[1] > 0.0) {
            return bad("arena extents must be positive");
        }
        if !(self.duration > 0.0 && self.dt > 0.0) {
            return bad("duration and dt must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates raw tracks sampled every `interval` seconds over `[0, duration]`.
pub fn synth_tracks(
    kind: SynthKind,
    params: &SynthParams,
    seed: u64,
    duration: f64,
    interval: f64,
) -> Result<Vec<RawTrack>> {
    params.validate(kind)?;
    if !(duration > 0.0 && interval > 0.0) {
        return Err(Error::InvalidParameter("duration and interval must be positive".into()));
    }
    let n = (duration / interval).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * interval).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Vec2::new(params.center[0], params.center[1]);

    let paths: Vec<Vec<Vec2<f64>>> = match kind {
        SynthKind::CrossingPair => {
            let jitter = Vec2::new(uniform(&mut rng, -0.5, 0.5), uniform(&mut rng, -0.5, 0.5));
            let meet = c + jitter;
            let mut heading = uniform(&mut rng, -params.heading_jitter, params.heading_jitter).to_radians();
            if rng.random_bool(0.5) {
                heading += PI;
            }
            let half_angle =
                uniform(&mut rng, params.crossing_angle[0], params.crossing_angle[1]).to_radians() / 2.0;
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let t_meet = duration / 2.0;
            [(params.speed_max, side), (params.speed_min, -side)]
                .into_iter()
                .map(|(speed, s)| {
                    let a = heading + s * half_angle;
                    let dir = Vec2::new(a.cos(), a.sin());
                    times.iter().map(|&t| meet + dir * (speed * (t - t_meet))).collect()
                })
                .collect()
        }
        SynthKind::Roundabout => {
            let omega = params.speed_max / params.radius;
            let phase0 = uniform(&mut rng, 0.0, 2.0 * PI);
            (0..params.count)
                .map(|i| {
                    let phase = phase0 + 2.0 * PI * i as f64 / params.count as f64;
                    times
                        .iter()
                        .map(|&t| {
                            let a = phase + omega * t;
                            c + Vec2::new(a.cos(), a.sin()) * params.radius
                        })
                        .collect()
                })
                .collect()
        }
        SynthKind::LaneDrill => {
            let amp = 0.8 * params.arena_half[0];
            let spacing = 2.0 * params.arena_half[1] / params.count as f64;
            (0..params.count)
                .map(|i| {
                    let speed = uniform(&mut rng, params.speed_min, params.speed_max);
                    let omega = speed / amp;
                    let phase = uniform(&mut rng, 0.0, 2.0 * PI);
                    let z = c.y + (i as f64 - (params.count as f64 - 1.0) / 2.0) * spacing;
                    times
                        .iter()
                        .map(|&t| Vec2::new(c.x + amp * (omega * t + phase).sin(), z))
                        .collect()
                })
                .collect()
        }
        SynthKind::RandomWalk => {
            let [hx, hz] = params.arena_half;
            (0..params.count)
                .map(|_| {
                    let speed = uniform(&mut rng, params.speed_min, params.speed_max);
                    let mut p = c + Vec2::new(uniform(&mut rng, -hx, hx), uniform(&mut rng, -hz, hz));
                    let mut heading = uniform(&mut rng, 0.0, 2.0 * PI);
                    let mut out = Vec::with_capacity(times.len());
                    out.push(p);
                    for _ in 1..times.len() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        heading += params.turn_rate * interval.sqrt() * z;
                        let mut d = Vec2::new(heading.cos(), heading.sin()) * (speed * interval);
                        let mut next = p + d;
                        // mirror at the walls; a reflected chord is never longer than the step
                        if (next.x - c.x).abs() > hx {
                            let wall = c.x + hx * (next.x - c.x).signum();
                            next.x = 2.0 * wall - next.x;
                            d.x = -d.x;
                        }
                        if (next.y - c.y).abs() > hz {
                            let wall = c.y + hz * (next.y - c.y).signum();
                            next.y = 2.0 * wall - next.y;
                            d.y = -d.y;
                        }
                        heading = d.y.atan2(d.x);
                        p = next;
                        out.push(p);
                    }
                    out
                })
                .collect()
        }
    };

    Ok(paths
        .into_iter()
        .enumerate()
        .map(|(i, path)| RawTrack {
            id: format!("p{i}"),
            samples: times
                .iter()
                .zip(path)
                .map(|(&t, pos)| TrajectorySample { t, pos })
                .collect(),
        })
        .collect())
}

/// A single scene of `params.duration` seconds sampled at `params.dt`.
pub fn synth_generate(kind: SynthKind, params: &SynthParams, seed: u64) -> Result<Scene> {
    let tracks = synth_tracks(kind, params, seed, params.duration, params.dt)?;
    let mut scenes = split_scenes(&tracks, params.duration, params.dt, &SplitOptions::default())?;
    let mut scene = scenes
        .pop()
        .ok_or_else(|| Error::InvalidParameter("scenario produced no scene".into()))?;
    scene.scene_id = format!("{kind}_{seed}");
    Ok(scene)
}
