//! Run configuration, the command implementations behind the CLI and their
//! file formats.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::ForceConfig;
use crate::encoder::{encode_observation, SELF_DIM};
use crate::episode::{run_episode, step_and_score, step_counts, Controller, ControllerKind};
use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraSpec};
use crate::policy::{ActMode, ActorCritic, HeatmapMode};
use crate::ppo::{train, CurriculumSchedule, PpoConfig, TrainOutcome, TrainSetup};
use crate::reward::{EpisodeMetrics, RewardConfig};
use crate::sim::{SimConfig, World, WorldState};
use crate::trajectory::{
    ingest_csv, split_scenes, synth_generate, train_test_split, DatasetSplit, Scene, SceneManifest, SplitOptions,
    SynthKind, SynthParams,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.resolved.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TABLE_FILE: &str = "table.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Scene length in seconds.
    pub scene_len: f64,
    /// Decision interval in seconds.
    pub dt: f64,
    /// Fraction of scenes used for training.
    pub train_ratio: f64,
    pub split_seed: u64,
    /// Tracks that must cover a whole window for it to become a scene.
    pub required_ids: Vec<String>,
    /// Window indices dropped at ingest.
    pub excluded_windows: Vec<usize>,
    /// Labeled objects per evaluated scene (first ids in order); all when unset.
    pub eval_labels: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            scene_len: 15.0,
            dt: 0.1,
            train_ratio: 0.8,
            split_seed: 0,
            required_ids: Vec::new(),
            excluded_windows: Vec::new(),
            eval_labels: None,
        }
    }
}

/// Everything a command needs, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumSchedule,
    pub data: DataConfig,
    pub camera: CameraSpec,
    pub force: ForceConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.ppo.validate()?;
        self.curriculum.validate()?;
        self.force.validate()?;
        Camera::<f64>::new(&self.camera)?;
        if (self.sim.dt - self.data.dt).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "sim.dt ({}) and data.dt ({}) differ",
                self.sim.dt, self.data.dt
            )));
        }
        Ok(())
    }

    /// Writes the resolved configuration next to a run's outputs.
    pub fn write_snapshot(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let p = dir.join(CONFIG_SNAPSHOT_FILE);
        fs::write(&p, self.to_toml_string()?)?;
        Ok(p)
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            sim: self.sim.clone(),
            camera: self.camera.clone(),
            reward: self.reward,
            ppo: self.ppo.clone(),
            curriculum: self.curriculum,
            seed: self.seed,
        }
    }
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

/// Writes one JSON file per scene plus the manifest.
pub fn write_dataset(dir: &Path, scenes: &[Scene], scene_len: f64, dt: f64) -> Result<SceneManifest> {
    fs::create_dir_all(dir)?;
    let manifest = SceneManifest::from_scenes(scenes, scene_len, dt);
    for (s, entry) in scenes.iter().zip(&manifest.scenes) {
        let mut w = BufWriter::new(File::create(dir.join(&entry.file))?);
        serde_json::to_writer(&mut w, s)?;
        w.flush()?;
    }
    let mut w = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(manifest)
}

/// Scenes listed in `dir/manifest.json`, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<Scene>> {
    let f = File::open(dir.join(MANIFEST_FILE))?;
    let manifest: SceneManifest = serde_json::from_reader(std::io::BufReader::new(f))?;
    manifest.scenes.iter().map(|e| load_scene(&dir.join(&e.file))).collect()
}

/// Scene files matching `pattern`, loaded and sorted by scene id.
pub fn load_scene_glob(pattern: &str) -> Result<Vec<Scene>> {
    let paths = glob::glob(pattern).map_err(|e| Error::Usage(format!("bad --scenes pattern: {e}")))?;
    let mut scenes = Vec::new();
    for p in paths {
        let p = p.map_err(|e| Error::Io(e.into()))?;
        if p.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            continue;
        }
        scenes.push(load_scene(&p)?);
    }
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(scenes)
}

pub fn split_dataset(scenes: Vec<Scene>, data: &DataConfig) -> Result<DatasetSplit> {
    train_test_split(scenes, data.train_ratio, data.split_seed)
}

/// Trajectory CSV to scene files and manifest.
pub fn cmd_ingest(csv_path: &Path, out_dir: &Path, data: &DataConfig) -> Result<SceneManifest> {
    let tracks = ingest_csv(File::open(csv_path)?)?;
    let opts = SplitOptions {
        required_ids: data.required_ids.clone(),
        excluded_windows: data.excluded_windows.clone(),
    };
    let scenes = split_scenes(&tracks, data.scene_len, data.dt, &opts)?;
    write_dataset(out_dir, &scenes, data.scene_len, data.dt)
}

/// Synthetic scenes for seeds `seed..seed + count`.
pub fn cmd_synth(kind: SynthKind, params: &SynthParams, count: usize, seed: u64, out_dir: &Path) -> Result<SceneManifest> {
    let scenes = (0..count as u64)
        .map(|k| synth_generate(kind, params, seed + k))
        .collect::<Result<Vec<_>>>()?;
    write_dataset(out_dir, &scenes, params.duration, params.dt)
}

/// Trains on the training part of the dataset in `data_dir`; the held-out
/// part drives the evaluation column of the log.
pub fn cmd_train(cfg: &RunConfig, data_dir: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let split = split_dataset(load_dataset(data_dir)?, &cfg.data)?;
    cfg.write_snapshot(out_dir)?;
    log::info!("training on {} scenes, {} held out", split.train.len(), split.test.len());
    train(&cfg.train_setup(), &split, Some(out_dir))
}

/// Loads the policy an `rl` controller needs.
pub fn load_policy(kind: ControllerKind, checkpoint: Option<&Path>) -> Result<Option<ActorCritic<f32>>> {
    match (kind, checkpoint) {
        (ControllerKind::Rl, Some(p)) => Ok(Some(ActorCritic::load(p)?)),
        (ControllerKind::Rl, None) => Err(Error::Usage("the rl controller requires --checkpoint".into())),
        _ => Ok(None),
    }
}

fn controller<'a>(kind: ControllerKind, cfg: &RunConfig, policy: Option<&'a ActorCritic<f32>>) -> Controller<'a> {
    match kind {
        ControllerKind::None => Controller::None,
        ControllerKind::Force => Controller::Force(cfg.force),
        ControllerKind::Rl => Controller::Rl(policy.expect("policy loaded for rl")),
    }
}

/// Labeled ids for evaluating `scene`.
pub fn labeled_ids(scene: &Scene, data: &DataConfig) -> Vec<String> {
    let n = data.eval_labels.unwrap_or(usize::MAX);
    scene.tracks.keys().take(n).cloned().collect()
}

fn new_world(scene: &Scene, cfg: &RunConfig) -> Result<World> {
    World::new(
        Arc::new(scene.clone()),
        cfg.sim.clone(),
        Camera::new(&cfg.camera)?,
        &labeled_ids(scene, &cfg.data),
    )
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: ControllerKind,
    pub scene: String,
    pub occ: f64,
    pub int: f64,
    pub dist: f64,
}

/// Per-method means over scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<(ControllerKind, EpisodeMetrics)>,
}

impl ComparisonTable {
    pub fn from_rows(rows: &[EvalRow]) -> Self {
        let mut out: Vec<(ControllerKind, EpisodeMetrics)> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in rows {
            let k = match out.iter().position(|(m, _)| *m == r.method) {
                Some(k) => k,
                None => {
                    out.push((r.method, EpisodeMetrics { occ: 0.0, int: 0.0, dist: 0.0 }));
                    counts.push(0);
                    out.len() - 1
                }
            };
            out[k].1.occ += r.occ;
            out[k].1.int += r.int;
            out[k].1.dist += r.dist;
            counts[k] += 1;
        }
        for ((_, m), n) in out.iter_mut().zip(counts) {
            let n = n as f64;
            m.occ /= n;
            m.int /= n;
            m.dist /= n;
        }
        Self { rows: out }
    }

    pub fn get(&self, kind: ControllerKind) -> Option<EpisodeMetrics> {
        self.rows.iter().find(|(k, _)| *k == kind).map(|(_, m)| *m)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<8}{:>10}{:>10}{:>10}\n", "method", "OCC", "INT", "DIST");
        for (k, m) in &self.rows {
            s += &format!("{:<8}{:>10.4}{:>10.4}{:>+10.3}\n", k.to_string(), m.occ, m.int, m.dist);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub table: ComparisonTable,
}

/// Runs every scene once per controller in deterministic mode. Rows are
/// ordered by controller, then scene id. With `out_dir`, writes
/// `metrics.csv` and `table.txt`.
pub fn cmd_eval(
    cfg: &RunConfig,
    controllers: &[ControllerKind],
    checkpoint: Option<&Path>,
    scenes: &[Scene],
    out_dir: Option<&Path>,
) -> Result<EvalReport> {
    if scenes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted: Vec<&Scene> = scenes.iter().collect();
    sorted.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    let mut rows = Vec::new();
    for &kind in controllers {
        let policy = load_policy(kind, checkpoint)?;
        let c = controller(kind, cfg, policy.as_ref());
        for scene in &sorted {
            let mut world = new_world(scene, cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let summary = run_episode(&mut world, &c, ActMode::Deterministic, &cfg.reward, &mut rng, |_, _| Ok(()))?;
            rows.push(EvalRow {
                method: kind,
                scene: scene.scene_id.clone(),
                occ: summary.metrics.occ,
                int: summary.metrics.int,
                dist: summary.metrics.dist,
            });
        }
    }
    let table = ComparisonTable::from_rows(&rows);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        cfg.write_snapshot(dir)?;
        let mut w = csv::Writer::from_path(dir.join(METRICS_FILE)).map_err(|e| Error::Io(e.into()))?;
        for r in &rows {
            w.serialize(r).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        fs::write(dir.join(TABLE_FILE), table.render())?;
    }
    Ok(EvalReport { rows, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayObject {
    pub id: String,
    pub pos: [f64; 3],
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLabel {
    pub target_id: String,
    pub pos: [f64; 3],
    pub offset: [f64; 2],
    pub active: bool,
    pub n_occ: usize,
    pub n_int: usize,
    /// Reward of the step that led here; absent on the first line and for
    /// inactive labels.
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLine {
    pub step: usize,
    pub time: f64,
    pub objects: Vec<ReplayObject>,
    pub labels: Vec<ReplayLabel>,
}

fn replay_line(world: &World, rewards: &[Option<f64>]) -> ReplayLine {
    let counts = step_counts(world);
    let s = &world.state;
    ReplayLine {
        step: s.step,
        time: s.time,
        objects: s
            .objects
            .iter()
            .map(|o| ReplayObject {
                id: o.id.clone(),
                pos: o.pos.to_array(),
                active: o.active,
            })
            .collect(),
        labels: s
            .labels
            .iter()
            .zip(counts)
            .zip(rewards)
            .map(|((l, c), r)| ReplayLabel {
                target_id: l.target_id.clone(),
                pos: l.world_pos.to_array(),
                offset: [l.offset.x, l.offset.y],
                active: l.active,
                n_occ: c.n_occ,
                n_int: c.n_int,
                reward: *r,
            })
            .collect(),
    }
}

/// Writes one JSON line for the initial state and one per step.
pub fn cmd_replay(
    cfg: &RunConfig,
    kind: ControllerKind,
    checkpoint: Option<&Path>,
    scene: &Scene,
    out: &Path,
) -> Result<usize> {
    let policy = load_policy(kind, checkpoint)?;
    let c = controller(kind, cfg, policy.as_ref());
    let mut world = new_world(scene, cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    let mut lines = 1;
    serde_json::to_writer(&mut w, &replay_line(&world, &vec![None; world.state.labels.len()]))?;
    w.write_all(b"\n")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_episode(&mut world, &c, ActMode::Deterministic, &cfg.reward, &mut rng, |wd, scores| {
        let rewards: Vec<Option<f64>> = scores.iter().map(|s| s.map(|(_, r)| r.total)).collect();
        serde_json::to_writer(&mut w, &replay_line(wd, &rewards))?;
        w.write_all(b"\n")?;
        lines += 1;
        Ok(())
    })?;
    w.flush()?;
    Ok(lines)
}

/// One line of the observation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsLine {
    pub step: usize,
    pub label: usize,
    #[serde(rename = "self")]
    pub self_feat: Vec<f64>,
    pub neighbors: Vec<Vec<f64>>,
}

/// Every encodable observation along a replay, one JSON line per (step, label).
pub fn cmd_obs_dump(
    cfg: &RunConfig,
    kind: ControllerKind,
    checkpoint: Option<&Path>,
    scene: &Scene,
    out: &Path,
) -> Result<usize> {
    let policy = load_policy(kind, checkpoint)?;
    let c = controller(kind, cfg, policy.as_ref());
    let mut world = new_world(scene, cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    let mut lines = 0;
    let mut dump = |wd: &World, w: &mut BufWriter<File>| -> Result<()> {
        for i in wd.active_labels() {
            let Ok(o) = encode_observation(wd, i) else { continue };
            debug_assert_eq!(o.self_feat.len(), SELF_DIM);
            let line = ObsLine {
                step: wd.state.step,
                label: i,
                self_feat: o.self_feat.to_vec(),
                neighbors: o.neighbors.iter().map(|n| n.to_vec()).collect(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
            lines += 1;
        }
        Ok(())
    };
    dump(&world, &mut w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_episode(&mut world, &c, ActMode::Deterministic, &cfg.reward, &mut rng, |wd, _| dump(wd, &mut w))?;
    w.flush()?;
    Ok(lines)
}

/// SHA-256 of the JSON form of a world snapshot, hex encoded.
pub fn world_hash(state: &WorldState) -> String {
    let bytes = serde_json::to_vec(state).expect("world state serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOutput {
    /// Rows follow the plane z axis, columns x.
    pub grid: Vec<Vec<f64>>,
    pub hash_before: String,
    pub hash_after: String,
}

/// Replays the policy to `step`, then writes label `label`'s value grid as CSV.
pub fn cmd_heatmap(
    cfg: &RunConfig,
    checkpoint: &Path,
    scene: &Scene,
    step: usize,
    label: usize,
    mode: HeatmapMode,
    out: Option<&Path>,
) -> Result<HeatmapOutput> {
    if step > scene.steps {
        return Err(Error::Usage(format!("step {step} outside 0..={}", scene.steps)));
    }
    let policy = ActorCritic::<f32>::load(checkpoint)?;
    let mut world = new_world(scene, cfg)?;
    if label >= world.state.labels.len() {
        return Err(Error::Usage(format!(
            "label {label} outside 0..{}",
            world.state.labels.len()
        )));
    }
    let c = Controller::Rl(&policy);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while world.state.step < step {
        let actions = c.actions(&world, ActMode::Deterministic, &mut rng)?;
        step_and_score(&mut world, &actions, &cfg.reward)?;
    }
    if !world.state.labels[label].active {
        return Err(Error::Usage(format!("label {label} is inactive at step {step}")));
    }
    let hash_before = world_hash(&world.state);
    let grid = policy.value_heatmap(&world, label, mode)?;
    let hash_after = world_hash(&world.state);
    if let Some(p) = out {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(p)
            .map_err(|e| Error::Io(e.into()))?;
        for row in &grid {
            w.serialize(row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
    }
    Ok(HeatmapOutput {
        grid,
        hash_before,
        hash_after,
    })
}
