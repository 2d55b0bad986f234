//! Decentralized rollouts, GAE, the clipped-surrogate update and the
//! numAgent curriculum.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_observation, EncodedObservation};
use crate::episode::{run_episode, step_and_score, Controller};
use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraSpec};
use crate::nn::{clip_global_norm, Adam, LinearDecay, Tensor};
use crate::policy::{ActMode, ActorCritic, ActorNet, CriticNet, ObsBatch};
use crate::reward::RewardConfig;
use crate::sim::{Action, SimConfig, World};
use crate::trajectory::{DatasetSplit, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub epochs: usize,
    /// Label transitions collected per update.
    pub buffer_size: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Label transitions over the whole run.
    pub total_steps: u64,
    pub episode_len: usize,
    pub max_grad_norm: f64,
    /// Parallel world instances in the rollout pool.
    pub num_envs: usize,
    /// Reward added to a label whose next observation cannot be encoded.
    pub invalid_penalty: f64,
    /// Evaluate on held-out scenes every this many updates.
    pub eval_every: usize,
    /// Held-out scenes used per evaluation (all when 0).
    pub eval_scenes: usize,
    /// Write a checkpoint every this many label transitions (never when 0).
    pub checkpoint_every: u64,
    /// Initial log-std of the action distribution.
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PpoConfig {
    pub fn desk() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            entropy_coef: 5e-3,
            value_coef: 0.5,
            epochs: 3,
            buffer_size: 8192,
            batch_size: 256,
            lr: 3e-4,
            total_steps: 300_000,
            episode_len: 150,
            max_grad_norm: 0.5,
            num_envs: 8,
            invalid_penalty: -0.5,
            eval_every: 1,
            eval_scenes: 0,
            checkpoint_every: 0,
            init_log_std: 0.0,
        }
    }

    /// Full-scale regime: buffer 204,800, batch 1,024, 20M steps.
    pub fn full_scale() -> Self {
        Self {
            buffer_size: 204_800,
            batch_size: 1024,
            total_steps: 20_000_000,
            num_envs: 64,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if self.epochs == 0 || self.buffer_size == 0 || self.batch_size == 0 || self.num_envs == 0 || self.episode_len == 0 {
            return bad("epochs, buffer_size, batch_size, num_envs and episode_len must be positive");
        }
        if !(self.lr >= 0.0 && self.max_grad_norm > 0.0) {
            return bad("lr must be non-negative and max_grad_norm positive");
        }
        Ok(())
    }
}

/// numAgent grows from `start` to `end` by `step` over equal shares of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            start: 2,
            end: 2,
            step: 2,
        }
    }
}

impl CurriculumSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.start == 0 || self.start > self.end || self.step == 0 || (self.end - self.start) % self.step != 0 {
            return Err(Error::InvalidParameter(format!(
                "curriculum needs 0 < start <= end with step dividing end - start: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        (self.end - self.start) / self.step + 1
    }

    /// Label-transition counts at which each stage begins.
    pub fn boundaries(&self, total_steps: u64) -> Vec<u64> {
        let s = self.stages() as u128;
        (0..s).map(|k| (k * total_steps as u128).div_ceil(s) as u64).collect()
    }

    pub fn stage_at(&self, global_step: u64, total_steps: u64) -> usize {
        if total_steps == 0 {
            return self.stages() - 1;
        }
        let k = global_step as u128 * self.stages() as u128 / total_steps as u128;
        (k as usize).min(self.stages() - 1)
    }
}

/// `start + step * floor(global_step / (total / stages))`, capped at `end`.
pub fn advance_curriculum(schedule: &CurriculumSchedule, global_step: u64, total_steps: u64) -> usize {
    schedule.start + schedule.step * schedule.stage_at(global_step, total_steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: EncodedObservation,
    /// Raw sampled action.
    pub action: [f64; 2],
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// How a label's stream of transitions ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamEnd {
    /// Failure: nothing follows.
    Terminal,
    /// Cut by the clock or the buffer; bootstrapped with the value of this state.
    Truncated(EncodedObservation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub transitions: Vec<Transition>,
    pub end: StreamEnd,
    /// V of the state after the last transition (0 when terminal).
    pub bootstrap: f64,
}

/// Transitions grouped into complete per-label streams.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeBuffer {
    pub streams: Vec<Stream>,
}

impl EpisodeBuffer {
    pub fn len(&self) -> usize {
        self.streams.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Advantages and returns in stream order.
    pub fn compute_gae(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut adv = Vec::with_capacity(self.len());
        let mut ret = Vec::with_capacity(self.len());
        for s in &self.streams {
            let r: Vec<f64> = s.transitions.iter().map(|t| t.reward).collect();
            let v: Vec<f64> = s.transitions.iter().map(|t| t.value).collect();
            let (a, rt) = compute_gae(&r, &v, s.bootstrap, gamma, lambda);
            adv.extend(a);
            ret.extend(rt);
        }
        (adv, ret)
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.streams.iter().flat_map(|s| s.transitions.iter())
    }
}

/// GAE over one stream: `δ_t = r_t + γ V_{t+1} - V_t` with `V_T = bootstrap`,
/// `A_t = Σ_k (γλ)^k δ_{t+k}`, `R_t = A_t + V_t`.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Mean losses over the minibatches of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1-ε, 1+ε]`.
    pub clip_fraction: f64,
}

/// One minibatch worth of PPO inputs.
#[derive(Debug, Clone)]
pub struct Minibatch<'a> {
    pub obs: Vec<&'a EncodedObservation>,
    pub actions: Vec<[f64; 2]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Accumulates gradients of `actor_loss + c_v * critic_loss` into both
/// networks without stepping the optimizer.
pub fn ppo_gradients(ac: &mut ActorCritic<f32>, mb: &Minibatch, cfg: &PpoConfig) -> Result<LossReport> {
    let n = mb.obs.len();
    let batch = ObsBatch::<f32>::new(mb.obs.iter().copied());
    let actions: Vec<[f32; 2]> = mb.actions.iter().map(|a| [a[0] as f32, a[1] as f32]).collect();
    let inv_n = 1.0 / n as f64;

    let at = ac.actor.net.forward(&batch)?;
    let dists = ActorNet::distributions(&at);
    let mut d_logp = vec![0f32; n];
    let d_ent = vec![(-cfg.entropy_coef * inv_n) as f32; n];
    let (mut surrogate, mut entropy, mut clipped) = (0.0, 0.0, 0usize);
    for b in 0..n {
        let lp = dists[b].log_prob(actions[b]) as f64;
        let ratio = (lp - mb.old_log_probs[b]).exp();
        let a = mb.advantages[b];
        let clamped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        if clamped != ratio {
            clipped += 1;
        }
        let (unclipped, clip_term) = (ratio * a, clamped * a);
        surrogate += unclipped.min(clip_term);
        entropy += dists[b].entropy() as f64;
        if unclipped <= clip_term {
            d_logp[b] = (-a * ratio * inv_n) as f32;
        }
    }
    let actor_loss = -surrogate * inv_n - cfg.entropy_coef * entropy * inv_n;
    let d_out = ActorNet::head_grad(&at, &actions, &d_logp, &d_ent);
    ac.actor.net.backward(&batch, &at, &d_out);

    let vt = ac.critic.net.forward(&batch)?;
    let values = CriticNet::values(&vt);
    let mut critic_loss = 0.0;
    let mut dv = Tensor::matrix(n, 1);
    for b in 0..n {
        let e = values[b] as f64 - mb.returns[b];
        critic_loss += e * e * inv_n;
        dv.data[b] = (cfg.value_coef * 2.0 * e * inv_n) as f32;
    }
    ac.critic.net.backward(&batch, &vt, &dv);
    if !(actor_loss.is_finite() && critic_loss.is_finite()) {
        return Err(Error::Divergence(format!("loss is not finite (actor {actor_loss}, critic {critic_loss})")));
    }
    Ok(LossReport {
        actor_loss,
        critic_loss,
        entropy: entropy * inv_n,
        clip_fraction: clipped as f64 * inv_n,
    })
}

/// `epochs` passes of shuffled minibatches with advantages normalized over the buffer.
pub fn ppo_update<R: Rng + ?Sized>(
    ac: &mut ActorCritic<f32>,
    buffer: &EpisodeBuffer,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut R,
) -> Result<LossReport> {
    let (mut adv, ret) = buffer.compute_gae(cfg.gamma, cfg.lambda);
    let n = adv.len();
    if n == 0 {
        return Err(Error::ZeroSteps);
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);

    let trans: Vec<&Transition> = buffer.transitions().collect();
    let adam = Adam::default();
    let mut total = LossReport::default();
    let mut count = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mb = Minibatch {
                obs: chunk.iter().map(|&k| &trans[k].obs).collect(),
                actions: chunk.iter().map(|&k| trans[k].action).collect(),
                old_log_probs: chunk.iter().map(|&k| trans[k].log_prob).collect(),
                advantages: chunk.iter().map(|&k| adv[k]).collect(),
                returns: chunk.iter().map(|&k| ret[k]).collect(),
            };
            ac.actor.net.store.zero_grad();
            ac.critic.net.store.zero_grad();
            let r = ppo_gradients(ac, &mb, cfg)?;
            clip_global_norm(&mut [&mut ac.actor.net.store, &mut ac.critic.net.store], cfg.max_grad_norm)?;
            adam.step(&mut ac.actor.net.store, lr)?;
            adam.step(&mut ac.critic.net.store, lr)?;
            total.actor_loss += r.actor_loss;
            total.critic_loss += r.critic_loss;
            total.entropy += r.entropy;
            total.clip_fraction += r.clip_fraction;
            count += 1;
        }
    }
    let c = count as f64;
    Ok(LossReport {
        actor_loss: total.actor_loss / c,
        critic_loss: total.critic_loss / c,
        entropy: total.entropy / c,
        clip_fraction: total.clip_fraction / c,
    })
}

/// Labeled track ids for evaluation: the first `n` in id order.
pub fn eval_label_ids(scene: &Scene, n: usize) -> Vec<String> {
    scene.tracks.keys().take(n).cloned().collect()
}

struct Env {
    world: World,
    /// Open stream per label, with the observation it will act on next.
    open: Vec<Option<(usize, EncodedObservation)>>,
    episode_steps: usize,
    returns: Vec<f64>,
}

/// Rollout state that persists across updates.
pub struct RolloutPool {
    envs: Vec<Env>,
    scenes: Vec<Arc<Scene>>,
    sim: SimConfig,
    camera: Camera<f64>,
    reward: RewardConfig,
    pub num_agent: usize,
    /// Mean per-label returns of episodes finished since the last drain.
    pub finished_returns: Vec<f64>,
}

impl RolloutPool {
    pub fn new<R: Rng + ?Sized>(
        scenes: &[Scene],
        sim: &SimConfig,
        camera: &CameraSpec,
        reward: &RewardConfig,
        num_envs: usize,
        num_agent: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut pool = Self {
            envs: Vec::with_capacity(num_envs),
            scenes: scenes.iter().cloned().map(Arc::new).collect(),
            sim: sim.clone(),
            camera: Camera::new(camera)?,
            reward: *reward,
            num_agent,
            finished_returns: Vec::new(),
        };
        for _ in 0..num_envs {
            let env = pool.fresh_env(rng)?;
            pool.envs.push(env);
        }
        Ok(pool)
    }

    fn fresh_env<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Env> {
        let scene = self.scenes.choose(rng).expect("non-empty").clone();
        let mut ids: Vec<String> = scene.tracks.keys().cloned().collect();
        ids.shuffle(rng);
        ids.truncate(self.num_agent);
        ids.sort();
        let world = World::new(scene, self.sim.clone(), self.camera.clone(), &ids)?;
        let n = world.state.labels.len();
        Ok(Env {
            world,
            open: vec![None; n],
            episode_steps: 0,
            returns: vec![0.0; n],
        })
    }

    /// Resets every world, e.g. after a curriculum stage change.
    pub fn reset_all<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for k in 0..self.envs.len() {
            self.envs[k] = self.fresh_env(rng)?;
        }
        Ok(())
    }
}

/// Steps every world with the shared policy until at least `n_steps` label
/// transitions are recorded, then closes all open streams.
pub fn collect_rollouts<R: Rng + ?Sized>(
    pool: &mut RolloutPool,
    policy: &ActorCritic<f32>,
    n_steps: usize,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<EpisodeBuffer> {
    let mut streams: Vec<Stream> = Vec::new();
    let mut recorded = 0usize;
    let new_stream = |streams: &mut Vec<Stream>| {
        streams.push(Stream {
            transitions: Vec::new(),
            end: StreamEnd::Terminal,
            bootstrap: 0.0,
        });
        streams.len() - 1
    };
    let mut episode_done = vec![false; pool.envs.len()];
    while recorded < n_steps {
        // gather observations of every active label in every world
        let mut who = Vec::new();
        for (e, env) in pool.envs.iter_mut().enumerate() {
            let active: Vec<usize> = env.world.active_labels().collect();
            for i in active {
                if env.open[i].is_none() {
                    match encode_observation(&env.world, i) {
                        Ok(o) => env.open[i] = Some((new_stream(&mut streams), o)),
                        Err(Error::ObservationInvalid(_)) => continue,
                        Err(err) => return Err(err),
                    }
                }
                who.push((e, i));
            }
        }
        let obs: Vec<&EncodedObservation> = who
            .iter()
            .map(|&(e, i)| &pool.envs[e].open[i].as_ref().expect("opened above").1)
            .collect();
        let decisions = policy.act_batch(&obs, ActMode::Stochastic, rng)?;
        let mut actions: Vec<Vec<Action>> = pool.envs.iter().map(|env| vec![Action::zero(); env.open.len()]).collect();
        for (&(e, i), d) in who.iter().zip(&decisions) {
            actions[e][i] = d.action;
        }

        for (e, env) in pool.envs.iter_mut().enumerate() {
            let scores = step_and_score(&mut env.world, &actions[e], &pool.reward)?;
            env.episode_steps += 1;
            let time_up = env.world.is_finished() || env.episode_steps >= cfg.episode_len;
            episode_done[e] = time_up;
            for (&(e2, i), d) in who.iter().zip(&decisions) {
                if e2 != e {
                    continue;
                }
                let (sid, o) = env.open[i].take().expect("label acted");
                let r = scores[i].map(|(_, r)| r.total).unwrap_or(0.0);
                streams[sid].transitions.push(Transition {
                    obs: o,
                    action: [d.action.a.x, d.action.a.y],
                    log_prob: d.log_prob,
                    reward: r,
                    value: d.value,
                    done: false,
                });
                recorded += 1;
                env.returns[i] += r;
                if !env.world.state.labels[i].active {
                    // target left the scene
                    streams[sid].transitions.last_mut().expect("pushed").done = true;
                    continue;
                }
                match encode_observation(&env.world, i) {
                    Ok(next) => {
                        if time_up {
                            let t = streams[sid].transitions.last_mut().expect("pushed");
                            t.done = true;
                            streams[sid].end = StreamEnd::Truncated(next);
                        } else {
                            env.open[i] = Some((sid, next));
                        }
                    }
                    Err(Error::ObservationInvalid(_)) => {
                        let t = streams[sid].transitions.last_mut().expect("pushed");
                        t.done = true;
                        t.reward += cfg.invalid_penalty;
                        env.returns[i] += cfg.invalid_penalty;
                        episode_done[e] = true;
                    }
                    Err(err) => return Err(err),
                }
            }
        }
        for e in 0..pool.envs.len() {
            if !episode_done[e] {
                continue;
            }
            let env = &mut pool.envs[e];
            // streams still open in an aborted episode are truncated at their current state
            for slot in env.open.iter_mut() {
                if let Some((sid, o)) = slot.take() {
                    if let Some(t) = streams[sid].transitions.last_mut() {
                        t.done = true;
                    }
                    streams[sid].end = StreamEnd::Truncated(o);
                }
            }
            let seen: Vec<f64> = env.returns.clone();
            if !seen.is_empty() {
                pool.finished_returns.push(seen.iter().sum::<f64>() / seen.len() as f64);
            }
            pool.envs[e] = pool.fresh_env(rng)?;
        }
    }
    // close streams that continue into the next collection
    for env in pool.envs.iter_mut() {
        for slot in env.open.iter() {
            if let Some((sid, o)) = slot {
                streams[*sid].end = StreamEnd::Truncated(o.clone());
            }
        }
    }
    streams.retain(|s| !s.transitions.is_empty());
    // every open stream restarts from its pending observation
    for env in pool.envs.iter_mut() {
        for slot in env.open.iter_mut() {
            *slot = None;
        }
    }
    let boot_obs: Vec<&EncodedObservation> = streams
        .iter()
        .filter_map(|s| match &s.end {
            StreamEnd::Truncated(o) => Some(o),
            StreamEnd::Terminal => None,
        })
        .collect();
    let values = policy.values(&boot_obs)?;
    let mut it = values.into_iter();
    for s in streams.iter_mut() {
        if let StreamEnd::Truncated(_) = s.end {
            s.bootstrap = it.next().expect("one value per truncated stream");
        }
    }
    Ok(EpisodeBuffer { streams })
}

/// Everything `train` needs besides the data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainSetup {
    pub sim: SimConfig,
    pub camera: CameraSpec,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumSchedule,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub global_step: u64,
    pub train_reward: Option<f64>,
    pub test_reward: Option<f64>,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub num_agent: usize,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub policy: ActorCritic<f32>,
    pub log: Vec<LogRow>,
    pub checkpoints: Vec<PathBuf>,
}

/// Mean per-label return of the deterministic policy on `scenes`.
pub fn evaluate_return(
    policy: &ActorCritic<f32>,
    scenes: &[Scene],
    num_agent: usize,
    setup: &TrainSetup,
) -> Result<f64> {
    let camera = Camera::new(&setup.camera)?;
    let mut total = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for scene in scenes {
        let ids = eval_label_ids(scene, num_agent);
        let mut w = World::new(Arc::new(scene.clone()), setup.sim.clone(), camera.clone(), &ids)?;
        let s = run_episode(&mut w, &Controller::Rl(policy), ActMode::Deterministic, &setup.reward, &mut rng, |_, _| Ok(()))?;
        total += s.mean_return;
    }
    Ok(total / scenes.len().max(1) as f64)
}

fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Collect, estimate advantages, update, advance the curriculum; repeat until
/// `total_steps` label transitions. With `out_dir`, writes `train_log.csv`,
/// periodic and stage-boundary checkpoints and `final.ckpt`.
pub fn train(setup: &TrainSetup, split: &DatasetSplit, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let cfg = &setup.ppo;
    cfg.validate()?;
    setup.curriculum.validate()?;
    setup.sim.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut policy = ActorCritic::<f32>::new(rng.random());
    policy.actor.set_log_std_bias(cfg.init_log_std);
    let schedule = LinearDecay {
        lr0: cfg.lr,
        total_steps: cfg.total_steps,
    };
    let test: Vec<Scene> = if cfg.eval_scenes == 0 {
        split.test.clone()
    } else {
        split.test.iter().take(cfg.eval_scenes).cloned().collect()
    };
    let mut num_agent = advance_curriculum(&setup.curriculum, 0, cfg.total_steps);
    let mut pool = RolloutPool::new(&split.train, &setup.sim, &setup.camera, &setup.reward, cfg.num_envs, num_agent, &mut rng)?;
    let boundaries = setup.curriculum.boundaries(cfg.total_steps);
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut save = |policy: &ActorCritic<f32>, name: String| -> Result<()> {
        if let Some(dir) = out_dir {
            let p = dir.join(name);
            policy.save(&p)?;
            checkpoints.push(p);
        }
        Ok(())
    };
    let eval = |policy: &ActorCritic<f32>, n: usize| -> Result<Option<f64>> {
        if test.is_empty() {
            Ok(None)
        } else {
            evaluate_return(policy, &test, n, setup).map(Some)
        }
    };

    log.push(LogRow {
        global_step: 0,
        train_reward: None,
        test_reward: eval(&policy, num_agent)?,
        actor_loss: None,
        critic_loss: None,
        entropy: None,
        num_agent,
        lr: schedule.at(0),
    });
    let mut global_step = 0u64;
    let mut updates = 0usize;
    let mut next_ckpt = cfg.checkpoint_every;
    while global_step < cfg.total_steps {
        let want = (cfg.buffer_size as u64).min(cfg.total_steps - global_step) as usize;
        let buffer = collect_rollouts(&mut pool, &policy, want, cfg, &mut rng)?;
        let lr = schedule.at(global_step);
        let report = ppo_update(&mut policy, &buffer, cfg, lr, &mut rng)?;
        global_step += buffer.len() as u64;
        updates += 1;
        let train_reward = if pool.finished_returns.is_empty() {
            None
        } else {
            let r = pool.finished_returns.iter().sum::<f64>() / pool.finished_returns.len() as f64;
            pool.finished_returns.clear();
            Some(r)
        };
        let last = global_step >= cfg.total_steps;
        let test_reward = if updates % cfg.eval_every.max(1) == 0 || last {
            eval(&policy, num_agent)?
        } else {
            None
        };
        log::info!(
            "step {global_step} agents {num_agent} train {train_reward:?} test {test_reward:?} actor {:.4} critic {:.4} entropy {:.3}",
            report.actor_loss,
            report.critic_loss,
            report.entropy
        );
        log.push(LogRow {
            global_step,
            train_reward,
            test_reward,
            actor_loss: Some(report.actor_loss),
            critic_loss: Some(report.critic_loss),
            entropy: Some(report.entropy),
            num_agent,
            lr,
        });
        if cfg.checkpoint_every > 0 && global_step >= next_ckpt && !last {
            save(&policy, format!("step_{global_step:010}.ckpt"))?;
            while next_ckpt <= global_step {
                next_ckpt += cfg.checkpoint_every;
            }
        }
        let next_agents = advance_curriculum(&setup.curriculum, global_step, cfg.total_steps);
        if next_agents != num_agent && !last {
            save(&policy, format!("stage_{}_step_{global_step:010}.ckpt", num_agent))?;
            num_agent = next_agents;
            pool.num_agent = num_agent;
            pool.reset_all(&mut rng)?;
        }
    }
    save(&policy, "final.ckpt".to_string())?;
    debug_assert!(boundaries.first() == Some(&0));
    if let Some(dir) = out_dir {
        write_log(&dir.join("train_log.csv"), &log)?;
    }
    Ok(TrainOutcome { policy, log, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{synth_generate, SynthKind, SynthParams};

    #[test]
    fn gae_hand_expansion() {
        let (a, _) = compute_gae(&[1.0, 1.0, 1.0], &[0.0; 3], 0.0, 0.5, 1.0);
        assert_eq!(a, vec![1.75, 1.5, 1.0]);
        let (a, _) = compute_gae(&[0.3, -0.2], &[0.5, 0.1], 7.0, 0.0, 0.9);
        assert_eq!(a, vec![0.3 - 0.5, -0.2 - 0.1]);
        let (_, r) = compute_gae(&[1.0, 2.0], &[0.0; 2], 0.0, 0.9, 1.0);
        assert!((r[0] - 2.8).abs() < 1e-12 && r[1] == 2.0);
    }

    #[test]
    fn curriculum_full_scale_schedules() {
        let a = CurriculumSchedule { start: 2, end: 10, step: 2 };
        assert_eq!(a.stages(), 5);
        assert_eq!(advance_curriculum(&a, 0, 20_000_000), 2);
        assert_eq!(advance_curriculum(&a, 19_900_000, 20_000_000), 10);
        assert_eq!(advance_curriculum(&a, 20_000_000, 20_000_000), 10);
        assert_eq!(a.boundaries(20_000_000), vec![0, 4_000_000, 8_000_000, 12_000_000, 16_000_000]);
        let b = CurriculumSchedule { start: 4, end: 20, step: 4 };
        assert_eq!(b.stages(), 5);
        assert!(CurriculumSchedule { start: 2, end: 9, step: 2 }.validate().is_err());
    }

    fn small_pool(num_agent: usize) -> (RolloutPool, ActorCritic<f32>, ChaCha8Rng) {
        let scenes: Vec<Scene> = (0..3)
            .map(|s| synth_generate(SynthKind::CrossingPair, &SynthParams::default(), s).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = RolloutPool::new(
            &scenes,
            &SimConfig::default(),
            &CameraSpec::default(),
            &RewardConfig::default(),
            1,
            num_agent,
            &mut rng,
        )
        .unwrap();
        (pool, ActorCritic::new(3), rng)
    }

    #[test]
    fn one_world_one_episode_gives_labels_times_steps() {
        let (mut pool, ac, mut rng) = small_pool(2);
        let cfg = PpoConfig::desk();
        let buf = collect_rollouts(&mut pool, &ac, 300, &cfg, &mut rng).unwrap();
        assert_eq!(buf.len(), 300);
        assert_eq!(buf.streams.len(), 2);
        assert!(buf.streams.iter().all(|s| s.transitions.len() == 150 && s.transitions.last().unwrap().done));
        assert_eq!(pool.finished_returns.len(), 1);
    }

    #[test]
    fn rollouts_are_reproducible() {
        let cfg = PpoConfig::desk();
        let (mut p1, ac, mut r1) = small_pool(2);
        let a = collect_rollouts(&mut p1, &ac, 500, &cfg, &mut r1).unwrap();
        let (mut p2, _, mut r2) = small_pool(2);
        let b = collect_rollouts(&mut p2, &ac, 500, &cfg, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.streams.iter().all(|s| s.transitions.len() <= 150));
    }

    #[test]
    fn identical_policy_has_unit_ratio() {
        let (mut pool, mut ac, mut rng) = small_pool(2);
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            ..PpoConfig::desk()
        };
        let buf = collect_rollouts(&mut pool, &ac, 64, &cfg, &mut rng).unwrap();
        let trans: Vec<&Transition> = buf.transitions().collect();
        let mb = Minibatch {
            obs: trans.iter().map(|t| &t.obs).collect(),
            actions: trans.iter().map(|t| t.action).collect(),
            old_log_probs: trans.iter().map(|t| t.log_prob).collect(),
            advantages: vec![0.0; trans.len()],
            returns: trans.iter().map(|t| t.value).collect(),
        };
        let r = ppo_gradients(&mut ac, &mb, &cfg).unwrap();
        assert_eq!(r.clip_fraction, 0.0);
        assert!(r.actor_loss.abs() < 1e-12);
        assert!(r.critic_loss < 1e-10);
        // zero advantages and no entropy bonus: the actor receives no gradient
        assert!(ac.actor.net.store.grad_sq_norm() == 0.0);
    }
}
