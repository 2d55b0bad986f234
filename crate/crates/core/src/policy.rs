//! Attention actor-critic over encoded label observations.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_observation, EncodedObservation, NEIGHBOR_DIM, SELF_DIM};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::nn::checkpoint::{self, Fingerprint};
use crate::nn::{Activation, AttentionPool, DenseLayer, DiagGaussian, ParamStore, PoolTrace, Tensor};
use crate::nn::{LOG_STD_MAX, LOG_STD_MIN};
use crate::scalar::Real;
use crate::sim::{Action, World};

pub const HIDDEN: usize = 128;
pub const SCORE_HIDDEN: usize = 64;
pub const HEATMAP_SIZE: usize = 30;

/// Layer widths. The default is the production network; narrower variants
/// share the topology and are used for exhaustive gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub hidden: usize,
    pub score_hidden: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Self {
            hidden: HIDDEN,
            score_hidden: SCORE_HIDDEN,
        }
    }
}

/// A batch of observations with neighbors flattened into one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsBatch<T> {
    /// (B x SELF_DIM)
    pub self_feat: Tensor<T>,
    /// (N x NEIGHBOR_DIM), grouped by sample.
    pub neighbors: Tensor<T>,
    /// Neighbors of sample `b` are rows `offsets[b]..offsets[b+1]`.
    pub offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl<T: Real> ObsBatch<T> {
    pub fn new<'a, I>(obs: I) -> Self
    where
        I: IntoIterator<Item = &'a EncodedObservation>,
    {
        let mut self_data = Vec::new();
        let mut nb_data = Vec::new();
        let mut offsets = vec![0];
        let mut owner = Vec::new();
        for (b, o) in obs.into_iter().enumerate() {
            self_data.extend(o.self_feat.iter().map(|v| T::lit(*v)));
            for n in &o.neighbors {
                nb_data.extend(n.iter().map(|v| T::lit(*v)));
                owner.push(b);
            }
            offsets.push(owner.len());
        }
        let b = offsets.len() - 1;
        Self {
            self_feat: Tensor {
                shape: vec![b, SELF_DIM],
                data: self_data,
            },
            neighbors: Tensor {
                shape: vec![owner.len(), NEIGHBOR_DIM],
                data: nb_data,
            },
            offsets,
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Self embedding, per-neighbor embedding conditioned on the self embedding,
/// and attention pooling. Output is `[self_embed, pooled]` (B x 256).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderNet {
    pub self_embed: DenseLayer,
    pub neighbor_embed: DenseLayer,
    pub attention: AttentionPool,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct EncoderTrace<T> {
    pub self_embed: Tensor<T>,
    pub neighbor_in: Tensor<T>,
    pub neighbor_embed: Tensor<T>,
    pub pool: PoolTrace<T>,
    pub out: Tensor<T>,
}

impl EncoderNet {
    pub fn new<T: Real, R: Rng + ?Sized>(store: &mut ParamStore<T>, name: &str, arch: Arch, rng: &mut R) -> Self {
        let relu = 2f64.sqrt();
        let h = arch.hidden;
        Self {
            self_embed: DenseLayer::new(store, &format!("{name}.self"), SELF_DIM, h, Activation::Relu, relu, rng),
            neighbor_embed: DenseLayer::new(
                store,
                &format!("{name}.neighbor"),
                NEIGHBOR_DIM + h,
                h,
                Activation::Relu,
                relu,
                rng,
            ),
            attention: AttentionPool::new(store, &format!("{name}.attention"), h, arch.score_hidden, rng),
            hidden: h,
        }
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, batch: &ObsBatch<T>) -> Result<EncoderTrace<T>> {
        let s = self.self_embed.forward(store, &batch.self_feat)?;
        let n = batch.owner.len();
        let h = self.hidden;
        let width = NEIGHBOR_DIM + h;
        let mut neighbor_in = Tensor::matrix(n, width);
        for (r, &b) in batch.owner.iter().enumerate() {
            let row = neighbor_in.row_mut(r);
            row[..NEIGHBOR_DIM].copy_from_slice(batch.neighbors.row(r));
            row[NEIGHBOR_DIM..].copy_from_slice(s.row(b));
        }
        let e = self.neighbor_embed.forward(store, &neighbor_in)?;
        let pool = self.attention.forward(store, &e, &batch.offsets)?;
        let mut out = Tensor::matrix(batch.len(), 2 * h);
        for b in 0..batch.len() {
            let row = out.row_mut(b);
            row[..h].copy_from_slice(s.row(b));
            row[h..].copy_from_slice(pool.pooled.row(b));
        }
        Ok(EncoderTrace {
            self_embed: s,
            neighbor_in,
            neighbor_embed: e,
            pool,
            out,
        })
    }

    pub fn backward<T: Real>(&self, store: &mut ParamStore<T>, batch: &ObsBatch<T>, tr: &EncoderTrace<T>, d_out: &Tensor<T>) {
        let (b, h) = (batch.len(), self.hidden);
        let mut ds = Tensor::matrix(b, h);
        let mut d_pooled = Tensor::matrix(b, h);
        for r in 0..b {
            let g = d_out.row(r);
            ds.row_mut(r).copy_from_slice(&g[..h]);
            d_pooled.row_mut(r).copy_from_slice(&g[h..]);
        }
        if !batch.owner.is_empty() {
            let d_e = self.attention.backward(store, &tr.neighbor_embed, &batch.offsets, &tr.pool, &d_pooled);
            let d_in = self.neighbor_embed.backward(store, &tr.neighbor_in, &tr.neighbor_embed, &d_e, true);
            for (r, &owner) in batch.owner.iter().enumerate() {
                for (d, g) in ds.row_mut(owner).iter_mut().zip(&d_in.row(r)[NEIGHBOR_DIM..]) {
                    *d += *g;
                }
            }
        }
        self.self_embed.backward(store, &batch.self_feat, &tr.self_embed, &ds, false);
    }

    fn pattern<T: Real>(&self, tr: &EncoderTrace<T>, out: &mut Vec<bool>) {
        self.self_embed.pattern(&tr.self_embed, out);
        self.neighbor_embed.pattern(&tr.neighbor_embed, out);
        self.attention.hidden.pattern(&tr.pool.hidden, out);
    }
}

/// Encoder followed by three dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub store: ParamStore<T>,
    pub encoder: EncoderNet,
    pub trunk: [DenseLayer; 3],
}

#[derive(Debug, Clone)]
pub struct NetTrace<T> {
    pub encoder: EncoderTrace<T>,
    pub hidden: [Tensor<T>; 3],
}

impl<T> NetTrace<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.hidden[2]
    }
}

impl<T: Real> Network<T> {
    fn build<R: Rng + ?Sized>(name: &str, arch: Arch, out_dim: usize, out_gain: f64, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let encoder = EncoderNet::new(&mut store, &format!("{name}.encoder"), arch, rng);
        let relu = 2f64.sqrt();
        let h = arch.hidden;
        let trunk = [
            DenseLayer::new(&mut store, &format!("{name}.fc0"), 2 * h, h, Activation::Relu, relu, rng),
            DenseLayer::new(&mut store, &format!("{name}.fc1"), h, h, Activation::Relu, relu, rng),
            DenseLayer::new(&mut store, &format!("{name}.out"), h, out_dim, Activation::Identity, out_gain, rng),
        ];
        Self { store, encoder, trunk }
    }

    pub fn forward(&self, batch: &ObsBatch<T>) -> Result<NetTrace<T>> {
        let encoder = self.encoder.forward(&self.store, batch)?;
        let h0 = self.trunk[0].forward(&self.store, &encoder.out)?;
        let h1 = self.trunk[1].forward(&self.store, &h0)?;
        let h2 = self.trunk[2].forward(&self.store, &h1)?;
        if h2.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::PolicyCorruption);
        }
        Ok(NetTrace {
            encoder,
            hidden: [h0, h1, h2],
        })
    }

    /// Accumulates parameter gradients for `d_out` (gradient wrt the output).
    pub fn backward(&mut self, batch: &ObsBatch<T>, tr: &NetTrace<T>, d_out: &Tensor<T>) {
        let [h0, h1, h2] = &tr.hidden;
        let d1 = self.trunk[2].backward(&mut self.store, h1, h2, d_out, true);
        let d0 = self.trunk[1].backward(&mut self.store, h0, h1, &d1, true);
        let dz = self.trunk[0].backward(&mut self.store, &tr.encoder.out, h0, &d0, true);
        self.encoder.backward(&mut self.store, batch, &tr.encoder, &dz);
    }

    /// Activation pattern of every relu, used for kink detection.
    pub fn pattern(&self, tr: &NetTrace<T>) -> Vec<bool> {
        let mut out = Vec::new();
        self.encoder.pattern(&tr.encoder, &mut out);
        for (l, h) in self.trunk.iter().zip(&tr.hidden) {
            l.pattern(h, &mut out);
        }
        out
    }

    /// Casts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let mut store = ParamStore::<U>::new();
        for p in &self.store.params {
            let data = p.value.data.iter().map(|v| U::lit(v.as_f64())).collect();
            store.add(p.name.clone(), Tensor {
                shape: p.value.shape.clone(),
                data,
            });
        }
        Network {
            store,
            encoder: self.encoder,
            trunk: self.trunk,
        }
    }
}

/// Gaussian policy over (a_x, a_z).
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNet<T> {
    pub net: Network<T>,
}

/// State-value estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet<T> {
    pub net: Network<T>,
}

impl<T: Real> ActorNet<T> {
    pub fn new<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        Self {
            net: Network::build("actor", arch, 4, 0.01, rng),
        }
    }

    /// Sets the state-independent part of the log-std output.
    pub fn set_log_std_bias(&mut self, v: f64) {
        let b = self.net.trunk[2].bias;
        for x in &mut self.net.store.value_mut(b)[2..4] {
            *x = T::lit(v);
        }
    }

    pub fn distributions(tr: &NetTrace<T>) -> Vec<DiagGaussian<T>> {
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let out = tr.output();
        (0..out.rows())
            .map(|b| {
                let r = out.row(b);
                DiagGaussian {
                    mean: [r[0], r[1]],
                    log_std: [r[2].max(lo).min(hi), r[3].max(lo).min(hi)],
                }
            })
            .collect()
    }

    /// Gradient of `Σ_b d_logp[b]·log π(a_b) + d_ent[b]·H_b` wrt the raw outputs.
    pub fn head_grad(tr: &NetTrace<T>, actions: &[[T; 2]], d_logp: &[T], d_ent: &[T]) -> Tensor<T> {
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let out = tr.output();
        let dists = Self::distributions(tr);
        let mut d = Tensor::matrix(out.rows(), 4);
        for b in 0..out.rows() {
            let (dm, ds) = dists[b].log_prob_grad(actions[b]);
            let raw = out.row(b);
            let row = d.row_mut(b);
            for k in 0..2 {
                row[k] = d_logp[b] * dm[k];
                let inside = raw[2 + k] > lo && raw[2 + k] < hi;
                row[2 + k] = if inside { d_logp[b] * ds[k] + d_ent[b] } else { T::zero() };
            }
        }
        d
    }

    /// Pattern including which log-std outputs are clamped.
    pub fn pattern(&self, tr: &NetTrace<T>) -> Vec<bool> {
        let mut p = self.net.pattern(tr);
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let out = tr.output();
        for b in 0..out.rows() {
            for k in 2..4 {
                let v = out.row(b)[k];
                p.push(v > lo && v < hi);
            }
        }
        p
    }
}

impl<T: Real> CriticNet<T> {
    /// The output layer starts at zero, so an untrained critic predicts 0.
    pub fn new<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        let mut net = Network::build("critic", arch, 1, 1.0, rng);
        let w = net.trunk[2].weight;
        net.store.value_mut(w).iter_mut().for_each(|v| *v = T::zero());
        Self { net }
    }

    pub fn values(tr: &NetTrace<T>) -> Vec<T> {
        tr.output().data.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

/// What the heatmap grid ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapMode {
    /// Hypothetical label offsets on the plane.
    #[default]
    Offset,
    /// One-step accelerations over `[-max_acc, max_acc]^2`.
    Acceleration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<T> {
    pub actor: ActorNet<T>,
    pub critic: CriticNet<T>,
}

/// Identifies the parameter layout written to checkpoints.
pub fn architecture_fingerprint() -> Fingerprint {
    checkpoint::fingerprint(&format!(
        "labelrl actor-critic; self={SELF_DIM}; neighbor={NEIGHBOR_DIM}; hidden={HIDDEN}; score={SCORE_HIDDEN}; \
         trunk=3 relu; actor_out=4 clamp[{LOG_STD_MIN},{LOG_STD_MAX}]; critic_out=1"
    ))
}

impl<T: Real> ActorCritic<T> {
    pub fn new(seed: u64) -> Self {
        Self::with_arch(seed, Arch::default())
    }

    pub fn with_arch(seed: u64, arch: Arch) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = ActorNet::new(arch, &mut rng);
        let critic = CriticNet::new(arch, &mut rng);
        Self { actor, critic }
    }

    /// Decisions for a batch of observations, in order. One rng draw pair per
    /// row in stochastic mode.
    pub fn act_batch<R: Rng + ?Sized>(
        &self,
        obs: &[&EncodedObservation],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Vec<PolicyDecision>> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        let batch = ObsBatch::<T>::new(obs.iter().copied());
        let at = self.actor.net.forward(&batch)?;
        let vt = self.critic.net.forward(&batch)?;
        let values = CriticNet::values(&vt);
        let mut out = Vec::with_capacity(obs.len());
        for (d, v) in ActorNet::distributions(&at).into_iter().zip(values) {
            let a = d.sample(rng, mode == ActMode::Deterministic);
            let lp = d.log_prob(a);
            let std = d.std();
            let dec = PolicyDecision {
                action: Action::new(a[0].as_f64(), a[1].as_f64()),
                log_prob: lp.as_f64(),
                value: v.as_f64(),
                mean: [d.mean[0].as_f64(), d.mean[1].as_f64()],
                std: [std[0].as_f64(), std[1].as_f64()],
            };
            if !(dec.action.a.is_finite() && dec.log_prob.is_finite() && dec.value.is_finite()) {
                return Err(Error::PolicyCorruption);
            }
            out.push(dec);
        }
        Ok(out)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &EncodedObservation, mode: ActMode, rng: &mut R) -> Result<PolicyDecision> {
        Ok(self.act_batch(&[obs], mode, rng)?[0])
    }

    /// Log-probabilities, values and entropies of `actions` under the current networks.
    pub fn evaluate_actions(&self, batch: &ObsBatch<T>, actions: &[[T; 2]]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        if actions.len() != batch.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![batch.len(), 2],
                found: vec![actions.len(), 2],
            });
        }
        let at = self.actor.net.forward(batch)?;
        let vt = self.critic.net.forward(batch)?;
        let dists = ActorNet::distributions(&at);
        let lp = dists.iter().zip(actions).map(|(d, a)| d.log_prob(*a)).collect();
        let ent = dists.iter().map(|d| d.entropy()).collect();
        Ok((lp, CriticNet::values(&vt), ent))
    }

    pub fn values(&self, obs: &[&EncodedObservation]) -> Result<Vec<f64>> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        let batch = ObsBatch::<T>::new(obs.iter().copied());
        let vt = self.critic.net.forward(&batch)?;
        Ok(vt.output().data.iter().map(|v| v.as_f64()).collect())
    }

    /// Critic values of label `i` over a 30x30 grid; rows follow z, columns x,
    /// both increasing. `world` is not modified.
    pub fn value_heatmap(&self, world: &World, i: usize, mode: HeatmapMode) -> Result<Vec<Vec<f64>>> {
        if i >= world.state.labels.len() || !world.state.labels[i].active {
            return Err(Error::InvalidParameter(format!("label {i} is not active")));
        }
        let n = HEATMAP_SIZE;
        let extent = match mode {
            HeatmapMode::Offset => world.config.plane_side,
            HeatmapMode::Acceleration => 2.0 * world.config.max_acc,
        };
        let center = |k: usize| -extent / 2.0 + (k as f64 + 0.5) * extent / n as f64;
        let mut obs = Vec::with_capacity(n * n);
        let mut probe = world.clone();
        for r in 0..n {
            for c in 0..n {
                let cell = Vec2::new(center(c), center(r));
                match mode {
                    HeatmapMode::Offset => {
                        probe.place_label(i, cell);
                    }
                    HeatmapMode::Acceleration => {
                        probe.state = world.state.clone();
                        let mut actions = vec![Action::zero(); world.state.labels.len()];
                        actions[i] = Action { a: cell };
                        probe.step(&actions)?;
                    }
                }
                obs.push(encode_observation(&probe, i)?);
            }
        }
        let values = self.values(&obs.iter().collect::<Vec<_>>())?;
        Ok(values.chunks(n).map(|r| r.to_vec()).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        checkpoint::write(w, &architecture_fingerprint(), &[&self.actor.net.store, &self.critic.net.store])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut ac = Self::new(0);
        let r = BufReader::new(File::open(path)?);
        checkpoint::read_into(
            r,
            &architecture_fingerprint(),
            &mut [&mut ac.actor.net.store, &mut ac.critic.net.store],
        )?;
        Ok(ac)
    }

    pub fn cast<U: Real>(&self) -> ActorCritic<U> {
        ActorCritic {
            actor: ActorNet {
                net: self.actor.net.cast(),
            },
            critic: CriticNet {
                net: self.critic.net.cast(),
            },
        }
    }
}

/// Weights of the smooth probe loss used by [`gradient_check`]:
/// `Σ_b LP·log π(a_b) + ENT·H_b + VSQ·V_b²`.
pub const PROBE_WEIGHTS: (f64, f64, f64) = (0.7, 0.3, 0.5);

fn probe_actor(actor: &ActorNet<f64>, batch: &ObsBatch<f64>, actions: &[[f64; 2]]) -> Result<(f64, NetTrace<f64>)> {
    let tr = actor.net.forward(batch)?;
    let (wl, we, _) = PROBE_WEIGHTS;
    let loss = ActorNet::distributions(&tr)
        .iter()
        .zip(actions)
        .map(|(d, a)| wl * d.log_prob(*a) + we * d.entropy())
        .sum();
    Ok((loss, tr))
}

fn probe_critic(critic: &CriticNet<f64>, batch: &ObsBatch<f64>) -> Result<(f64, NetTrace<f64>)> {
    let tr = critic.net.forward(batch)?;
    let loss = tr.output().data.iter().map(|v| PROBE_WEIGHTS.2 * v * v).sum();
    Ok((loss, tr))
}

/// Compares reverse-mode gradients of the probe loss with central differences
/// of step `h`, over every actor and critic parameter.
pub fn gradient_check(
    ac: &mut ActorCritic<f64>,
    obs: &[EncodedObservation],
    actions: &[[f64; 2]],
    h: f64,
) -> Result<crate::nn::GradCheckReport> {
    gradient_check_strided(ac, obs, actions, h, 1)
}

/// [`gradient_check`] restricted to every `stride`-th scalar of each network.
pub fn gradient_check_strided(
    ac: &mut ActorCritic<f64>,
    obs: &[EncodedObservation],
    actions: &[[f64; 2]],
    h: f64,
    stride: usize,
) -> Result<crate::nn::GradCheckReport> {
    let batch = ObsBatch::new(obs.iter());
    let (wl, we, wv) = PROBE_WEIGHTS;

    let actor = &mut ac.actor;
    actor.net.store.zero_grad();
    let (_, tr) = probe_actor(actor, &batch, actions)?;
    let n = batch.len();
    let d = ActorNet::head_grad(&tr, actions, &vec![wl; n], &vec![we; n]);
    actor.net.backward(&batch, &tr, &d);
    let analytic: Vec<Vec<f64>> = actor.net.store.params.iter().map(|p| p.grad.clone()).collect();
    let probe = actor.clone();
    let mut store = actor.net.store.clone();
    let ra = crate::nn::gradcheck::check(&mut store, &analytic, h, stride, |s| {
        let mut a = probe.clone();
        a.net.store.params.iter_mut().zip(&s.params).for_each(|(p, q)| p.value.data.copy_from_slice(&q.value.data));
        let (loss, tr) = probe_actor(&a, &batch, actions).expect("probe forward");
        (loss, a.pattern(&tr))
    });

    let critic = &mut ac.critic;
    critic.net.store.zero_grad();
    let (_, tr) = probe_critic(critic, &batch)?;
    let d = Tensor {
        shape: vec![n, 1],
        data: tr.output().data.iter().map(|v| 2.0 * wv * v).collect(),
    };
    critic.net.backward(&batch, &tr, &d);
    let analytic: Vec<Vec<f64>> = critic.net.store.params.iter().map(|p| p.grad.clone()).collect();
    let probe = critic.clone();
    let mut store = critic.net.store.clone();
    let rc = crate::nn::gradcheck::check(&mut store, &analytic, h, stride, |s| {
        let mut c = probe.clone();
        c.net.store.params.iter_mut().zip(&s.params).for_each(|(p, q)| p.value.data.copy_from_slice(&q.value.data));
        let (loss, tr) = probe_critic(&c, &batch).expect("probe forward");
        (loss, c.net.pattern(&tr))
    });
    Ok(crate::nn::GradCheckReport {
        max_rel_error: ra.max_rel_error.max(rc.max_rel_error),
        checked: ra.checked + rc.checked,
        skipped: ra.skipped + rc.skipped,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{Camera, CameraSpec};
    use crate::sim::SimConfig;
    use crate::trajectory::{synth_generate, SynthKind, SynthParams};

    const LN_2PI: f64 = 1.8378770664093453;

    fn world(seed: u64) -> World {
        let scene = synth_generate(SynthKind::CrossingPair, &SynthParams::default(), seed).unwrap();
        let ids: Vec<String> = scene.tracks.keys().cloned().collect();
        let cam = Camera::new(&CameraSpec::default()).unwrap();
        World::new(Arc::new(scene), SimConfig::default(), cam, &ids).unwrap()
    }

    #[test]
    fn deterministic_action_is_mean() {
        let ac = ActorCritic::<f64>::new(1);
        let w = world(0);
        let obs = encode_observation(&w, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = ac.act(&obs, ActMode::Deterministic, &mut rng).unwrap();
        assert_eq!([d.action.a.x, d.action.a.y], d.mean);
        let closed = -(d.std[0].ln() + d.std[1].ln()) - LN_2PI;
        assert!((d.log_prob - closed).abs() < 1e-12);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let ac = ActorCritic::<f32>::new(1);
        let obs = encode_observation(&world(0), 1).unwrap();
        let a = ac.act(&obs, ActMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = ac.act(&obs, ActMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let d = DiagGaussian {
            mean: a.mean,
            log_std: [a.std[0].ln(), a.std[1].ln()],
        };
        assert!((d.log_prob([a.action.a.x, a.action.a.y]) - a.log_prob).abs() < 1e-5);
    }

    #[test]
    fn evaluate_matches_act_and_batch_of_one() {
        let ac = ActorCritic::<f64>::new(2);
        let w = world(3);
        let obs: Vec<_> = (0..2).map(|i| encode_observation(&w, i).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dec = ac.act_batch(&[&obs[0], &obs[1]], ActMode::Stochastic, &mut rng).unwrap();
        let batch = ObsBatch::new(obs.iter());
        let actions: Vec<[f64; 2]> = dec.iter().map(|d| [d.action.a.x, d.action.a.y]).collect();
        let (lp, v, _) = ac.evaluate_actions(&batch, &actions).unwrap();
        for k in 0..2 {
            assert!((lp[k] - dec[k].log_prob).abs() < 1e-9);
            assert_eq!(v[k], dec[k].value);
            let single = ObsBatch::new([&obs[k]]);
            let (lp1, v1, _) = ac.evaluate_actions(&single, &actions[k..k + 1]).unwrap();
            assert!((lp1[0] - lp[k]).abs() < 1e-12 && (v1[0] - v[k]).abs() < 1e-12);
        }
        assert!(matches!(ac.evaluate_actions(&batch, &actions[..1]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn entropy_falls_with_log_std_bias() {
        let mut ac = ActorCritic::<f64>::new(5);
        let obs = encode_observation(&world(1), 0).unwrap();
        let batch = ObsBatch::new([&obs]);
        let (_, _, e0) = ac.evaluate_actions(&batch, &[[0.0, 0.0]]).unwrap();
        let bias = ac.actor.net.trunk[2].bias;
        let b = ac.actor.net.store.value_mut(bias);
        b[2] -= 0.5;
        b[3] -= 0.5;
        let (_, _, e1) = ac.evaluate_actions(&batch, &[[0.0, 0.0]]).unwrap();
        assert!(e1[0] < e0[0]);
    }

    #[test]
    fn neighbor_order_does_not_matter() {
        let ac = ActorCritic::<f64>::new(6);
        let scene = synth_generate(SynthKind::RandomWalk, &SynthParams { count: 6, ..SynthParams::default() }, 2).unwrap();
        let ids: Vec<String> = scene.tracks.keys().cloned().collect();
        let w = World::new(Arc::new(scene), SimConfig::default(), Camera::new(&CameraSpec::default()).unwrap(), &ids).unwrap();
        let obs = encode_observation(&w, 2).unwrap();
        let mut shuffled = obs.clone();
        shuffled.neighbors.reverse();
        shuffled.neighbors.swap(1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = ac.act(&obs, ActMode::Deterministic, &mut rng).unwrap();
        let b = ac.act(&shuffled, ActMode::Deterministic, &mut rng).unwrap();
        assert!((a.mean[0] - b.mean[0]).abs() <= 1e-9 && (a.mean[1] - b.mean[1]).abs() <= 1e-9);
        assert!((a.std[0] - b.std[0]).abs() <= 1e-9 && (a.value - b.value).abs() <= 1e-9);
    }

    #[test]
    fn inactive_entities_do_not_affect_output() {
        let ac = ActorCritic::<f64>::new(7);
        let mut w = world(0);
        let obs = encode_observation(&w, 0).unwrap();
        // deactivate the other object and its label, then move them arbitrarily
        w.state.objects[1].active = false;
        w.state.labels[1].active = false;
        let solo = encode_observation(&w, 0).unwrap();
        w.state.objects[1].pos.x += 5.0;
        w.state.labels[1].offset.x = 1.0;
        let moved = encode_observation(&w, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = ac.act(&solo, ActMode::Deterministic, &mut rng).unwrap();
        let b = ac.act(&moved, ActMode::Deterministic, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(obs.neighbors.len(), 2);
        assert!(solo.neighbors.is_empty());
    }

    #[test]
    fn untrained_critic_heatmap_is_zero() {
        let ac = ActorCritic::<f32>::new(8);
        let w = world(4);
        let before = w.state.clone();
        let grid = ac.value_heatmap(&w, 0, HeatmapMode::Offset).unwrap();
        assert_eq!(grid.len(), 30);
        assert!(grid.iter().all(|r| r.len() == 30 && r.iter().all(|v| *v == 0.0)));
        assert_eq!(w.state, before);
        let acc = ac.value_heatmap(&w, 1, HeatmapMode::Acceleration).unwrap();
        assert_eq!(acc.len() * acc[0].len(), 900);
    }

    #[test]
    fn checkpoint_round_trip_preserves_actions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let ac = ActorCritic::<f32>::new(11);
        ac.save(&path).unwrap();
        let back = ActorCritic::<f32>::load(&path).unwrap();
        assert_eq!(back.actor.net.store.params.len(), ac.actor.net.store.params.len());
        for (p, q) in ac.actor.net.store.params.iter().zip(&back.actor.net.store.params) {
            assert_eq!(p.value, q.value);
        }
        let obs = encode_observation(&world(2), 0).unwrap();
        let a = ac.act(&obs, ActMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = back.act(&obs, ActMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }
}
