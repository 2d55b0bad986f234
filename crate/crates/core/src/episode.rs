//! Running a controller through one scene and scoring every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{force_actions, none_controller, ForceConfig};
use crate::encoder::encode_observation;
use crate::error::{Error, Result};
use crate::geometry::ProjectedWorld;
use crate::linalg::Vec2;
use crate::policy::{ActMode, ActorCritic};
use crate::reward::{reward, EpisodeMetrics, MetricsAccumulator, RewardBreakdown, RewardConfig, StepCounts};
use crate::sim::{Action, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    None,
    Force,
    Rl,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerKind::None => "none",
            ControllerKind::Force => "force",
            ControllerKind::Rl => "rl",
        })
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "force" => Ok(Self::Force),
            "rl" => Ok(Self::Rl),
            _ => Err(Error::Usage(format!("unknown controller {s:?} (expected none, force or rl)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// Labels stay pinned at the home offset.
    None,
    Force(ForceConfig),
    Rl(&'a ActorCritic<f32>),
}

impl Controller<'_> {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::None => ControllerKind::None,
            Controller::Force(_) => ControllerKind::Force,
            Controller::Rl(_) => ControllerKind::Rl,
        }
    }

    /// Actions for every label; inactive labels get zero. A label whose
    /// observation cannot be encoded holds still.
    pub fn actions<R: Rng + ?Sized>(&self, world: &World, mode: ActMode, rng: &mut R) -> Result<Vec<Action>> {
        let n = world.state.labels.len();
        match self {
            Controller::None => Ok((0..n).map(|i| none_controller(world, i)).collect()),
            Controller::Force(cfg) => Ok(force_actions(world, cfg)),
            Controller::Rl(policy) => {
                let mut actions = vec![Action::zero(); n];
                let mut idx = Vec::new();
                let mut obs = Vec::new();
                for i in world.active_labels() {
                    match encode_observation(world, i) {
                        Ok(o) => {
                            idx.push(i);
                            obs.push(o);
                        }
                        Err(Error::ObservationInvalid(_)) => {
                            log::warn!("label {i} unobservable at step {}; holding", world.state.step);
                        }
                        Err(e) => return Err(e),
                    }
                }
                let refs: Vec<_> = obs.iter().collect();
                for (i, d) in idx.into_iter().zip(policy.act_batch(&refs, mode, rng)?) {
                    actions[i] = d.action;
                }
                Ok(actions)
            }
        }
    }
}

/// Counts and reward of one label after a step; `None` for inactive labels.
pub type LabelScore = Option<(StepCounts, RewardBreakdown)>;

/// Per-label counts in the current state.
pub fn step_counts(world: &World) -> Vec<StepCounts> {
    let proj = ProjectedWorld::new(world);
    (0..world.state.labels.len())
        .map(|i| StepCounts {
            n_occ: proj.occlusions(i),
            n_int: proj.intersections(i),
        })
        .collect()
}

/// Steps the world and scores each label on the resulting state.
pub fn step_and_score(world: &mut World, actions: &[Action], cfg: &RewardConfig) -> Result<Vec<LabelScore>> {
    world.step(actions)?;
    let counts = step_counts(world);
    Ok(world
        .state
        .labels
        .iter()
        .zip(counts)
        .zip(actions)
        .map(|((l, c), a)| l.active.then(|| (c, reward(c, a, world.config.max_acc, cfg))))
        .collect())
}

/// Pins every label at the home offset with zero velocity.
pub fn pin_labels(world: &mut World) {
    for l in &mut world.state.labels {
        l.offset = Vec2::zero();
        l.offset_vel = Vec2::zero();
    }
    world.refresh_labels();
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub metrics: EpisodeMetrics,
    /// Mean over labels of each label's summed reward.
    pub mean_return: f64,
    pub steps: usize,
}

/// Runs `controller` until the scene ends. `on_step` sees the world after
/// every step together with the scores.
pub fn run_episode<R, F>(
    world: &mut World,
    controller: &Controller,
    mode: ActMode,
    cfg: &RewardConfig,
    rng: &mut R,
    mut on_step: F,
) -> Result<EpisodeSummary>
where
    R: Rng + ?Sized,
    F: FnMut(&World, &[LabelScore]) -> Result<()>,
{
    let n = world.state.labels.len();
    let mut acc = MetricsAccumulator::new(n);
    let mut returns = vec![0.0; n];
    let mut seen = vec![false; n];
    while !world.is_finished() {
        let before = world.state.clone();
        let actions = controller.actions(world, mode, rng)?;
        let mut scores = step_and_score(world, &actions, cfg)?;
        if matches!(controller, Controller::None) {
            pin_labels(world);
            let counts = step_counts(world);
            for (s, c) in scores.iter_mut().zip(counts) {
                if let Some((sc, r)) = s {
                    *sc = c;
                    *r = reward(c, &Action::zero(), world.config.max_acc, cfg);
                }
            }
        }
        let counts: Vec<StepCounts> = scores.iter().map(|s| s.map(|(c, _)| c).unwrap_or_default()).collect();
        acc.accumulate(&before, &world.state, &counts);
        for (i, s) in scores.iter().enumerate() {
            if let Some((_, r)) = s {
                returns[i] += r.total;
                seen[i] = true;
            }
        }
        on_step(world, &scores)?;
    }
    let labelled: Vec<f64> = returns.iter().zip(&seen).filter(|(_, s)| **s).map(|(r, _)| *r).collect();
    let mean_return = if labelled.is_empty() {
        0.0
    } else {
        labelled.iter().sum::<f64>() / labelled.len() as f64
    };
    Ok(EpisodeSummary {
        metrics: acc.finalize()?,
        mean_return,
        steps: acc.steps as usize,
    })
}
