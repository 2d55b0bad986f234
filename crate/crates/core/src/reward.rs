//! Per-step reward and the OCC / INT / DIST evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Action, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepCounts {
    pub n_occ: usize,
    pub n_int: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub occ_weight: f64,
    pub int_weight: f64,
    pub acc_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            occ_weight: 0.1,
            int_weight: 0.1,
            acc_weight: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_occ: f64,
    pub r_int: f64,
    pub r_acc: f64,
    pub total: f64,
}

fn count_term(n: usize, w: f64) -> f64 {
    if n > 0 {
        -w * n as f64
    } else {
        w
    }
}

/// Reward for one label after one step. The bound check uses the raw,
/// pre-clamp action.
pub fn reward(counts: StepCounts, raw: &Action, max_acc: f64, cfg: &RewardConfig) -> RewardBreakdown {
    let r_occ = count_term(counts.n_occ, cfg.occ_weight);
    let r_int = count_term(counts.n_int, cfg.int_weight);
    let in_bounds = raw.a.x.abs() <= max_acc && raw.a.y.abs() <= max_acc;
    let r_acc = if in_bounds { cfg.acc_weight } else { -cfg.acc_weight };
    RewardBreakdown {
        r_occ,
        r_int,
        r_acc,
        total: r_occ + r_int + r_acc,
    }
}

/// Largest per-step reward attainable under `cfg`.
pub fn max_step_reward(cfg: &RewardConfig) -> f64 {
    cfg.occ_weight + cfg.int_weight + cfg.acc_weight
}

/// Running sums for one episode, indexed by label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub occ: Vec<u64>,
    pub int: Vec<u64>,
    pub label_path: Vec<f64>,
    pub object_path: Vec<f64>,
    /// Steps during which each label was active.
    pub active_steps: Vec<u64>,
    pub steps: u64,
}

/// OCC: occluded entities per label per step. INT: crossed leader lines per
/// label per step. DIST: label path minus target path, per label, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub occ: f64,
    pub int: f64,
    pub dist: f64,
}

impl MetricsAccumulator {
    pub fn new(labels: usize) -> Self {
        Self {
            occ: vec![0; labels],
            int: vec![0; labels],
            label_path: vec![0.0; labels],
            object_path: vec![0.0; labels],
            active_steps: vec![0; labels],
            steps: 0,
        }
    }

    /// Adds one step. `counts[i]` belongs to label `i` in `after`.
    pub fn accumulate(&mut self, before: &WorldState, after: &WorldState, counts: &[StepCounts]) {
        for (i, (lb, la)) in before.labels.iter().zip(&after.labels).enumerate() {
            if !la.active {
                continue;
            }
            self.occ[i] += counts[i].n_occ as u64;
            self.int[i] += counts[i].n_int as u64;
            self.active_steps[i] += 1;
            if lb.active {
                let ob = &before.objects[lb.target];
                let oa = &after.objects[la.target];
                self.label_path[i] += (la.world_pos - lb.world_pos).norm();
                self.object_path[i] += (oa.pos - ob.pos).norm();
            }
        }
        self.steps += 1;
    }

    /// Element-wise sum of two accumulators over the same labels.
    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            *a += b;
        }
        for (a, b) in self.int.iter_mut().zip(&other.int) {
            *a += b;
        }
        for (a, b) in self.label_path.iter_mut().zip(&other.label_path) {
            *a += b;
        }
        for (a, b) in self.object_path.iter_mut().zip(&other.object_path) {
            *a += b;
        }
        for (a, b) in self.active_steps.iter_mut().zip(&other.active_steps) {
            *a += b;
        }
        self.steps += other.steps;
    }

    pub fn finalize(&self) -> Result<EpisodeMetrics> {
        if self.steps == 0 {
            return Err(Error::ZeroSteps);
        }
        let label_steps: u64 = self.active_steps.iter().sum();
        let seen = self.active_steps.iter().filter(|&&n| n > 0).count();
        if label_steps == 0 || seen == 0 {
            return Err(Error::ZeroSteps);
        }
        let extra: f64 = self
            .label_path
            .iter()
            .zip(&self.object_path)
            .map(|(l, o)| l - o)
            .sum();
        Ok(EpisodeMetrics {
            occ: self.occ.iter().sum::<u64>() as f64 / label_steps as f64,
            int: self.int.iter().sum::<u64>() as f64 / label_steps as f64,
            dist: extra / seen as f64,
        })
    }
}
