//! Comparison controllers: labels pinned above their targets, and a reactive
//! screen-space force layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{label_center, ProjectedWorld};
use crate::linalg::{Vec2, Vec3};
use crate::sim::{Action, World};

/// Action that cancels the label's offset velocity within one step.
///
/// Labels start at rest at the home offset, so this keeps them there; the
/// evaluation loop additionally pins the offset.
pub fn none_controller(world: &World, i: usize) -> Action {
    let l = &world.state.labels[i];
    let max = world.config.max_acc;
    let dt = world.config.dt;
    Action::new(
        (-l.offset_vel.x / dt).clamp(-max, max),
        (-l.offset_vel.y / dt).clamp(-max, max),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceConfig {
    /// Repulsion gain in screen units.
    pub k_repel: f64,
    /// Normalized screen distance beyond which entities do not repel.
    pub repel_radius: f64,
    /// Spring constant toward the home offset, 1/s^2.
    pub k_spring: f64,
    /// Velocity damping, 1/s.
    pub damping: f64,
    /// Screen force to plane acceleration, applied to the repulsion term.
    pub gain: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            k_repel: 0.02,
            repel_radius: 0.25,
            k_spring: 6.0,
            damping: 4.0,
            gain: 30.0,
        }
    }
}

impl ForceConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k_repel, self.repel_radius, self.k_spring, self.damping, self.gain];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.repel_radius == 0.0 {
            return Err(Error::InvalidParameter(format!("force parameters must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

fn ground_dir(v: Vec3<f64>) -> Vec2<f64> {
    let g = Vec2::new(v.x, v.z);
    let n = g.norm();
    if n > 1e-12 {
        g.scale(1.0 / n)
    } else {
        Vec2::zero()
    }
}

/// Screen-space repulsion on label `i` from every other active entity's
/// projected center (its own target excluded). Depth is ignored.
pub fn repulsion_screen(world: &World, proj: &ProjectedWorld, i: usize, cfg: &ForceConfig) -> Vec2<f64> {
    let l = &world.state.labels[i];
    let Ok(r) = world.camera.to_ray_space(label_center(l, &world.config, &world.camera)) else {
        return Vec2::zero();
    };
    let me = Vec2::new(r.u, r.v);
    let others = proj
        .objects
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != l.target)
        .chain(proj.labels.iter().enumerate().filter(|(j, _)| *j != i))
        .filter_map(|(_, rect)| rect.as_ref())
        .map(|rect| rect.center());
    let mut f = Vec2::zero();
    for c in others {
        let d = me - c;
        let dist = d.norm();
        if dist <= 1e-12 || dist >= cfg.repel_radius {
            continue;
        }
        let mag = cfg.k_repel * (1.0 / dist - 1.0 / cfg.repel_radius);
        f = f + d.scale(mag / dist);
    }
    f
}

/// Force-layout acceleration before clamping to `max_acc`.
pub fn force_unclamped(world: &World, proj: &ProjectedWorld, i: usize, cfg: &ForceConfig) -> Vec2<f64> {
    let l = &world.state.labels[i];
    let s = repulsion_screen(world, proj, i, cfg);
    // screen u follows the camera right vector, screen v the ground-projected view direction
    let right = ground_dir(world.camera.right);
    let away = ground_dir(world.camera.forward);
    let plane = right.scale(s.x) + away.scale(s.y);
    plane.scale(cfg.gain) - l.offset.scale(cfg.k_spring) - l.offset_vel.scale(cfg.damping)
}

pub fn force_controller(world: &World, proj: &ProjectedWorld, i: usize, cfg: &ForceConfig) -> Action {
    let a = force_unclamped(world, proj, i, cfg);
    let max = world.config.max_acc;
    Action::new(a.x.clamp(-max, max), a.y.clamp(-max, max))
}

/// Force actions for every label (zero for inactive ones).
pub fn force_actions(world: &World, cfg: &ForceConfig) -> Vec<Action> {
    let proj = ProjectedWorld::new(world);
    (0..world.state.labels.len())
        .map(|i| {
            if world.state.labels[i].active {
                force_controller(world, &proj, i, cfg)
            } else {
                Action::zero()
            }
        })
        .collect()
}
