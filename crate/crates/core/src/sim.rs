//! World stepping: objects replay scene tracks, labels move on a square plane
//! above their targets under acceleration control.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::linalg::{Vec2, Vec3};
use crate::trajectory::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Per-axis acceleration bound, m/s^2.
    pub max_acc: f64,
    /// Side length of the label plane.
    pub plane_side: f64,
    /// Height of the label plane above the object top.
    pub plane_height: f64,
    /// Billboard (width, height).
    pub label_size: [f64; 2],
    /// Object half extents (x, y, z); objects stand on the ground.
    pub object_extent: [f64; 3],
    /// Velocity normalization used by the state encoder.
    pub ref_speed: f64,
    /// Gain on ray-space differences (relative positions, leader offsets)
    /// used by the state encoder.
    pub rel_ray_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_acc: 3.0,
            plane_side: 3.0,
            plane_height: 0.5,
            label_size: [1.2, 0.6],
            object_extent: [0.3, 1.0, 0.3],
            ref_speed: 5.0,
            rel_ray_scale: 10.0,
        }
    }
}

impl SimConfig {
    /// Fast-sport profile (maxAcc 3 m/s^2).
    pub fn sport() -> Self {
        Self::default()
    }

    /// Pedestrian profile (maxAcc 2 m/s^2).
    pub fn pedestrian() -> Self {
        Self {
            max_acc: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.dt,
            self.max_acc,
            self.plane_side,
            self.plane_height,
            self.label_size[0],
            self.label_size[1],
            self.object_extent[0],
            self.object_extent[1],
            self.object_extent[2],
            self.ref_speed,
            self.rel_ray_scale,
        ];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("simulation parameters must be positive".into()))
        }
    }

    pub fn object_top(&self) -> f64 {
        2.0 * self.object_extent[1]
    }

    pub fn half_side(&self) -> f64 {
        self.plane_side / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    /// Ground contact point.
    pub pos: Vec3<f64>,
    pub vel: Vec3<f64>,
    /// Unit heading.
    pub normal: Vec3<f64>,
    pub active: bool,
}

impl ObjectState {
    pub fn center(&self, cfg: &SimConfig) -> Vec3<f64> {
        self.pos + Vec3::new(0.0, cfg.object_extent[1], 0.0)
    }

    pub fn top(&self, cfg: &SimConfig) -> Vec3<f64> {
        self.pos + Vec3::new(0.0, cfg.object_top(), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelState {
    /// Index into `WorldState::objects`.
    pub target: usize,
    pub target_id: String,
    /// Local (x, z) position on the plane.
    pub offset: Vec2<f64>,
    pub offset_vel: Vec2<f64>,
    /// Billboard bottom-center, where the leader line attaches.
    pub world_pos: Vec3<f64>,
    pub world_vel: Vec3<f64>,
    /// Unit vector from `world_pos` toward the eye.
    pub normal: Vec3<f64>,
    /// Leader-line endpoint on the target (object top-center).
    pub anchor: Vec3<f64>,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// Requested (a_x, a_z) before clamping.
    pub a: Vec2<f64>,
}

impl Action {
    pub fn new(ax: f64, az: f64) -> Self {
        Self { a: Vec2::new(ax, az) }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Snapshot of the simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub step: usize,
    pub time: f64,
    pub objects: Vec<ObjectState>,
    pub labels: Vec<LabelState>,
}

/// A stepping world: snapshot plus the scene, configuration and camera it runs in.
#[derive(Debug, Clone)]
pub struct World {
    pub state: WorldState,
    pub scene: Arc<Scene>,
    pub config: SimConfig,
    pub camera: Camera<f64>,
}

fn ground(v: Vec2<f64>) -> Vec3<f64> {
    Vec3::new(v.x, 0.0, v.y)
}

fn heading(vel: Vec3<f64>, previous: Vec3<f64>) -> Vec3<f64> {
    Vec3::new(vel.x, 0.0, vel.z).normalized().unwrap_or(previous)
}

/// Plane offset of a label at rest in the "no management" pose.
pub fn default_home(_label: &LabelState) -> Vec2<f64> {
    Vec2::zero()
}

impl World {
    /// Places every labeled object's label at the home offset.
    pub fn new(
        scene: Arc<Scene>,
        config: SimConfig,
        camera: Camera<f64>,
        labeled_ids: &[String],
    ) -> Result<Self> {
        config.validate()?;
        if (scene.dt - config.dt).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "scene dt {} differs from simulation dt {}",
                scene.dt, config.dt
            )));
        }
        let objects: Vec<ObjectState> = scene
            .tracks
            .iter()
            .map(|(id, tr)| {
                let (p, v) = tr.state(0);
                let vel = ground(v);
                ObjectState {
                    id: id.clone(),
                    pos: ground(p),
                    vel,
                    normal: heading(vel, Vec3::new(0.0, 0.0, 1.0)),
                    active: tr.is_active(0),
                }
            })
            .collect();
        let mut labels = Vec::with_capacity(labeled_ids.len());
        for id in labeled_ids {
            let target = objects
                .iter()
                .position(|o| &o.id == id)
                .ok_or_else(|| Error::UnknownEntity(id.clone()))?;
            labels.push(LabelState {
                target,
                target_id: id.clone(),
                offset: Vec2::zero(),
                offset_vel: Vec2::zero(),
                world_pos: Vec3::zero(),
                world_vel: Vec3::zero(),
                normal: Vec3::unit_y(),
                anchor: Vec3::zero(),
                active: false,
            });
        }
        let mut world = Self {
            state: WorldState {
                step: 0,
                time: 0.0,
                objects,
                labels,
            },
            scene,
            config,
            camera,
        };
        world.refresh_labels();
        Ok(world)
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.scene.steps
    }

    pub fn active_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.state
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.active)
            .map(|(i, _)| i)
    }

    /// Recomputes derived label quantities from offsets and object states.
    pub fn refresh_labels(&mut self) {
        let lift = self.config.object_top() + self.config.plane_height;
        let top = self.config.object_top();
        let eye = self.camera.eye;
        let WorldState { objects, labels, .. } = &mut self.state;
        for l in labels.iter_mut() {
            let o = &objects[l.target];
            l.active = o.active;
            if !o.active {
                continue;
            }
            l.world_pos = Vec3::new(o.pos.x + l.offset.x, o.pos.y + lift, o.pos.z + l.offset.y);
            l.world_vel = Vec3::new(o.vel.x + l.offset_vel.x, o.vel.y, o.vel.z + l.offset_vel.y);
            l.anchor = o.pos + Vec3::new(0.0, top, 0.0);
            l.normal = (eye - l.world_pos).normalized().unwrap_or(l.normal);
        }
    }

    /// Sets a label's plane offset directly (clamped to the plane) and refreshes it.
    pub fn place_label(&mut self, i: usize, offset: Vec2<f64>) {
        let h = self.config.half_side();
        self.state.labels[i].offset = Vec2::new(offset.x.clamp(-h, h), offset.y.clamp(-h, h));
        self.refresh_labels();
    }

    /// Advances one decision interval with semi-implicit Euler on label offsets.
    ///
    /// `actions[i]` drives label `i`; entries for inactive labels are ignored.
    pub fn step(&mut self, actions: &[Action]) -> Result<()> {
        if self.is_finished() {
            return Err(Error::EpisodeFinished(self.state.step));
        }
        if actions.len() < self.state.labels.len() {
            return Err(Error::MissingAction(actions.len()));
        }
        let dt = self.config.dt;
        let max = self.config.max_acc;
        let h = self.config.half_side();
        for (i, (l, act)) in self.state.labels.iter_mut().zip(actions).enumerate() {
            if !l.active {
                continue;
            }
            if !act.a.is_finite() {
                return Err(Error::InvalidAction(i));
            }
            let a = Vec2::new(act.a.x.clamp(-max, max), act.a.y.clamp(-max, max));
            let mut vel = l.offset_vel + a * dt;
            let mut off = l.offset + vel * dt;
            if off.x.abs() >= h {
                off.x = h.copysign(off.x);
                vel.x = 0.0;
            }
            if off.y.abs() >= h {
                off.y = h.copysign(off.y);
                vel.y = 0.0;
            }
            l.offset = off;
            l.offset_vel = vel;
        }

        let next = self.state.step + 1;
        for (o, tr) in self.state.objects.iter_mut().zip(self.scene.tracks.values()) {
            o.active = tr.is_active(next);
            if o.active {
                let (p, v) = tr.state(next);
                o.pos = ground(p);
                o.vel = ground(v);
                o.normal = heading(o.vel, o.normal);
            }
        }
        self.state.step = next;
        self.state.time = next as f64 * dt;
        self.refresh_labels();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::CameraSpec;
    use crate::trajectory::{synth_generate, SceneTrack, SynthKind, SynthParams};

    fn static_scene(points: &[(f64, f64)], steps: usize) -> Arc<Scene> {
        let tracks = points
            .iter()
            .enumerate()
            .map(|(i, &(x, z))| {
                (
                    format!("o{i}"),
                    SceneTrack {
                        entry_step: 0,
                        exit_step: steps,
                        positions: vec![Vec2::new(x, z); steps + 1],
                        velocities: vec![Vec2::zero(); steps + 1],
                    },
                )
            })
            .collect::<BTreeMap<_, _>>();
        Arc::new(Scene {
            scene_id: "static".into(),
            t0: 0.0,
            duration: steps as f64 * 0.1,
            dt: 0.1,
            steps,
            tracks,
        })
    }

    fn world(scene: Arc<Scene>, cfg: SimConfig) -> World {
        let ids: Vec<String> = scene.tracks.keys().cloned().collect();
        World::new(scene, cfg, Camera::new(&CameraSpec::default()).unwrap(), &ids).unwrap()
    }

    #[test]
    fn init_places_label_above_object() {
        let w = world(static_scene(&[(0.0, 0.0)], 10), SimConfig::default());
        let l = &w.state.labels[0];
        assert_eq!(l.world_pos, Vec3::new(0.0, 2.5, 0.0));
        assert_eq!(l.offset, Vec2::zero());
        let to_eye = (w.camera.eye - l.world_pos).normalized().unwrap();
        assert!((l.normal.dot(to_eye) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_unknown_id() {
        let scene = static_scene(&[(0.0, 0.0)], 10);
        let cam = Camera::new(&CameraSpec::default()).unwrap();
        let err = World::new(scene, SimConfig::default(), cam, &["zz".to_string()]).unwrap_err();
        assert!(matches!(err, Error::UnknownEntity(_)));
    }

    #[test]
    fn init_labels_all_objects() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        let w = world(static_scene(&pts, 10), SimConfig::default());
        assert_eq!(w.state.labels.len(), 10);
        assert_eq!(w.state.step, 0);
    }

    #[test]
    fn semi_implicit_euler_step() {
        let mut w = world(static_scene(&[(0.0, 0.0)], 10), SimConfig::default());
        w.step(&[Action::new(1.0, 0.0)]).unwrap();
        let l = &w.state.labels[0];
        assert!((l.offset_vel.x - 0.1).abs() < 1e-15);
        assert!((l.offset.x - 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_action_on_static_object() {
        let mut w = world(static_scene(&[(1.0, 2.0)], 10), SimConfig::default());
        let before = w.state.labels[0].world_pos;
        for _ in 0..10 {
            w.step(&[Action::zero()]).unwrap();
        }
        assert_eq!(w.state.labels[0].world_pos, before);
        assert!(matches!(w.step(&[Action::zero()]), Err(Error::EpisodeFinished(10))));
    }

    #[test]
    fn wall_clamp_zeroes_velocity() {
        let mut w = world(static_scene(&[(0.0, 0.0)], 10), SimConfig::default());
        let h = w.config.half_side();
        w.state.labels[0].offset = Vec2::new(h, 0.0);
        w.state.labels[0].offset_vel = Vec2::new(0.5, 0.0);
        w.step(&[Action::new(3.0, 0.0)]).unwrap();
        assert_eq!(w.state.labels[0].offset.x, h);
        assert_eq!(w.state.labels[0].offset_vel.x, 0.0);
    }

    #[test]
    fn missing_and_bad_actions() {
        let mut w = world(static_scene(&[(0.0, 0.0), (3.0, 0.0)], 10), SimConfig::default());
        assert!(matches!(w.step(&[Action::zero()]), Err(Error::MissingAction(_))));
        assert!(matches!(
            w.step(&[Action::zero(), Action::new(f64::NAN, 0.0)]),
            Err(Error::InvalidAction(1))
        ));
    }

    #[test]
    fn rigid_follow_with_zero_actions() {
        let scene = Arc::new(synth_generate(SynthKind::RandomWalk, &SynthParams { count: 3, ..Default::default() }, 5).unwrap());
        let mut w = world(scene, SimConfig::default());
        let zeros = vec![Action::zero(); w.state.labels.len()];
        while !w.is_finished() {
            let before = w.state.clone();
            w.step(&zeros).unwrap();
            for l in &w.state.labels {
                let lb = &before.labels[l.target];
                let dl = l.world_pos - lb.world_pos;
                let dobj = w.state.objects[l.target].pos - before.objects[l.target].pos;
                assert_eq!(dl, dobj);
                assert_eq!(l.offset, default_home(l));
            }
        }
    }

    #[test]
    fn entry_and_exit_toggle_activity() {
        let mut scene = (*static_scene(&[(0.0, 0.0), (4.0, 0.0)], 10)).clone();
        let tr = scene.tracks.get_mut("o1").unwrap();
        tr.entry_step = 3;
        tr.exit_step = 6;
        tr.positions.truncate(4);
        tr.velocities.truncate(4);
        let mut w = world(Arc::new(scene), SimConfig::default());
        let mut seen = Vec::new();
        while !w.is_finished() {
            seen.push(w.state.labels[1].active);
            w.step(&[Action::zero(), Action::zero()]).unwrap();
        }
        assert_eq!(&seen[..8], &[false, false, false, true, true, true, true, false]);
    }
}
