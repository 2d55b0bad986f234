//! Screen footprints of simulated entities and the per-label counts derived
//! from them.

use crate::error::{Error, Result};
use crate::linalg::{Vec2, Vec3};
use crate::sim::{LabelState, ObjectState, SimConfig, World};

use super::camera::Camera;
use super::screen::{occludes, segments_intersect, ScreenRect, Segment2, EPS_OCC};

/// In-plane billboard axes `(right, up)` for a label facing along `normal`.
pub fn billboard_axes(normal: Vec3<f64>, cam: &Camera<f64>) -> (Vec3<f64>, Vec3<f64>) {
    let right = Vec3::unit_y().cross(normal).normalized().unwrap_or(cam.right);
    (right, normal.cross(right))
}

fn uv(cam: &Camera<f64>, p: Vec3<f64>) -> Result<(f64, f64)> {
    cam.to_ray_space(p).map(|r| (r.u, r.v))
}

/// Center of the billboard (its reference point is the bottom-center).
pub fn label_center(label: &LabelState, cfg: &SimConfig, cam: &Camera<f64>) -> Vec3<f64> {
    let (_, up) = billboard_axes(label.normal, cam);
    label.world_pos + up * (cfg.label_size[1] / 2.0)
}

/// Bounding rectangle of the four projected billboard corners.
pub fn project_label(label: &LabelState, cfg: &SimConfig, cam: &Camera<f64>) -> Result<ScreenRect<f64>> {
    let (right, up) = billboard_axes(label.normal, cam);
    let [w, h] = cfg.label_size;
    let base = label.world_pos;
    let half_w = right * (w / 2.0);
    let top = up * h;
    let corners = [base - half_w, base + half_w, base - half_w + top, base + half_w + top];
    let pts = corners.map(|c| uv(cam, c));
    let pts: Vec<(f64, f64)> = pts.into_iter().collect::<Result<_>>()?;
    let depth = cam.to_ray_space(label_center(label, cfg, cam))?.z_cam;
    ScreenRect::bounding(pts, depth).ok_or(Error::BehindCamera)
}

/// Bounding rectangle of the eight projected box corners.
pub fn project_object(obj: &ObjectState, cfg: &SimConfig, cam: &Camera<f64>) -> Result<ScreenRect<f64>> {
    let c = obj.center(cfg);
    let [ex, ey, ez] = cfg.object_extent;
    let mut pts = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                pts.push(uv(cam, c + Vec3::new(sx * ex, sy * ey, sz * ez))?);
            }
        }
    }
    let depth = cam.to_ray_space(c)?.z_cam;
    ScreenRect::bounding(pts, depth).ok_or(Error::BehindCamera)
}

/// Leader line from the billboard bottom-center to the target's top-center.
pub fn leader_segment(label: &LabelState, cam: &Camera<f64>) -> Result<Segment2<f64>> {
    let (a0, a1) = uv(cam, label.world_pos)?;
    let (b0, b1) = uv(cam, label.anchor)?;
    Ok(Segment2::new(Vec2::new(a0, a1), Vec2::new(b0, b1)))
}

/// All screen footprints of one world snapshot. `None` marks inactive or
/// unprojectable entities, which take no part in any count.
#[derive(Debug, Clone)]
pub struct ProjectedWorld {
    pub objects: Vec<Option<ScreenRect<f64>>>,
    pub labels: Vec<Option<ScreenRect<f64>>>,
    pub leaders: Vec<Option<Segment2<f64>>>,
    pub eps_occ: f64,
}

impl ProjectedWorld {
    pub fn new(world: &World) -> Self {
        let cfg = &world.config;
        let cam = &world.camera;
        let warn = |what: &str, i: usize| {
            log::warn!("{what} {i} not projectable at step {}; excluded", world.state.step);
        };
        let objects = world
            .state
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                if !o.active {
                    return None;
                }
                project_object(o, cfg, cam).map_err(|_| warn("object", i)).ok()
            })
            .collect();
        let labels = world
            .state
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if !l.active {
                    return None;
                }
                project_label(l, cfg, cam).map_err(|_| warn("label", i)).ok()
            })
            .collect();
        let leaders = world
            .state
            .labels
            .iter()
            .map(|l| l.active.then(|| leader_segment(l, cam).ok()).flatten())
            .collect();
        Self {
            objects,
            labels,
            leaders,
            eps_occ: EPS_OCC,
        }
    }

    /// Entities (objects, including label `i`'s own target, and other labels)
    /// occluded by label `i`.
    pub fn occlusions(&self, i: usize) -> usize {
        let Some(me) = self.labels[i].as_ref() else {
            return 0;
        };
        let objs = self
            .objects
            .iter()
            .flatten()
            .filter(|r| occludes(me, r, self.eps_occ))
            .count();
        let labels = self
            .labels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .filter_map(|(_, r)| r.as_ref())
            .filter(|r| occludes(me, r, self.eps_occ))
            .count();
        objs + labels
    }

    /// Other leader lines properly crossed by label `i`'s leader line.
    pub fn intersections(&self, i: usize) -> usize {
        let Some(me) = self.leaders[i].as_ref() else {
            return 0;
        };
        self.leaders
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .filter_map(|(_, s)| s.as_ref())
            .filter(|s| segments_intersect(me, s))
            .count()
    }
}

pub fn count_occlusions(world: &World, i: usize) -> usize {
    ProjectedWorld::new(world).occlusions(i)
}

pub fn count_intersections(world: &World, i: usize) -> usize {
    ProjectedWorld::new(world).intersections(i)
}
