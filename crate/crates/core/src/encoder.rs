//! Per-label observations in ray space.
//!
//! Self feature (22): label position in ray space, label velocity, label
//! normal, leader offset (anchor minus label, ray space), then the target
//! object's ray position relative to the label, its velocity relative to the
//! label, its heading and a constant 1.
//!
//! Neighbor feature (13): relative ray position, relative velocity, normal,
//! leader offset relative to label `i` (labels only, zero for objects) and a
//! kind flag (1 object, 0 label).
//!
//! Ray-space differences are multiplied by `SimConfig::rel_ray_scale`: nearby
//! entities differ by a few hundredths of the screen, too little for the
//! network to resolve at unit scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::linalg::Vec3;
use crate::sim::World;

pub const SELF_DIM: usize = 22;
pub const NEIGHBOR_DIM: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborKind {
    Object,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedObservation {
    pub self_feat: [f64; SELF_DIM],
    pub neighbors: Vec<[f64; NEIGHBOR_DIM]>,
}

/// Scaled ray-space position: (u, v, z_cam / far).
fn ray(cam: &Camera<f64>, p: Vec3<f64>) -> Result<Vec3<f64>> {
    let r = cam.to_ray_space(p)?;
    Ok(Vec3::new(r.u, r.v, r.z_cam / cam.far))
}

fn put(dst: &mut [f64], at: usize, v: Vec3<f64>) {
    dst[at..at + 3].copy_from_slice(&v.to_array());
}

pub fn encode_self(world: &World, i: usize) -> Result<[f64; SELF_DIM]> {
    let cam = &world.camera;
    let l = &world.state.labels[i];
    let o = &world.state.objects[l.target];
    if !l.active {
        return Err(Error::ObservationInvalid(i));
    }
    let inv_v = 1.0 / world.config.ref_speed;
    let invalid = |_| Error::ObservationInvalid(i);
    let p_l = ray(cam, l.world_pos).map_err(invalid)?;
    let p_anchor = ray(cam, l.anchor).map_err(invalid)?;
    let p_o = ray(cam, o.pos).map_err(invalid)?;
    let k = world.config.rel_ray_scale;
    let mut f = [0.0; SELF_DIM];
    put(&mut f, 0, p_l);
    put(&mut f, 3, l.world_vel * inv_v);
    put(&mut f, 6, l.normal);
    put(&mut f, 9, (p_anchor - p_l) * k);
    put(&mut f, 12, (p_o - p_l) * k);
    put(&mut f, 15, (o.vel - l.world_vel) * inv_v);
    put(&mut f, 18, o.normal);
    f[21] = 1.0;
    Ok(f)
}

/// Feature of neighbor `j` (an object index or a label index, per `kind`)
/// relative to label `i`.
pub fn encode_neighbor(world: &World, i: usize, j: usize, kind: NeighborKind) -> Result<[f64; NEIGHBOR_DIM]> {
    let cam = &world.camera;
    let me = &world.state.labels[i];
    let inv_v = 1.0 / world.config.ref_speed;
    let invalid = |_| Error::ObservationInvalid(i);
    let p_l = ray(cam, me.world_pos).map_err(invalid)?;
    let k = world.config.rel_ray_scale;
    let mut f = [0.0; NEIGHBOR_DIM];
    match kind {
        NeighborKind::Object => {
            let o = &world.state.objects[j];
            if !o.active || j == me.target {
                return Err(Error::InvalidParameter(format!("object {j} is not a neighbor of label {i}")));
            }
            put(&mut f, 0, (ray(cam, o.pos).map_err(invalid)? - p_l) * k);
            put(&mut f, 3, (o.vel - me.world_vel) * inv_v);
            put(&mut f, 6, o.normal);
            f[12] = 1.0;
        }
        NeighborKind::Label => {
            let l = &world.state.labels[j];
            if !l.active || j == i {
                return Err(Error::InvalidParameter(format!("label {j} is not a neighbor of label {i}")));
            }
            put(&mut f, 0, (ray(cam, l.world_pos).map_err(invalid)? - p_l) * k);
            put(&mut f, 3, (l.world_vel - me.world_vel) * inv_v);
            put(&mut f, 6, l.normal);
            put(&mut f, 9, (ray(cam, l.anchor).map_err(invalid)? - p_l) * k);
        }
    }
    Ok(f)
}

/// Self feature plus every active neighbor: other objects first, then other labels.
pub fn encode_observation(world: &World, i: usize) -> Result<EncodedObservation> {
    let self_feat = encode_self(world, i)?;
    let target = world.state.labels[i].target;
    let mut neighbors = Vec::new();
    for (j, o) in world.state.objects.iter().enumerate() {
        if o.active && j != target {
            neighbors.push(encode_neighbor(world, i, j, NeighborKind::Object)?);
        }
    }
    for (j, l) in world.state.labels.iter().enumerate() {
        if l.active && j != i {
            neighbors.push(encode_neighbor(world, i, j, NeighborKind::Label)?);
        }
    }
    Ok(EncodedObservation { self_feat, neighbors })
}
