//! Fixed viewpoint: look-at view, perspective projection and ray space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat4, Vec3};
use crate::scalar::Real;

/// Viewpoint description as found in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in degrees.
    pub vertical_fov: f64,
    pub aspect: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraSpec {
    /// Elevated sideline view: 6 m high, 14 m back from the arena center.
    fn default() -> Self {
        Self {
            eye: [0.0, 6.0, -14.0],
            target: [0.0, 1.0, 0.0],
            up: [0.0, 1.0, 0.0],
            vertical_fov: 60.0,
            aspect: 16.0 / 9.0,
            near: 0.1,
            far: 100.0,
        }
    }
}

/// A point in ray space: normalized screen position plus distance from the eye.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint<T> {
    pub u: T,
    pub v: T,
    pub z_cam: T,
}

/// Combined view-projection matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjMatrix<T> {
    pub m: Mat4<T>,
}

/// A camera ready for projection queries.
#[derive(Debug, Clone)]
pub struct Camera<T> {
    pub eye: Vec3<T>,
    /// Unit viewing direction.
    pub forward: Vec3<T>,
    /// World direction of increasing screen `u`.
    pub right: Vec3<T>,
    /// World direction of increasing screen `v`.
    pub up: Vec3<T>,
    pub near: T,
    pub far: T,
    pub tan_half_fov: T,
    pub aspect: T,
    pub proj: ProjMatrix<T>,
}

fn vec3<T: Real>(a: [f64; 3]) -> Vec3<T> {
    Vec3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]))
}

impl<T: Real> Camera<T> {
    pub fn new(spec: &CameraSpec) -> Result<Self> {
        if !(spec.near > 0.0) || !(spec.far > spec.near) {
            return Err(Error::DegenerateCamera("need 0 < near < far"));
        }
        if !(spec.vertical_fov > 0.0 && spec.vertical_fov < 180.0) || !(spec.aspect > 0.0) {
            return Err(Error::DegenerateCamera("field of view or aspect out of range"));
        }
        let eye = vec3::<T>(spec.eye);
        let forward = (vec3::<T>(spec.target) - eye)
            .normalized()
            .ok_or(Error::DegenerateCamera("eye coincides with target"))?;
        let right = forward
            .cross(vec3::<T>(spec.up))
            .normalized()
            .ok_or(Error::DegenerateCamera("up is parallel to the view direction"))?;
        let up = right.cross(forward);
        let near = T::lit(spec.near);
        let far = T::lit(spec.far);
        let tan_half_fov = (T::lit(spec.vertical_fov).to_radians() / T::lit(2.0)).tan();
        let aspect = T::lit(spec.aspect);
        let proj = build_projection_parts(eye, forward, right, up, tan_half_fov, aspect, near, far);
        Ok(Self {
            eye,
            forward,
            right,
            up,
            near,
            far,
            tan_half_fov,
            aspect,
            proj,
        })
    }

    /// View-space depth along the optical axis.
    pub fn view_depth(&self, p: Vec3<T>) -> T {
        (p - self.eye).dot(self.forward)
    }

    /// Maps a world point to ray space. Points at or behind the near plane are
    /// reported as [`Error::BehindCamera`].
    pub fn to_ray_space(&self, p: Vec3<T>) -> Result<RayPoint<T>> {
        let d = p - self.eye;
        let depth = d.dot(self.forward);
        if !(depth >= self.near) {
            return Err(Error::BehindCamera);
        }
        let half = T::lit(0.5);
        let x_ndc = d.dot(self.right) / (depth * self.tan_half_fov * self.aspect);
        let y_ndc = d.dot(self.up) / (depth * self.tan_half_fov);
        Ok(RayPoint {
            u: (x_ndc + T::one()) * half,
            v: (y_ndc + T::one()) * half,
            z_cam: d.norm(),
        })
    }

    /// Screen position through the homogeneous projection matrix.
    pub fn project_uv(&self, p: Vec3<T>) -> Result<(T, T)> {
        let c = self.proj.m.transform_point(p);
        if !(c[3] >= self.near) {
            return Err(Error::BehindCamera);
        }
        let half = T::lit(0.5);
        Ok(((c[0] / c[3] + T::one()) * half, (c[1] / c[3] + T::one()) * half))
    }
}

/// Right-handed look-at view composed with an OpenGL-style perspective matrix.
pub fn build_projection<T: Real>(spec: &CameraSpec) -> Result<ProjMatrix<T>> {
    Camera::<T>::new(spec).map(|c| c.proj)
}

#[allow(clippy::too_many_arguments)]
fn build_projection_parts<T: Real>(
    eye: Vec3<T>,
    f: Vec3<T>,
    s: Vec3<T>,
    u: Vec3<T>,
    tan_half_fov: T,
    aspect: T,
    near: T,
    far: T,
) -> ProjMatrix<T> {
    let z = T::zero();
    let o = T::one();
    let view = Mat4 {
        m: [
            [s.x, s.y, s.z, -s.dot(eye)],
            [u.x, u.y, u.z, -u.dot(eye)],
            [-f.x, -f.y, -f.z, f.dot(eye)],
            [z, z, z, o],
        ],
    };
    let two = T::lit(2.0);
    let persp = Mat4 {
        m: [
            [o / (aspect * tan_half_fov), z, z, z],
            [z, o / tan_half_fov, z, z],
            [z, z, (far + near) / (near - far), two * far * near / (near - far)],
            [z, z, -o, z],
        ],
    };
    ProjMatrix {
        m: persp.mul_mat(&view),
    }
}
