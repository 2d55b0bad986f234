//! Camera projection, ray space, screen-space occlusion and leader-line tests.

mod camera;
mod entities;
mod screen;

pub use camera::{build_projection, Camera, CameraSpec, ProjMatrix, RayPoint};
pub use entities::{
    billboard_axes, count_intersections, count_occlusions, label_center, leader_segment,
    project_label, project_object, ProjectedWorld,
};
pub use screen::{occludes, orient, segments_intersect, ScreenRect, Segment2, EPS_OCC};
