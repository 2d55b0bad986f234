//! View management for labels attached to moving objects.
//!
//! Objects replay recorded or synthetic trajectories; each carries a
//! billboard label that moves on a square plane above it. A shared
//! attention actor-critic steers every label from its own ray-space
//! observation and is trained with PPO under a curriculum on the number of
//! labels. [`baselines`] provides the pinned and force-layout comparison
//! controllers and [`harness`] the commands behind the `labelrl` binary.
//!
//! ```
//! use labelrl_core::trajectory::{synth_generate, SynthKind, SynthParams};
//! use labelrl_core::harness::{cmd_eval, RunConfig};
//! use labelrl_core::episode::ControllerKind;
//!
//! let scenes = vec![synth_generate(SynthKind::CrossingPair, &SynthParams::default(), 3).unwrap()];
//! let report = cmd_eval(&RunConfig::default(), &[ControllerKind::None], None, &scenes, None).unwrap();
//! assert_eq!(report.table.get(ControllerKind::None).unwrap().dist, 0.0);
//! ```

pub mod baselines;
pub mod encoder;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod reward;
pub mod scalar;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

/// Training-precision policy.
pub type Policy = policy::ActorCritic<f32>;
/// Double-precision policy used for gradient checks.
pub type Policy64 = policy::ActorCritic<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Vec2d = linalg::Vec2<f64>;
pub type Vec3d = linalg::Vec3<f64>;
pub type Camera64 = geometry::Camera<f64>;
