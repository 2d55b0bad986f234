//! Small reverse-mode network kernel: batched dense layers, attention pooling,
//! a diagonal Gaussian head, Adam and checkpoints.

pub mod attention;
pub mod checkpoint;
pub mod dense;
pub mod gaussian;
pub mod gradcheck;
pub mod optim;
pub mod param;
pub mod tensor;

pub use attention::{AttentionPool, PoolTrace};
pub use dense::{Activation, DenseLayer};
pub use gaussian::{DiagGaussian, LOG_STD_MAX, LOG_STD_MIN};
pub use gradcheck::GradCheckReport;
pub use optim::{clip_global_norm, Adam, LinearDecay};
pub use param::{Param, ParamId, ParamStore};
pub use tensor::Tensor;
