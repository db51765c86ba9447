//! Scalar automatic differentiation, network evaluation, and optimization.

pub mod adam;
pub mod encoding;
pub mod gradcheck;
pub mod init;
pub mod mlp;
pub mod tape;

pub use adam::{adam_step, AdamHyper, OptimState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use mlp::{Activation, MlpSpec, Tensor};
pub use tape::{Gradients, Tape, Var, VarRange, VarVec};
