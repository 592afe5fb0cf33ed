//! Minimal differentiable numeric core: dense tensors, an op catalog with
//! vector-Jacobian products, reverse-mode accumulation and a
//! finite-difference checker.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, DEFAULT_EPS};
pub use tape::{Attrs, Gradients, OpKind, Tape, Var, LOG_CLAMP};
pub use tensor::{SegmentIndex, Tensor};
