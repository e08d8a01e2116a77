//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every primitive executed during a forward pass
//! (define-by-run) and replays them backwards to accumulate parameter
//! gradients into a [`Gradients`] buffer.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheck, REL_ERROR_FLOOR, ROUNDOFF_ULPS};
pub use params::{glorot_uniform, Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{argmax, log_sum_exp, sigmoid, softmax_slice, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {0:?}: extents must be positive")]
    InvalidShape(Vec<usize>),
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: empty axis")]
    EmptyAxis { op: &'static str },
    #[error("{op}: axis {axis} out of range for a 2-d tensor")]
    InvalidAxis { op: &'static str, axis: usize },
    #[error("{op}: index {index} out of bounds for extent {extent}")]
    OutOfBounds {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}

#[cfg(test)]
mod tests;
