//! Dense multilayer perceptrons with manual reverse-mode gradients.

mod adam;
mod mlp;

pub use adam::{Adam, AdamState};
pub use mlp::{critic_loss, soft_update, Activation, ForwardCache, Gradients, Mlp, MlpSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient; optimizer step skipped")]
    NonFiniteGradient,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}
