//! Minimal differentiable MLP stack: dense ReLU networks, reverse-mode
//! gradients with respect to parameters and inputs, Adam, and checkpoint I/O.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load, save};
pub use mlp::{ForwardTrace, Gradient, MlpNetwork, OutputActivation};
