//! Adversarial training of direct neural samplers.
//!
//! This crate learns samplers of the form `x = h(eps)` with `eps` drawn from a
//! fixed base noise, in two settings:
//!
//! - **from an unnormalized density** `u(x)` (no samples available), via
//!   reference-based adversarial sampling: a closed-form reference
//!   distribution is fit to the current sampler, a logistic critic estimates
//!   the sampler-vs-reference log ratio, and the evaluable `log[u/p_ref]`
//!   remainder completes the objective;
//! - **from samples**, as an ordinary GAN whose critic estimates a
//!   log-likelihood ratio, with selectable monotone generator objectives.
//!
//! Both settings support entropy regularization (a cross-entropy surrogate
//! and a cycle-consistency lower bound through an inverse map), with a
//! fix-and-decay annealing schedule. SVGD and amortized SVGD are included as
//! particle-based baselines, and the reference-based policy update powers an
//! adversarial soft Q-learning agent on a toy point-mass environment.
//!
//! See the crate `examples/` directory for one runnable program per
//! capability, and the `advsampler` binary for config-driven experiment runs.

pub mod dist;
pub mod error;
pub mod exp;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod ras;
pub mod schedule;
pub mod seed;
pub mod sql;
pub mod svgd;
pub(crate) mod util;

pub use error::{Error, Result};
