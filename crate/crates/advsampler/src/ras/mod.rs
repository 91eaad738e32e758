//! Reference-based adversarial sampling from an unnormalized density.
//!
//! The intractable ratio `log[u/q]` splits as `log[p_ref/q] + log[u/p_ref]`:
//! the first half is learned by a logistic critic (reference samples as the
//! "real" class), the second is evaluated in closed form. The generator
//! ascends their sum, optionally with an entropy regularizer weighted by an
//! annealing schedule.

mod entropy;
mod train;

pub use entropy::{entropy_bound_identity, entropy_bound_mc, EntropyBound};
pub use train::{train_ras, RasConfig, RasTrainer};

use serde::{Deserialize, Serialize};

/// The two entropy surrogates. The cross-entropy form needs an evaluable
/// `log u` and anneals the effective target to `u^(1-beta)`; the
/// cycle-consistency form lower-bounds the entropy through an inverse map and
/// works in both learning settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyRegularizer {
    None,
    CrossEntropy,
    CycleConsistency,
}

impl EntropyRegularizer {
    pub fn needs_inverse_map(self) -> bool {
        matches!(self, EntropyRegularizer::CycleConsistency)
    }
}
