//! Adversarial soft Q-learning on a toy 2D point-mass environment.
//!
//! The optimal maximum-entropy policy is proportional to `exp(Q(s,a)/alpha)`,
//! a state-conditional unnormalized density over bounded actions; the policy
//! network is trained to sample from it with the Beta-reference adversarial
//! update.

mod agent;
mod env;
mod replay;
mod train;

pub use agent::{ras_policy_update, PolicyUpdate, SqlAgent, SqlConfig};
pub use env::{Environment, PointMassEnv};
pub use replay::{Minibatch, ReplayBuffer, Transition};
pub use train::{
    evaluate_policy, random_policy_returns, run_sql, ReturnRow, SqlRunStats, SqlTrainConfig,
};
