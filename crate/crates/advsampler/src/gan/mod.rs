//! Sample-based adversarial learning: a logistic critic estimating the
//! log-likelihood ratio, and generator updates under selectable monotone
//! objectives.

mod objective;
mod steps;
mod train;

pub use objective::{apply_g, apply_g_deriv, CriticObjective, W_CLAMP};
pub use steps::{
    gan_generator_step, generator_objective_from_scores, inverse_map_step, logistic_critic_step,
    reconstruction_loss,
};
pub use train::{train_gan, DataSource, GanConfig, GanTrainer};

pub(crate) use train::with_iteration;
