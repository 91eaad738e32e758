//! The soft-Q training loop: collect one transition per step, then one
//! Q update and one adversarial policy update on a replay minibatch.

use ndarray::Array1;
use rand::Rng;

use super::agent::{SqlAgent, SqlConfig};
use super::env::Environment;
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::schedule::BetaSchedule;
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone)]
pub struct SqlTrainConfig {
    pub agent: SqlConfig,
    pub total_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Updates start once the buffer holds this many transitions.
    pub warmup: usize,
    /// Environment steps between target-network syncs (one epoch).
    pub sync_interval: u64,
    /// Environment steps between evaluation rollouts.
    pub eval_interval: u64,
    pub eval_rollouts: usize,
    pub schedule: BetaSchedule,
}

impl SqlTrainConfig {
    pub fn defaults_for(agent: SqlConfig, total_steps: u64) -> Self {
        Self {
            agent,
            total_steps,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            warmup: 128,
            sync_interval: 1000,
            eval_interval: 1000,
            eval_rollouts: 1,
            schedule: BetaSchedule::FixAndDecay { total: total_steps, hold: total_steps / 5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.schedule.validate()?;
        if self.batch_size == 0 || self.eval_rollouts == 0 {
            return Err(Error::Config("batch_size and eval_rollouts must be positive".into()));
        }
        if self.sync_interval == 0 || self.eval_interval == 0 {
            return Err(Error::Config("sync_interval and eval_interval must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the return trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnRow {
    pub env_step: u64,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
}

/// Training-wide monitoring aggregates.
#[derive(Debug, Clone, Copy)]
pub struct SqlRunStats {
    /// Smallest per-dimension policy-action variance seen in any update batch.
    pub min_action_variance: f64,
    /// Largest |action| the policy ever emitted during updates.
    pub max_abs_action: f64,
    pub final_q_loss: f64,
}

/// Full rollout return of the (stochastic) policy from a fresh episode.
fn rollout<E: Environment, R: Rng + ?Sized>(
    agent: &SqlAgent,
    env: &mut E,
    rng: &mut R,
) -> Result<f64> {
    let mut state = env.reset(rng);
    let mut total = 0.0;
    loop {
        let action = agent.act(state.view(), rng)?;
        let (next, reward, done) = env.step(action.view())?;
        total += reward;
        state = next;
        if done {
            return Ok(total);
        }
    }
}

/// Mean and standard deviation of `episodes` evaluation rollouts against a
/// frozen policy.
pub fn evaluate_policy<E: Environment, R: Rng + ?Sized>(
    agent: &SqlAgent,
    env: &mut E,
    episodes: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        returns.push(rollout(agent, env, rng)?);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok((mean, var.sqrt()))
}

/// Returns of a uniform-random policy; the baseline oracle for the learning
/// signal check.
pub fn random_policy_returns<E: Environment, R: Rng + ?Sized>(
    env: &mut E,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let da = env.action_dim();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut total = 0.0;
        env.reset(rng);
        loop {
            let action = Array1::from_shape_fn(da, |_| rng.random_range(-1.0..1.0));
            let (_, reward, done) = env.step(action.view())?;
            total += reward;
            if done {
                break;
            }
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Runs soft Q-learning for `total_steps` environment steps. Per step: act
/// with the stochastic policy, store the transition, then one Q update and
/// one policy update on a sampled minibatch (after warmup). Target networks
/// sync every `sync_interval` steps; one evaluation happens every
/// `eval_interval` steps against a separate environment instance.
pub fn run_sql<E: Environment + Clone>(
    cfg: &SqlTrainConfig,
    mut env: E,
    master_seed: u64,
) -> Result<(SqlAgent, Vec<ReturnRow>, SqlRunStats)> {
    cfg.validate()?;
    let mut agent = SqlAgent::new(cfg.agent.clone(), master_seed)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut eval_env = env.clone();

    let mut env_rng = stream_rng(master_seed, Stream::Env);
    let mut noise_rng = stream_rng(master_seed, Stream::Noise);
    let mut data_rng = stream_rng(master_seed, Stream::Data);
    let mut eval_rng = stream_rng(master_seed, Stream::Eval);

    let mut trace = Vec::new();
    let mut stats = SqlRunStats {
        min_action_variance: f64::INFINITY,
        max_abs_action: 0.0,
        final_q_loss: f64::NAN,
    };

    let mut state = env.reset(&mut env_rng);
    for step in 1..=cfg.total_steps {
        let action = agent.act(state.view(), &mut noise_rng)?;
        let (next_state, reward, done) = env
            .step(action.view())
            .map_err(|e| Error::Numeric(format!("env step {step}: {e}")))?;
        buffer.push(Transition {
            state: state.clone(),
            action,
            reward,
            next_state: next_state.clone(),
            done,
        });
        state = if done { env.reset(&mut env_rng) } else { next_state };

        if buffer.len() >= cfg.warmup.max(cfg.batch_size) {
            let batch = buffer.sample(cfg.batch_size, &mut data_rng)?;
            let q_loss = agent
                .q_update(&batch, &mut noise_rng)
                .map_err(|e| Error::Numeric(format!("q update at step {step}: {e}")))?;
            let beta = cfg.schedule.value(step);
            let update = agent
                .policy_update(batch.states.view(), beta, &mut noise_rng)
                .map_err(|e| Error::Numeric(format!("policy update at step {step}: {e}")))?;
            stats.min_action_variance = stats.min_action_variance.min(update.min_action_variance);
            stats.max_abs_action = stats.max_abs_action.max(update.max_abs_action);
            stats.final_q_loss = q_loss;
        }

        if step % cfg.sync_interval == 0 {
            agent.sync_targets();
        }
        if step % cfg.eval_interval == 0 {
            let (mean, std) = evaluate_policy(&agent, &mut eval_env, cfg.eval_rollouts, &mut eval_rng)?;
            trace.push(ReturnRow { env_step: step, eval_return_mean: mean, eval_return_std: std });
        }
    }
    Ok((agent, trace, stats))
}
