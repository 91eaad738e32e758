//! Adversarial soft Q-learning on the 2D point-mass environment.
//!
//! The maximum-entropy target policy is proportional to `exp(Q(s,a)/alpha)`
//! over bounded actions, so the policy network is trained as a sampler for a
//! state-conditional unnormalized density using the Beta-reference update.
//! Short run (a few thousand environment steps, several minutes); the
//! paper-scale config is `configs/sql_pointmass.json`.
//!
//! ```text
//! cargo run --release --example soft_q_pointmass
//! ```

use advsampler::schedule::BetaSchedule;
use advsampler::seed::{stream_rng, Stream};
use advsampler::sql::{random_policy_returns, run_sql, PointMassEnv, SqlConfig, SqlTrainConfig};

fn main() -> advsampler::Result<()> {
    let total_steps = 6000;
    let mut cfg = SqlTrainConfig::defaults_for(SqlConfig::for_dims(2, 2), total_steps);
    cfg.eval_interval = 500;
    cfg.schedule = BetaSchedule::FixAndDecay { total: total_steps, hold: total_steps / 5 };

    let mut env = PointMassEnv::default();
    let baseline = random_policy_returns(&mut env, 256, &mut stream_rng(0, Stream::Eval))?;
    let baseline_mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
    println!("uniform-random policy baseline over 256 episodes: {baseline_mean:.1}");

    println!("training for {total_steps} environment steps...");
    let (_, trace, stats) = run_sql(&cfg, PointMassEnv::default(), 0)?;
    println!("{:>9} {:>14}", "env_step", "eval_return");
    for row in &trace {
        println!("{:>9} {:>14.1}", row.env_step, row.eval_return_mean);
    }
    let last = trace.last().expect("trace is non-empty");
    println!(
        "final return {:.1} vs random {:.1}; max |action| {:.4}, min action variance {:.2e}",
        last.eval_return_mean, baseline_mean, stats.max_abs_action, stats.min_action_variance
    );
    Ok(())
}
