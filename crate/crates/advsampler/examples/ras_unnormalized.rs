//! Reference-based adversarial sampling from an unnormalized density.
//!
//! Learns a direct sampler `x = h(eps)` for an 8-mode Gaussian ring given
//! only its (unnormalized) log density — no samples of the target are ever
//! drawn. A diagonal-Gaussian reference is refit to the sampler every
//! iteration, a logistic critic estimates the sampler-vs-reference log ratio,
//! and the evaluable `log[u/p_ref]` remainder completes the objective. The
//! run is shortened and annealed faster than the paper-scale configs in
//! `configs/`; expect a few minutes.
//!
//! ```text
//! cargo run --release --example ras_unnormalized
//! ```

use advsampler::dist::{target_by_id, ReferenceFamily};
use advsampler::gan::CriticObjective;
use advsampler::metrics::EvalContext;
use advsampler::nn::AdamConfig;
use advsampler::ras::{train_ras, EntropyRegularizer, RasConfig};
use advsampler::schedule::BetaSchedule;
use advsampler::seed::{stream_rng, Stream};

fn main() -> advsampler::Result<()> {
    let spec = target_by_id("gmm8")?;
    let iterations = 12_000;
    let cfg = RasConfig {
        objective: CriticObjective::Identity,
        regularizer: EntropyRegularizer::CycleConsistency,
        schedule: BetaSchedule::FixAndDecay { total: iterations, hold: iterations / 5 },
        reference: ReferenceFamily::Gaussian,
        refit_interval: 1,
        f2_clamp: -30.0,
        iterations,
        batch_size: 1024,
        adam: AdamConfig::with_lr(2e-4),
        critic_steps: 1,
        noise_dim: 2,
        generator_layers: vec![2, 128, 128, 2],
        critic_layers: vec![2, 128, 128, 1],
        inverse_layers: vec![2, 128, 128, 2],
        eval_interval: 2000,
    };
    let eval = EvalContext::for_target(&spec, 20_000);

    println!("training a sampler for the 8-mode ring from its density alone...");
    let (trainer, trace) = train_ras(&cfg, spec.target.clone(), &eval, 0)?;
    println!("{:>9} {:>10} {:>7} {:>9} {:>6}", "iter", "sym_kl", "beta", "gen_obj", "modes");
    for row in &trace {
        println!(
            "{:>9} {:>10.4} {:>7.3} {:>9.3} {:>6}",
            row.iteration,
            row.sym_kl,
            row.beta,
            row.generator_loss,
            row.mode_coverage.map(|m| m as usize).unwrap_or(0),
        );
    }

    let samples = trainer.sample(20_000, &mut stream_rng(123, Stream::Eval))?;
    let outcome = eval.evaluate(samples.view())?;
    println!(
        "final: symmetric KL {:.4}, modes hit {}/8, sample fraction near modes {:.3}",
        outcome.sym_kl,
        outcome.modes_hit.unwrap_or(0),
        outcome.high_quality_fraction.unwrap_or(0.0),
    );
    Ok(())
}
