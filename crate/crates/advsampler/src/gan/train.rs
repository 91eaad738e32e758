//! Sample-based adversarial training loop.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::objective::CriticObjective;
use super::steps::{gan_generator_step, inverse_map_step, logistic_critic_step};
use crate::dist::{GaussianMixture, GaussianNoise};
use crate::error::{Error, Result};
use crate::metrics::{EvalContext, MetricRow};
use crate::nn::{AdamConfig, AdamState, MlpNetwork, OutputActivation};
use crate::schedule::BetaSchedule;
use crate::seed::{stream_rng, Stream};

/// Where real samples come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Fresh draws from the mixture every minibatch (unlimited data).
    Mixture(GaussianMixture),
    /// A fixed dataset; minibatches are drawn uniformly with replacement.
    Dataset(Array2<f64>),
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Mixture(m) => m.dim(),
            DataSource::Dataset(d) => d.ncols(),
        }
    }

    pub fn batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        match self {
            DataSource::Mixture(m) => m.sample(n, rng),
            DataSource::Dataset(d) => {
                let mut out = Array2::zeros((n, d.ncols()));
                for mut row in out.axis_iter_mut(Axis(0)) {
                    let i = rng.random_range(0..d.nrows());
                    row.assign(&d.row(i));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GanConfig {
    pub objective: CriticObjective,
    /// `Some(schedule)` enables the cycle-consistency entropy term.
    pub entropy: Option<BetaSchedule>,
    pub iterations: u64,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub critic_steps: u32,
    pub noise_dim: usize,
    pub generator_layers: Vec<usize>,
    pub critic_layers: Vec<usize>,
    pub inverse_layers: Vec<usize>,
    pub eval_interval: u64,
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.critic_steps == 0 {
            return Err(Error::Config("critic_steps must be positive".into()));
        }
        if let Some(s) = &self.entropy {
            s.validate()?;
        }
        if self.generator_layers.first() != Some(&self.noise_dim) {
            return Err(Error::Config(format!(
                "generator input {:?} must match noise_dim {}",
                self.generator_layers.first(),
                self.noise_dim
            )));
        }
        if self.critic_layers.last() != Some(&1) {
            return Err(Error::Config("critic output dimension must be 1".into()));
        }
        Ok(())
    }
}

/// Generator, critic, optional inverse map, and their optimizers.
pub struct GanTrainer {
    pub generator: MlpNetwork,
    pub critic: MlpNetwork,
    pub inverse: Option<MlpNetwork>,
    gen_opt: AdamState,
    critic_opt: AdamState,
    inverse_opt: Option<AdamState>,
    noise: GaussianNoise,
    objective: CriticObjective,
    pub iteration: u64,
}

impl GanTrainer {
    pub fn new(cfg: &GanConfig, master_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let generator = MlpNetwork::init(
            &cfg.generator_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::GeneratorInit),
        )?;
        let critic = MlpNetwork::init(
            &cfg.critic_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::CriticInit),
        )?;
        let inverse = if cfg.entropy.is_some() {
            Some(MlpNetwork::init(
                &cfg.inverse_layers,
                OutputActivation::Linear,
                &mut stream_rng(master_seed, Stream::InverseInit),
            )?)
        } else {
            None
        };
        let gen_opt = AdamState::new(&generator, cfg.adam);
        let critic_opt = AdamState::new(&critic, cfg.adam);
        let inverse_opt = inverse.as_ref().map(|m| AdamState::new(m, cfg.adam));
        Ok(Self {
            generator,
            critic,
            inverse,
            gen_opt,
            critic_opt,
            inverse_opt,
            noise: GaussianNoise::new(cfg.noise_dim)?,
            objective: cfg.objective,
            iteration: 0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let eps = self.noise.sample(n, rng);
        self.generator.forward(eps.view())
    }

    /// One critic ascent step on a real batch versus freshly generated fakes.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        real: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<f64> {
        let eps = self.noise.sample(real.nrows(), rng);
        let fake = self.generator.forward(eps.view())?;
        logistic_critic_step(&mut self.critic, &mut self.critic_opt, real, fake.view())
            .map_err(|e| with_iteration(e, self.iteration))
    }

    /// One generator ascent step; `beta` weighs the entropy term when enabled.
    pub fn generator_update<R: Rng + ?Sized>(
        &mut self,
        batch_size: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let eps = self.noise.sample(batch_size, rng);
        let entropy = self.inverse.as_ref().map(|m| (m, beta));
        gan_generator_step(
            &mut self.generator,
            &mut self.gen_opt,
            &self.critic,
            self.objective,
            eps.view(),
            entropy,
        )
        .map_err(|e| with_iteration(e, self.iteration))
    }

    /// One descent step of the inverse map on fresh generator samples.
    pub fn inverse_update<R: Rng + ?Sized>(
        &mut self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let (inverse, opt) = match (self.inverse.as_mut(), self.inverse_opt.as_mut()) {
            (Some(m), Some(o)) => (m, o),
            _ => return Err(Error::Config("inverse map is not enabled".into())),
        };
        let eps = self.noise.sample(batch_size, rng);
        let x = self.generator.forward(eps.view())?;
        inverse_map_step(inverse, opt, x.view(), eps.view())
            .map_err(|e| with_iteration(e, self.iteration))
    }
}

pub(crate) fn with_iteration(e: Error, iteration: u64) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("{msg} (iteration {iteration})")),
        other => other,
    }
}

/// Runs `iterations` alternating critic/generator updates (one generator step
/// per iteration, `critic_steps` critic steps before it), evaluating the
/// symmetric KL every `eval_interval` iterations and at the end.
pub fn train_gan(
    cfg: &GanConfig,
    data: &DataSource,
    eval: &EvalContext,
    master_seed: u64,
) -> Result<(GanTrainer, Vec<MetricRow>)> {
    let mut trainer = GanTrainer::new(cfg, master_seed)?;
    let mut data_rng = stream_rng(master_seed, Stream::Data);
    let mut noise_rng = stream_rng(master_seed, Stream::Noise);
    let mut eval_rng = stream_rng(master_seed, Stream::Eval);
    let mut trace = Vec::new();

    for iter in 0..cfg.iterations {
        trainer.iteration = iter;
        let mut critic_loss = 0.0;
        for _ in 0..cfg.critic_steps {
            let real = data.batch(cfg.batch_size, &mut data_rng);
            critic_loss = trainer.critic_update(real.view(), &mut noise_rng)?;
        }
        let beta = match &cfg.entropy {
            Some(s) => s.value(iter),
            None => 0.0,
        };
        if trainer.inverse.is_some() {
            trainer.inverse_update(cfg.batch_size, &mut noise_rng)?;
        }
        let gen_loss = trainer.generator_update(cfg.batch_size, beta, &mut noise_rng)?;

        let is_last = iter + 1 == cfg.iterations;
        if (iter + 1) % cfg.eval_interval == 0 || is_last {
            let samples = trainer.sample(eval.n_samples, &mut eval_rng)?;
            let outcome = eval.evaluate(samples.view())?;
            trace.push(MetricRow {
                iteration: iter + 1,
                critic_loss,
                generator_loss: gen_loss,
                beta,
                sym_kl: outcome.sym_kl,
                mode_coverage: outcome.modes_hit.map(|m| m as f64),
            });
        }
    }
    Ok((trainer, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::target_by_id;

    fn tiny_cfg() -> GanConfig {
        GanConfig {
            objective: CriticObjective::Identity,
            entropy: Some(BetaSchedule::FixAndDecay { total: 40, hold: 10 }),
            iterations: 40,
            batch_size: 64,
            adam: AdamConfig::with_lr(2e-4),
            critic_steps: 1,
            noise_dim: 2,
            generator_layers: vec![2, 16, 2],
            critic_layers: vec![2, 16, 1],
            inverse_layers: vec![2, 16, 2],
            eval_interval: 20,
        }
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let spec = target_by_id("gmm8").unwrap();
        let mut cfg = tiny_cfg();
        cfg.iterations = 0;
        let data = DataSource::Mixture(spec.mixture.clone().unwrap());
        let eval = EvalContext::for_target(&spec, 2000);
        let (trainer, trace) = train_gan(&cfg, &data, &eval, 7).unwrap();
        let fresh = GanTrainer::new(&cfg, 7).unwrap();
        assert!(trace.is_empty());
        assert_eq!(trainer.generator.weights(), fresh.generator.weights());
        assert_eq!(trainer.critic.weights(), fresh.critic.weights());
    }

    #[test]
    fn identical_seed_gives_identical_traces() {
        let spec = target_by_id("gmm8").unwrap();
        let cfg = tiny_cfg();
        let data = DataSource::Mixture(spec.mixture.clone().unwrap());
        let eval = EvalContext::for_target(&spec, 2000);
        let (_, t1) = train_gan(&cfg, &data, &eval, 3).unwrap();
        let (_, t2) = train_gan(&cfg, &data, &eval, 3).unwrap();
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.iteration, b.iteration);
            assert_eq!(a.critic_loss.to_bits(), b.critic_loss.to_bits());
            assert_eq!(a.generator_loss.to_bits(), b.generator_loss.to_bits());
            assert_eq!(a.sym_kl.to_bits(), b.sym_kl.to_bits());
        }
    }

    #[test]
    fn dataset_source_draws_rows_from_the_dataset() {
        let data = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
        let src = DataSource::Dataset(data.clone());
        let batch = src.batch(100, &mut stream_rng(1, Stream::Data));
        for row in batch.axis_iter(Axis(0)) {
            let found = data
                .axis_iter(Axis(0))
                .any(|r| r[0] == row[0] && r[1] == row[1]);
            assert!(found);
        }
    }
}
