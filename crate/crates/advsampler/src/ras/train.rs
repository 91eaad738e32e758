//! The reference-based adversarial sampling trainer.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::EntropyRegularizer;
use crate::dist::{
    BetaReference, DiagonalGaussianReference, GaussianNoise, Reference, ReferenceFamily,
    UnnormalizedTarget,
};
use crate::error::{Error, Result};
use crate::gan::{
    apply_g, apply_g_deriv, logistic_critic_step, inverse_map_step, with_iteration,
    CriticObjective,
};
use crate::metrics::{EvalContext, MetricRow};
use crate::nn::{AdamConfig, AdamState, MlpNetwork, OutputActivation};
use crate::schedule::BetaSchedule;
use crate::seed::{stream_rng, Stream};
use crate::util::AffineOutput;

#[derive(Debug, Clone)]
pub struct RasConfig {
    pub objective: CriticObjective,
    pub regularizer: EntropyRegularizer,
    pub schedule: BetaSchedule,
    pub reference: ReferenceFamily,
    /// Refit the reference from generator samples every this many iterations.
    pub refit_interval: u64,
    /// Floor applied to `log[u/p_ref]` to keep gradients finite when a sample
    /// exits the support of `u`.
    pub f2_clamp: f64,
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

impl RasConfig {
    pub fn validate(&self, target: &UnnormalizedTarget) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.refit_interval == 0 {
            return Err(Error::Config("refit_interval must be positive".into()));
        }
        if self.critic_steps == 0 {
            return Err(Error::Config("critic_steps must be positive".into()));
        }
        self.schedule.validate()?;
        if self.generator_layers.first() != Some(&self.noise_dim) {
            return Err(Error::Config(format!(
                "generator input {:?} must match noise_dim {}",
                self.generator_layers.first(),
                self.noise_dim
            )));
        }
        if self.generator_layers.last() != Some(&target.dim()) {
            return Err(Error::Config(format!(
                "generator output {:?} must match target dim {}",
                self.generator_layers.last(),
                target.dim()
            )));
        }
        if self.critic_layers.last() != Some(&1) {
            return Err(Error::Config("critic output dimension must be 1".into()));
        }
        if self.reference == ReferenceFamily::Beta && target.bounds().is_none() {
            return Err(Error::Config(
                "beta reference requires a bounded target domain".into(),
            ));
        }
        if self.regularizer.needs_inverse_map() {
            if self.inverse_layers.first() != Some(&target.dim())
                || self.inverse_layers.last() != Some(&self.noise_dim)
            {
                return Err(Error::Config(format!(
                    "inverse map must be {} -> ... -> {}, got {:?}",
                    target.dim(),
                    self.noise_dim,
                    self.inverse_layers
                )));
            }
        }
        Ok(())
    }
}

pub struct RasTrainer {
    pub generator: MlpNetwork,
    pub critic: MlpNetwork,
    pub inverse: Option<MlpNetwork>,
    gen_opt: AdamState,
    critic_opt: AdamState,
    inverse_opt: Option<AdamState>,
    reference: Option<Reference>,
    target: UnnormalizedTarget,
    noise: GaussianNoise,
    output_map: AffineOutput,
    objective: CriticObjective,
    regularizer: EntropyRegularizer,
    reference_family: ReferenceFamily,
    f2_clamp: f64,
    pub iteration: u64,
}

impl RasTrainer {
    pub fn new(cfg: &RasConfig, target: UnnormalizedTarget, master_seed: u64) -> Result<Self> {
        cfg.validate(&target)?;
        let out_act = match target.bounds() {
            Some(_) => OutputActivation::Tanh,
            None => OutputActivation::Linear,
        };
        let output_map = AffineOutput::from_bounds(target.bounds());
        let generator = MlpNetwork::init(
            &cfg.generator_layers,
            out_act,
            &mut stream_rng(master_seed, Stream::GeneratorInit),
        )?;
        let critic = MlpNetwork::init(
            &cfg.critic_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::CriticInit),
        )?;
        let inverse = if cfg.regularizer.needs_inverse_map() {
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
            reference: None,
            target,
            noise: GaussianNoise::new(cfg.noise_dim)?,
            output_map,
            objective: cfg.objective,
            regularizer: cfg.regularizer,
            reference_family: cfg.reference,
            f2_clamp: cfg.f2_clamp,
            iteration: 0,
        })
    }

    pub fn target(&self) -> &UnnormalizedTarget {
        &self.target
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    /// Pushes a noise batch through the generator and the output rescale.
    pub fn map_noise(&self, noise: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.output_map.apply(&self.generator.forward(noise)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        let eps = self.noise.sample(n, rng);
        self.map_noise(eps.view())
    }

    /// Refits the reference from generator samples by moment matching.
    /// Deterministic given the batch.
    pub fn refit_reference(&mut self, samples: ArrayView2<f64>) -> Result<()> {
        let reference = match self.reference_family {
            ReferenceFamily::Gaussian => {
                Reference::Gaussian(DiagonalGaussianReference::fit(samples)?)
            }
            ReferenceFamily::Beta => {
                let (lo, hi) = self
                    .target
                    .bounds()
                    .ok_or_else(|| Error::Config("beta reference needs bounds".into()))?;
                Reference::Beta(BetaReference::fit(samples, lo, hi)?)
            }
        };
        self.reference = Some(reference);
        Ok(())
    }

    fn reference_or_err(&self) -> Result<&Reference> {
        self.reference
            .as_ref()
            .ok_or_else(|| Error::Config("reference not fitted yet; call refit_reference".into()))
    }

    /// One critic ascent step with reference samples as the "real" class and
    /// fresh generator samples as the "fake" class. The trained critic
    /// estimates `log[p_ref/q]` directly.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        noise: ArrayView2<f64>,
        ref_rng: &mut R,
    ) -> Result<f64> {
        let fake = self.map_noise(noise)?;
        self.critic_update_on(fake.view(), ref_rng)
    }

    pub(crate) fn critic_update_on<R: Rng + ?Sized>(
        &mut self,
        fake: ArrayView2<f64>,
        ref_rng: &mut R,
    ) -> Result<f64> {
        let reference = self.reference_or_err()?;
        let real = reference.sample(fake.nrows(), ref_rng);
        logistic_critic_step(&mut self.critic, &mut self.critic_opt, real.view(), fake)
            .map_err(|e| with_iteration(e, self.iteration))
    }

    /// One descent step on the inverse map's reconstruction loss; the
    /// generator is frozen.
    pub fn inverse_update(&mut self, noise: ArrayView2<f64>) -> Result<f64> {
        let x = self.map_noise(noise)?;
        let (inverse, opt) = match (self.inverse.as_mut(), self.inverse_opt.as_mut()) {
            (Some(m), Some(o)) => (m, o),
            _ => return Err(Error::Config("inverse map is not enabled".into())),
        };
        inverse_map_step(inverse, opt, x.view(), noise)
            .map_err(|e| with_iteration(e, self.iteration))
    }

    /// One generator ascent step on
    /// `E[g0(w(x) + log[u(x)/p_ref(x)])] + beta * R`, with `x = h(eps)` and the
    /// ratio remainder clamped below at `f2_clamp`. `R` is the selected entropy
    /// surrogate. The critic and inverse map are frozen here.
    pub fn generator_update(&mut self, noise: ArrayView2<f64>, beta: f64) -> Result<f64> {
        let n = noise.nrows();
        if n == 0 {
            return Err(Error::InsufficientData("generator step needs a non-empty batch".into()));
        }
        let b = n as f64;
        let tg = self.generator.forward_trace(noise)?;
        let x = self.output_map.apply(tg.output());
        let reference = self.reference_or_err()?;

        let tc = self.critic.forward_trace(x.view())?;
        let w = tc.output().column(0).to_owned();
        let log_u = self.target.log_u_batch(x.view());
        if log_u.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::DegenerateBatch {
                iteration: self.iteration,
                detail: "every generated point has u(x) = 0".into(),
            });
        }
        let log_r = reference.log_density_batch(x.view());

        let mut value = 0.0;
        let mut coef = Array1::zeros(n);
        let mut unclamped = vec![false; n];
        for i in 0..n {
            let f2 = log_u[i] - log_r[i];
            let f2c = f2.max(self.f2_clamp);
            unclamped[i] = f2 >= self.f2_clamp && f2.is_finite();
            let s = w[i] + f2c;
            value += apply_g(self.objective, s) / b;
            coef[i] = apply_g_deriv(self.objective, s) / b;
        }

        let mut upstream_c = Array2::zeros((n, 1));
        for i in 0..n {
            upstream_c[[i, 0]] = -coef[i];
        }
        let mut dx = self.critic.backward_input_only(&tc, upstream_c.view())?;

        let grad_u = self.target.grad_log_u_batch(x.view());
        let grad_r = reference.grad_log_density_batch(x.view());
        for i in 0..n {
            if unclamped[i] && coef[i] != 0.0 {
                let c = coef[i];
                for j in 0..dx.ncols() {
                    dx[[i, j]] -= c * (grad_u[[i, j]] - grad_r[[i, j]]);
                }
            }
        }

        match self.regularizer {
            EntropyRegularizer::None => {}
            EntropyRegularizer::CrossEntropy => {
                // R = -E[log u]; the log C shift drops out of the gradient.
                let r_val = -log_u.sum() / b;
                value += beta * r_val;
                if beta != 0.0 {
                    for i in 0..n {
                        for j in 0..dx.ncols() {
                            dx[[i, j]] += (beta / b) * grad_u[[i, j]];
                        }
                    }
                }
            }
            EntropyRegularizer::CycleConsistency => {
                let inverse = self
                    .inverse
                    .as_ref()
                    .ok_or_else(|| Error::Config("inverse map is not enabled".into()))?;
                let tm = inverse.forward_trace(x.view())?;
                let resid = &noise.to_owned() - tm.output();
                let penalty = resid.iter().map(|r| r * r).sum::<f64>() / b;
                value -= beta * penalty;
                if beta != 0.0 {
                    let upstream_m = &resid * (-2.0 * beta / b);
                    dx += &inverse.backward_input_only(&tm, upstream_m.view())?;
                }
            }
        }

        if !value.is_finite() {
            return Err(with_iteration(
                Error::Numeric("generator objective is not finite".into()),
                self.iteration,
            ));
        }
        let dy = self.output_map.chain(dx);
        let gg = self.generator.backward(&tg, dy.view())?;
        self.gen_opt.step(&mut self.generator, &gg)?;
        Ok(value)
    }
}

/// Full training loop. Per iteration: draw a generator batch, refit the
/// reference on schedule, one (or more) critic steps, the inverse-map step
/// when cycle consistency is on, then the generator step with the scheduled
/// `beta`.
pub fn train_ras(
    cfg: &RasConfig,
    target: UnnormalizedTarget,
    eval: &EvalContext,
    master_seed: u64,
) -> Result<(RasTrainer, Vec<MetricRow>)> {
    let mut trainer = RasTrainer::new(cfg, target, master_seed)?;
    let mut noise_rng = stream_rng(master_seed, Stream::Noise);
    let mut ref_rng = stream_rng(master_seed, Stream::Reference);
    let mut eval_rng = stream_rng(master_seed, Stream::Eval);
    let mut trace = Vec::new();
    let noise = GaussianNoise::new(cfg.noise_dim)?;

    for iter in 0..cfg.iterations {
        trainer.iteration = iter;

        // The same generator batch feeds the reference refit and the critic's
        // fake class, keeping the reference matched to what the critic sees.
        let eps = noise.sample(cfg.batch_size, &mut noise_rng);
        let x = trainer.map_noise(eps.view())?;
        if iter % cfg.refit_interval == 0 {
            trainer.refit_reference(x.view())?;
        }
        let mut critic_loss = trainer.critic_update_on(x.view(), &mut ref_rng)?;
        for _ in 1..cfg.critic_steps {
            let eps = noise.sample(cfg.batch_size, &mut noise_rng);
            critic_loss = trainer.critic_update(eps.view(), &mut ref_rng)?;
        }

        if trainer.regularizer.needs_inverse_map() {
            let eps = noise.sample(cfg.batch_size, &mut noise_rng);
            trainer.inverse_update(eps.view())?;
        }

        let beta = match trainer.regularizer {
            EntropyRegularizer::None => 0.0,
            _ => cfg.schedule.value(iter),
        };
        let eps = noise.sample(cfg.batch_size, &mut noise_rng);
        let gen_loss = trainer.generator_update(eps.view(), beta)?;

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
