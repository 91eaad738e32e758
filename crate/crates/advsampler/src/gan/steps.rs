//! Low-level adversarial update steps shared by the GAN, RAS, and soft-Q
//! modules.

use ndarray::{Array2, ArrayView2, Axis};

use super::objective::{apply_g, apply_g_deriv, CriticObjective};
use crate::error::{Error, Result};
use crate::nn::{AdamState, MlpNetwork};
use crate::util::{sigmoid, softplus};

/// One ascent step of the logistic ratio objective
/// `E_real[log sigma(w)] + E_fake[log(1 - sigma(w))]` on the critic.
///
/// Returns the objective value. At the symmetric optimum (`w = 0` on both
/// classes) the value is `2 ln(1/2)`. Generator parameters are untouched; the
/// trained critic estimates `log[p_real / p_fake]`.
pub fn logistic_critic_step(
    critic: &mut MlpNetwork,
    opt: &mut AdamState,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
) -> Result<f64> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::InsufficientData("critic step needs non-empty batches".into()));
    }
    let (n_r, n_f) = (real.nrows(), fake.nrows());
    let all = ndarray::concatenate(Axis(0), &[real, fake])
        .map_err(|e| Error::Numeric(format!("critic batch concat: {e}")))?;
    let trace = critic.forward_trace(all.view())?;
    let w = trace.output().column(0).to_owned();

    let mut objective = 0.0;
    // Upstream of the minimized loss (the negated objective).
    let mut upstream = Array2::zeros((n_r + n_f, 1));
    for i in 0..n_r {
        objective += -softplus(-w[i]) / n_r as f64;
        upstream[[i, 0]] = -(1.0 - sigmoid(w[i])) / n_r as f64;
    }
    for i in 0..n_f {
        objective += -softplus(w[n_r + i]) / n_f as f64;
        upstream[[n_r + i, 0]] = sigmoid(w[n_r + i]) / n_f as f64;
    }
    if !objective.is_finite() {
        return Err(Error::Numeric("critic objective is not finite".into()));
    }
    let grad = critic.backward(&trace, upstream.view())?;
    opt.step(critic, &grad)?;
    Ok(objective)
}

/// One descent step of the reconstruction loss
/// `mean ||target - inverse(input)||^2` on the inverse map. Inputs are
/// treated as data (nothing flows back into whatever produced them).
pub fn inverse_map_step(
    inverse: &mut MlpNetwork,
    opt: &mut AdamState,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<f64> {
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("inverse map step needs a non-empty batch".into()));
    }
    let trace = inverse.forward_trace(inputs)?;
    let recon = trace.output();
    let resid = recon - &targets;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric("reconstruction loss is not finite".into()));
    }
    let upstream = &resid * (2.0 / n as f64);
    let grad = inverse.backward(&trace, upstream.view())?;
    opt.step(inverse, &grad)?;
    Ok(loss)
}

/// Mean reconstruction error `mean ||target - inverse(input)||^2` without any
/// update; the collapse-detection readout.
pub fn reconstruction_loss(
    inverse: &MlpNetwork,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<f64> {
    let recon = inverse.forward(inputs)?;
    let resid = &recon - &targets;
    Ok(resid.iter().map(|r| r * r).sum::<f64>() / inputs.nrows() as f64)
}

/// Monte-Carlo value of the generator objective for a batch of critic scores.
pub fn generator_objective_from_scores(objective: CriticObjective, scores: &[f64]) -> f64 {
    scores.iter().map(|&w| apply_g(objective, w)).sum::<f64>() / scores.len() as f64
}

/// One ascent step on `E[g0(w(h(eps)))]`, optionally with the
/// cycle-consistency entropy term `-beta * E||eps - mu(h(eps))||^2`.
///
/// Gradients flow through the critic's input (its parameters are frozen), and
/// through the frozen inverse map's input for the entropy term. Returns the
/// ascent objective value including the regularizer.
pub fn gan_generator_step(
    generator: &mut MlpNetwork,
    opt: &mut AdamState,
    critic: &MlpNetwork,
    objective: CriticObjective,
    noise: ArrayView2<f64>,
    entropy: Option<(&MlpNetwork, f64)>,
) -> Result<f64> {
    let n = noise.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("generator step needs a non-empty batch".into()));
    }
    let b = n as f64;
    let tg = generator.forward_trace(noise)?;
    let x = tg.output().clone();
    let tc = critic.forward_trace(x.view())?;
    let w = tc.output().column(0).to_owned();

    let mut value = 0.0;
    let mut upstream_c = Array2::zeros((n, 1));
    for i in 0..n {
        value += apply_g(objective, w[i]) / b;
        upstream_c[[i, 0]] = -apply_g_deriv(objective, w[i]) / b;
    }
    let mut dx = critic.backward_input_only(&tc, upstream_c.view())?;

    if let Some((inverse, beta)) = entropy {
        let tm = inverse.forward_trace(x.view())?;
        let resid = &noise.to_owned() - tm.output();
        let penalty = resid.iter().map(|r| r * r).sum::<f64>() / b;
        value -= beta * penalty;
        // loss includes +beta * penalty; d(penalty)/d(mu_out) = -2 resid / B.
        let upstream_m = &resid * (-2.0 * beta / b);
        dx += &inverse.backward_input_only(&tm, upstream_m.view())?;
    }

    if !value.is_finite() {
        return Err(Error::Numeric("generator objective is not finite".into()));
    }
    let gg = generator.backward(&tg, dx.view())?;
    opt.step(generator, &gg)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamConfig, OutputActivation};
    use crate::seed::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_learning_rate_leaves_critic_unchanged() {
        let mut rng = stream_rng(1, Stream::CriticInit);
        let mut critic = MlpNetwork::init(&[1, 16, 1], OutputActivation::Linear, &mut rng).unwrap();
        let before = critic.clone();
        let mut opt = AdamState::new(&critic, AdamConfig::with_lr(0.0));
        let real = Array2::from_shape_fn((32, 1), |_| rng.sample::<f64, _>(StandardNormal));
        let fake = Array2::from_shape_fn((32, 1), |_| 1.0 + rng.sample::<f64, _>(StandardNormal));
        logistic_critic_step(&mut critic, &mut opt, real.view(), fake.view()).unwrap();
        assert_eq!(before.weights(), critic.weights());
        assert_eq!(before.biases(), critic.biases());
    }

    #[test]
    fn symmetric_optimum_objective_value() {
        // A critic that outputs exactly zero scores 2 ln(1/2) on any batch.
        let mut rng = stream_rng(2, Stream::CriticInit);
        let mut critic = MlpNetwork::init(&[1, 4, 1], OutputActivation::Linear, &mut rng).unwrap();
        let (w, b) = critic.params_mut();
        w[1].fill(0.0);
        b[1].fill(0.0);
        let mut opt = AdamState::new(&critic, AdamConfig::with_lr(0.0));
        let batch = Array2::from_shape_fn((64, 1), |_| rng.sample::<f64, _>(StandardNormal));
        let j = logistic_critic_step(&mut critic, &mut opt, batch.view(), batch.view()).unwrap();
        assert_abs_diff_eq!(j, 2.0 * (0.5f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn trained_critic_recovers_two_gaussian_log_ratio() {
        // p = N(0,1) real vs q = N(1,1) fake: the optimum is w(x) = 0.5 - x.
        let mut init = stream_rng(3, Stream::CriticInit);
        let mut critic =
            MlpNetwork::init(&[1, 128, 128, 1], OutputActivation::Linear, &mut init).unwrap();
        let mut opt = AdamState::new(&critic, AdamConfig::with_lr(1e-3));
        let mut data = stream_rng(3, Stream::Data);
        for _ in 0..3000 {
            let real = Array2::from_shape_fn((256, 1), |_| data.sample::<f64, _>(StandardNormal));
            let fake =
                Array2::from_shape_fn((256, 1), |_| 1.0 + data.sample::<f64, _>(StandardNormal));
            logistic_critic_step(&mut critic, &mut opt, real.view(), fake.view()).unwrap();
        }
        let mut err = 0.0;
        let m = 101;
        for i in 0..m {
            let x = -1.0 + 3.0 * i as f64 / (m - 1) as f64;
            let w = critic.forward(array![[x]].view()).unwrap()[[0, 0]];
            err += (w - (0.5 - x)).abs() / m as f64;
        }
        assert!(err < 0.1, "mean abs error {err}");
    }

    #[test]
    fn constant_critic_gives_zero_generator_gradient() {
        let mut rng = stream_rng(4, Stream::GeneratorInit);
        let mut gen = MlpNetwork::init(&[2, 8, 2], OutputActivation::Linear, &mut rng).unwrap();
        let mut critic = MlpNetwork::init(&[2, 8, 1], OutputActivation::Linear, &mut rng).unwrap();
        // Zero the critic's output layer: w(x) = const = 0.
        {
            let (w, b) = critic.params_mut();
            w[1].fill(0.0);
            b[1].fill(0.0);
        }
        let before = gen.clone();
        let mut opt = AdamState::new(&gen, AdamConfig::with_lr(1e-2));
        let noise = Array2::from_shape_fn((16, 2), |_| rng.sample::<f64, _>(StandardNormal));
        gan_generator_step(
            &mut gen,
            &mut opt,
            &critic,
            CriticObjective::Identity,
            noise.view(),
            None,
        )
        .unwrap();
        // Zero gradient means Adam leaves every parameter untouched.
        assert_eq!(before.weights(), gen.weights());
        assert_eq!(before.biases(), gen.biases());
    }

    #[test]
    fn linear_generator_moves_against_critic_slope() {
        // h(eps) = eps + theta, critic w(x) = -x, identity objective:
        // d(obj)/d(theta) = -1, so one Adam step moves theta by about -lr.
        let mut rng = stream_rng(5, Stream::GeneratorInit);
        let mut gen = MlpNetwork::init(&[1, 1], OutputActivation::Linear, &mut rng).unwrap();
        gen.set_params(vec![array![[1.0]]], vec![array![0.0]]).unwrap();
        let mut critic = MlpNetwork::init(&[1, 1], OutputActivation::Linear, &mut rng).unwrap();
        critic.set_params(vec![array![[-1.0]]], vec![array![0.0]]).unwrap();
        let mut opt = AdamState::new(&gen, AdamConfig::with_lr(1e-3));
        let noise = Array2::from_shape_fn((64, 1), |_| rng.sample::<f64, _>(StandardNormal));
        gan_generator_step(
            &mut gen,
            &mut opt,
            &critic,
            CriticObjective::Identity,
            noise.view(),
            None,
        )
        .unwrap();
        let theta = gen.biases()[0][0];
        assert!((theta + 1e-3).abs() < 1e-9, "theta {theta}");
    }

    #[test]
    fn beta_zero_entropy_matches_unregularized_bitwise() {
        let mut rng = stream_rng(6, Stream::GeneratorInit);
        let gen0 = MlpNetwork::init(&[2, 16, 2], OutputActivation::Linear, &mut rng).unwrap();
        let critic = MlpNetwork::init(&[2, 16, 1], OutputActivation::Linear, &mut rng).unwrap();
        let inverse = MlpNetwork::init(&[2, 16, 2], OutputActivation::Linear, &mut rng).unwrap();
        let noise = Array2::from_shape_fn((32, 2), |_| rng.sample::<f64, _>(StandardNormal));

        let mut gen_a = gen0.clone();
        let mut opt_a = AdamState::new(&gen_a, AdamConfig::with_lr(1e-3));
        let va = gan_generator_step(
            &mut gen_a,
            &mut opt_a,
            &critic,
            CriticObjective::Identity,
            noise.view(),
            None,
        )
        .unwrap();

        let mut gen_b = gen0.clone();
        let mut opt_b = AdamState::new(&gen_b, AdamConfig::with_lr(1e-3));
        let vb = gan_generator_step(
            &mut gen_b,
            &mut opt_b,
            &critic,
            CriticObjective::Identity,
            noise.view(),
            Some((&inverse, 0.0)),
        )
        .unwrap();

        assert_eq!(va, vb);
        assert_eq!(gen_a.weights(), gen_b.weights());
        assert_eq!(gen_a.biases(), gen_b.biases());
    }

    #[test]
    fn planted_log_ratio_recovers_negative_reverse_kl() {
        // With the analytically optimal critic w(x) = log p(x)/q(x) and the
        // identity objective, the generator objective is a Monte-Carlo
        // estimate of -KL(q || p). For q = N(1,1), p = N(0,1): KL = 0.5.
        let mut rng = stream_rng(7, Stream::Noise);
        let n = 1_000_000;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = 1.0 + rng.sample::<f64, _>(StandardNormal);
                // log N(x;0,1) - log N(x;1,1) = 0.5 - x
                0.5 - x
            })
            .collect();
        let value = generator_objective_from_scores(CriticObjective::Identity, &scores);
        assert!((value - (-0.5)).abs() < 0.01, "estimate {value}");
    }

    #[test]
    fn trained_critic_sigmoid_approximates_density_share() {
        // sigma(w(x)) should approximate p/(p+q) on a separable 1D problem.
        let mut init = stream_rng(8, Stream::CriticInit);
        let mut critic =
            MlpNetwork::init(&[1, 128, 128, 1], OutputActivation::Linear, &mut init).unwrap();
        let mut opt = AdamState::new(&critic, AdamConfig::with_lr(1e-3));
        let mut data = stream_rng(8, Stream::Data);
        for _ in 0..3000 {
            let real =
                Array2::from_shape_fn((256, 1), |_| -1.5 + data.sample::<f64, _>(StandardNormal));
            let fake =
                Array2::from_shape_fn((256, 1), |_| 1.5 + data.sample::<f64, _>(StandardNormal));
            logistic_critic_step(&mut critic, &mut opt, real.view(), fake.view()).unwrap();
        }
        let normal = |x: f64, m: f64| (-0.5 * (x - m) * (x - m)).exp();
        let mut err = 0.0;
        let m = 81;
        for i in 0..m {
            let x = -3.0 + 6.0 * i as f64 / (m - 1) as f64;
            let w = critic.forward(array![[x]].view()).unwrap()[[0, 0]];
            let truth = normal(x, -1.5) / (normal(x, -1.5) + normal(x, 1.5));
            err += (crate::util::sigmoid(w) - truth).abs() / m as f64;
        }
        assert!(err < 0.05, "mean abs error {err}");
    }
}
