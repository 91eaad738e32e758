//! The adversarial soft-Q agent: Q-learning with an importance-sampled soft
//! value, and a policy trained by the reference-based adversarial update with
//! a per-state Beta reference over actions.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::replay::Minibatch;
use crate::dist::BetaReference;
use crate::error::{Error, Result};
use crate::gan::{
    apply_g, apply_g_deriv, inverse_map_step, logistic_critic_step, CriticObjective,
};
use crate::nn::{AdamConfig, AdamState, MlpNetwork, OutputActivation};
use crate::seed::{stream_rng, Stream};
use crate::util::logsumexp;

#[derive(Debug, Clone)]
pub struct SqlConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Proposal/sample count M, used for the soft value, the per-state policy
    /// samples, and the per-state reference samples.
    pub m_samples: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub adam: AdamConfig,
    pub f2_clamp: f64,
    pub policy_layers: Vec<usize>,
    pub q_layers: Vec<usize>,
    pub critic_layers: Vec<usize>,
    pub inverse_layers: Vec<usize>,
}

impl SqlConfig {
    /// Layer shapes for the toy 2D environment: policy `|S+N|-128-128-|A|`,
    /// Q `|S+A|-128-128-1`, discriminator `|A+S|-128-128-128-1`, inverse map
    /// `|A|-128-128-|S+N|`, with the noise dimension equal to the action
    /// dimension.
    pub fn for_dims(state_dim: usize, action_dim: usize) -> Self {
        let sn = state_dim + action_dim;
        let sa = state_dim + action_dim;
        Self {
            state_dim,
            action_dim,
            m_samples: 32,
            alpha: 1.0,
            gamma: 0.99,
            adam: AdamConfig::with_lr(3e-4),
            f2_clamp: -30.0,
            policy_layers: vec![sn, 128, 128, action_dim],
            q_layers: vec![sa, 128, 128, 1],
            critic_layers: vec![action_dim + state_dim, 128, 128, 128, 1],
            inverse_layers: vec![action_dim, 128, 128, state_dim + action_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_samples == 0 {
            return Err(Error::Config("m_samples must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        let sn = self.state_dim + self.action_dim;
        if self.policy_layers.first() != Some(&sn)
            || self.policy_layers.last() != Some(&self.action_dim)
        {
            return Err(Error::Config(format!(
                "policy must map {} -> {}, got {:?}",
                sn, self.action_dim, self.policy_layers
            )));
        }
        if self.q_layers.first() != Some(&sn) || self.q_layers.last() != Some(&1) {
            return Err(Error::Config(format!(
                "q network must map {} -> 1, got {:?}",
                sn, self.q_layers
            )));
        }
        if self.critic_layers.first() != Some(&sn) || self.critic_layers.last() != Some(&1) {
            return Err(Error::Config(format!(
                "discriminator must map {} -> 1, got {:?}",
                sn, self.critic_layers
            )));
        }
        if self.inverse_layers.first() != Some(&self.action_dim)
            || self.inverse_layers.last() != Some(&sn)
        {
            return Err(Error::Config(format!(
                "inverse map must map {} -> {}, got {:?}",
                self.action_dim, sn, self.inverse_layers
            )));
        }
        Ok(())
    }
}

/// Losses and monitoring readouts from one policy update.
#[derive(Debug, Clone, Copy)]
pub struct PolicyUpdate {
    pub critic_loss: f64,
    pub policy_objective: f64,
    pub inverse_loss: f64,
    /// Smallest per-dimension sample variance of the policy actions in the
    /// update batch; a collapse indicator.
    pub min_action_variance: f64,
    pub max_abs_action: f64,
}

pub struct SqlAgent {
    pub policy: MlpNetwork,
    pub policy_target: MlpNetwork,
    pub q: MlpNetwork,
    pub q_target: MlpNetwork,
    pub critic: MlpNetwork,
    pub inverse: MlpNetwork,
    policy_opt: AdamState,
    q_opt: AdamState,
    critic_opt: AdamState,
    inverse_opt: AdamState,
    cfg: SqlConfig,
}

pub(crate) fn concat_cols(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("row counts match")
}

pub(crate) fn repeat_rows(a: ArrayView2<f64>, m: usize) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows() * m, a.ncols()));
    for (i, row) in a.axis_iter(Axis(0)).enumerate() {
        for j in 0..m {
            out.index_axis_mut(Axis(0), i * m + j).assign(&row);
        }
    }
    out
}

impl SqlAgent {
    pub fn new(cfg: SqlConfig, master_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let policy = MlpNetwork::init(
            &cfg.policy_layers,
            OutputActivation::Tanh,
            &mut stream_rng(master_seed, Stream::GeneratorInit),
        )?;
        let q = MlpNetwork::init(
            &cfg.q_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::QInit),
        )?;
        let critic = MlpNetwork::init(
            &cfg.critic_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::CriticInit),
        )?;
        let inverse = MlpNetwork::init(
            &cfg.inverse_layers,
            OutputActivation::Linear,
            &mut stream_rng(master_seed, Stream::InverseInit),
        )?;
        let policy_opt = AdamState::new(&policy, cfg.adam);
        let q_opt = AdamState::new(&q, cfg.adam);
        let critic_opt = AdamState::new(&critic, cfg.adam);
        let inverse_opt = AdamState::new(&inverse, cfg.adam);
        Ok(Self {
            policy_target: policy.clone(),
            q_target: q.clone(),
            policy,
            q,
            critic,
            inverse,
            policy_opt,
            q_opt,
            critic_opt,
            inverse_opt,
            cfg,
        })
    }

    pub fn config(&self) -> &SqlConfig {
        &self.cfg
    }

    /// Copies the online Q and policy parameters into their targets.
    pub fn sync_targets(&mut self) {
        self.q_target = self.q.clone();
        self.policy_target = self.policy.clone();
    }

    /// Stochastic action for one state: `a = policy([s, xi])`, `xi ~ N(0, I)`.
    pub fn act<R: Rng + ?Sized>(&self, state: ArrayView1<f64>, rng: &mut R) -> Result<Array1<f64>> {
        let da = self.cfg.action_dim;
        let mut input = Array2::zeros((1, self.cfg.state_dim + da));
        for (j, &s) in state.iter().enumerate() {
            input[[0, j]] = s;
        }
        for j in 0..da {
            input[[0, self.cfg.state_dim + j]] = rng.sample(StandardNormal);
        }
        let out = self.policy.forward(input.view())?;
        Ok(out.row(0).to_owned())
    }

    /// Importance-sampled soft value
    /// `V(s) = alpha * log E_{a ~ U[-1,1]^da}[exp(Qbar(s, a)/alpha) / q(a)]`
    /// with `M` uniform proposals per state, log-sum-exp stabilized.
    pub fn soft_value<R: Rng + ?Sized>(
        &self,
        states: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<Array1<f64>> {
        let da = self.cfg.action_dim;
        let m = self.cfg.m_samples;
        let proposals =
            Array2::from_shape_fn((states.nrows() * m, da), |_| rng.random_range(-1.0..1.0));
        self.soft_value_with_proposals(states, proposals.view())
    }

    /// The soft value for explicitly supplied proposals (M per state,
    /// grouped row-major). Exposed so the log-sum-exp lower-bound property is
    /// directly testable.
    pub fn soft_value_with_proposals(
        &self,
        states: ArrayView2<f64>,
        proposals: ArrayView2<f64>,
    ) -> Result<Array1<f64>> {
        let b = states.nrows();
        let m = proposals.nrows() / b.max(1);
        if b == 0 || m == 0 || proposals.nrows() != b * m {
            return Err(Error::Dimension {
                context: "soft value proposals",
                expected: b * self.cfg.m_samples,
                got: proposals.nrows(),
            });
        }
        let da = self.cfg.action_dim as f64;
        let alpha = self.cfg.alpha;
        let rep = repeat_rows(states, m);
        let q_in = concat_cols(rep.view(), proposals);
        let q_vals = self.q_target.forward(q_in.view())?;
        let mut out = Array1::zeros(b);
        let mut buf = vec![0.0; m];
        for i in 0..b {
            for j in 0..m {
                buf[j] = q_vals[[i * m + j, 0]] / alpha;
            }
            out[i] = alpha * (logsumexp(&buf) - (m as f64).ln() + da * 2.0f64.ln());
        }
        Ok(out)
    }

    /// One descent step on the TD loss
    /// `mean[(Q(s,a) - (r + gamma V(s')))^2]`; terminal transitions drop the
    /// bootstrap term. The soft value uses the target network.
    pub fn q_update<R: Rng + ?Sized>(&mut self, batch: &Minibatch, rng: &mut R) -> Result<f64> {
        let n = batch.states.nrows();
        let v_next = self.soft_value(batch.next_states.view(), rng)?;
        let mut targets = Array1::zeros(n);
        for i in 0..n {
            targets[i] = batch.rewards[i]
                + if batch.dones[i] { 0.0 } else { self.cfg.gamma * v_next[i] };
        }
        if !targets.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite TD targets".into()));
        }
        let q_in = concat_cols(batch.states.view(), batch.actions.view());
        let trace = self.q.forward_trace(q_in.view())?;
        let q_vals = trace.output().column(0).to_owned();
        let b = n as f64;
        let mut loss = 0.0;
        let mut upstream = Array2::zeros((n, 1));
        for i in 0..n {
            let d = q_vals[i] - targets[i];
            loss += d * d / b;
            upstream[[i, 0]] = 2.0 * d / b;
        }
        let grad = self.q.backward(&trace, upstream.view())?;
        self.q_opt.step(&mut self.q, &grad)?;
        Ok(loss)
    }

    /// The reference-based adversarial policy update on a batch of states,
    /// scoring actions by the online Q network: `log u(a;s) = Q(s,a)/alpha`,
    /// normalized per state by its batch maximum (a per-state constant shift
    /// of `log u`, so the objective gradient is unchanged while the ratio
    /// remainder stays clear of its numeric floor).
    pub fn policy_update<R: Rng + ?Sized>(
        &mut self,
        states: ArrayView2<f64>,
        beta: f64,
        rng: &mut R,
    ) -> Result<PolicyUpdate> {
        let q = &self.q;
        let alpha = self.cfg.alpha;
        let ds = self.cfg.state_dim;
        let score = |rep: ArrayView2<f64>, actions: ArrayView2<f64>| {
            q_action_score(q, alpha, ds, rep, actions)
        };
        ras_policy_update(
            &mut self.policy,
            &mut self.policy_opt,
            &mut self.critic,
            &mut self.critic_opt,
            &mut self.inverse,
            &mut self.inverse_opt,
            &self.cfg,
            states,
            beta,
            rng,
            score,
        )
    }
}

/// `log u(a; s) = Q(s, a)/alpha` and its gradient with respect to the action.
fn q_action_score(
    q: &MlpNetwork,
    alpha: f64,
    state_dim: usize,
    states_rep: ArrayView2<f64>,
    actions: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = actions.nrows();
    let q_in = concat_cols(states_rep, actions);
    let trace = q.forward_trace(q_in.view())?;
    let vals = trace.output().column(0).mapv(|v| v / alpha);
    let upstream = Array2::from_elem((n, 1), 1.0 / alpha);
    let grad_in = q.backward_input_only(&trace, upstream.view())?;
    let da = actions.ncols();
    let mut grad_a = Array2::zeros((n, da));
    for i in 0..n {
        for j in 0..da {
            grad_a[[i, j]] = grad_in[[i, state_dim + j]];
        }
    }
    Ok((vals, grad_a))
}

/// The policy-side RAS update: sample M actions per state from the policy,
/// fit a per-state Beta reference to them, take one critic step
/// (reference actions as the "real" class), one inverse-map step, and one
/// policy ascent step on `E[w + log u/p_ref] - beta * recon`.
#[allow(clippy::too_many_arguments)]
pub fn ras_policy_update<R, F>(
    policy: &mut MlpNetwork,
    policy_opt: &mut AdamState,
    critic: &mut MlpNetwork,
    critic_opt: &mut AdamState,
    inverse: &mut MlpNetwork,
    inverse_opt: &mut AdamState,
    cfg: &SqlConfig,
    states: ArrayView2<f64>,
    beta: f64,
    rng: &mut R,
    score: F,
) -> Result<PolicyUpdate>
where
    R: Rng + ?Sized,
    F: Fn(ArrayView2<f64>, ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)>,
{
    let b = states.nrows();
    let m = cfg.m_samples;
    let n = b * m;
    let da = cfg.action_dim;
    if b == 0 {
        return Err(Error::InsufficientData("policy update needs a non-empty batch".into()));
    }

    let rep = repeat_rows(states, m);
    let noise = Array2::from_shape_fn((n, da), |_| rng.sample(StandardNormal));
    let policy_in = concat_cols(rep.view(), noise.view());
    let tp = policy.forward_trace(policy_in.view())?;
    let actions = tp.output().clone();

    // Per-state generalized-Beta reference by moment matching on [-1, 1].
    let mut fits: Vec<BetaReference> = Vec::with_capacity(b);
    for i in 0..b {
        let block = actions.slice(ndarray::s![i * m..(i + 1) * m, ..]);
        let fit = BetaReference::fit(block, -1.0, 1.0).or_else(|_| {
            BetaReference::new(Array1::ones(da), Array1::ones(da), -1.0, 1.0)
        })?;
        fits.push(fit);
    }
    let mut ref_actions = Array2::zeros((n, da));
    for i in 0..b {
        let draws = fits[i].sample(m, rng);
        ref_actions
            .slice_mut(ndarray::s![i * m..(i + 1) * m, ..])
            .assign(&draws);
    }

    let real_in = concat_cols(ref_actions.view(), rep.view());
    let fake_in = concat_cols(actions.view(), rep.view());
    let critic_loss = logistic_critic_step(critic, critic_opt, real_in.view(), fake_in.view())?;

    let recon_target = concat_cols(rep.view(), noise.view());
    let inverse_loss = inverse_map_step(inverse, inverse_opt, actions.view(), recon_target.view())?;

    // Policy ascent on E[w + F2] - beta * reconstruction penalty.
    let tc = critic.forward_trace(fake_in.view())?;
    let w = tc.output().column(0).to_owned();
    let (log_u_raw, grad_u) = score(rep.view(), actions.view())?;
    // Per-state max normalization of log u (constant in a per state).
    let mut log_u = log_u_raw;
    for i in 0..b {
        let mx = (0..m)
            .map(|j| log_u[i * m + j])
            .fold(f64::NEG_INFINITY, f64::max);
        if mx.is_finite() {
            for j in 0..m {
                log_u[i * m + j] -= mx;
            }
        }
    }

    let nf = n as f64;
    let mut value = 0.0;
    let mut coef = vec![0.0; n];
    let mut unclamped = vec![false; n];
    for i in 0..n {
        let log_ref = fits[i / m].log_density(actions.row(i));
        let f2 = log_u[i] - log_ref;
        let f2c = f2.max(cfg.f2_clamp);
        unclamped[i] = f2 >= cfg.f2_clamp && f2.is_finite();
        let s = w[i] + f2c;
        value += apply_g(CriticObjective::Identity, s) / nf;
        coef[i] = apply_g_deriv(CriticObjective::Identity, s) / nf;
    }

    let mut upstream_c = Array2::zeros((n, 1));
    for i in 0..n {
        upstream_c[[i, 0]] = -coef[i];
    }
    let gc_input = critic.backward_input_only(&tc, upstream_c.view())?;
    // Only the action part of the critic input belongs to the policy.
    let mut da_grad = Array2::zeros((n, da));
    for i in 0..n {
        for j in 0..da {
            da_grad[[i, j]] = gc_input[[i, j]];
        }
    }
    for i in 0..n {
        if unclamped[i] && coef[i] != 0.0 {
            let ref_grad = fits[i / m].grad_log_density(actions.row(i));
            for j in 0..da {
                da_grad[[i, j]] -= coef[i] * (grad_u[[i, j]] - ref_grad[j]);
            }
        }
    }

    let tm = inverse.forward_trace(actions.view())?;
    let resid = &recon_target - tm.output();
    let penalty = resid.iter().map(|r| r * r).sum::<f64>() / nf;
    value -= beta * penalty;
    if beta != 0.0 {
        let upstream_m = &resid * (-2.0 * beta / nf);
        da_grad += &inverse.backward_input_only(&tm, upstream_m.view())?;
    }

    if !value.is_finite() {
        return Err(Error::Numeric("policy objective is not finite".into()));
    }
    let gp = policy.backward(&tp, da_grad.view())?;
    policy_opt.step(policy, &gp)?;

    let mut min_action_variance = f64::INFINITY;
    for j in 0..da {
        let col = actions.column(j);
        let mean = col.sum() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        min_action_variance = min_action_variance.min(var);
    }
    let max_abs_action = actions.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    Ok(PolicyUpdate {
        critic_loss,
        policy_objective: value,
        inverse_loss,
        min_action_variance,
        max_abs_action,
    })
}
