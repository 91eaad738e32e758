//! Experiment orchestration: one directory of artifacts per seed.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::config::{ExperimentConfig, Mode};
use super::output::{
    read_samples, write_float_rows, write_grid_pmf, write_manifest, write_metric_rows,
    write_return_rows, write_samples, RunStatus,
};
use crate::dist::{target_by_id, GaussianNoise, TargetSpec};
use crate::error::{Error, Result};
use crate::gan::{train_gan, DataSource, GanConfig};
use crate::metrics::{out_of_domain_fraction, EvalContext, MetricRow};
use crate::nn::{self, AdamConfig, MlpNetwork};
use crate::ras::{train_ras, RasConfig};
use crate::seed::{stream_rng, Stream};
use crate::sql::{run_sql, PointMassEnv, SqlConfig, SqlTrainConfig};
use crate::svgd::{median_bandwidth, svgd_step, AmortizedSvgd, ParticleSet};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed_dirs: Vec<PathBuf>,
}

/// Runs the experiment for every configured seed; each seed writes into
/// `out_dir/seed_<s>/`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut seed_dirs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = cfg.out_dir.join(format!("seed_{seed}"));
        run_single(cfg, seed, &dir)?;
        seed_dirs.push(dir);
    }
    Ok(RunOutcome { seed_dirs })
}

/// One seed, one output directory. On failure the manifest still lands, with
/// the diagnostic inside.
pub fn run_single(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match dispatch(cfg, seed, dir) {
        Ok(()) => write_manifest(&dir.join("manifest.json"), cfg, seed, RunStatus::Ok, None),
        Err(e) => {
            let msg = e.to_string();
            write_manifest(&dir.join("manifest.json"), cfg, seed, RunStatus::Error, Some(&msg))?;
            Err(e)
        }
    }
}

fn adam_of(cfg: &ExperimentConfig) -> AdamConfig {
    AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        epsilon: cfg.adam_epsilon,
    }
}

fn eval_context(cfg: &ExperimentConfig, spec: &TargetSpec) -> EvalContext {
    EvalContext {
        grid: cfg.grid.clone(),
        log_density: spec.log_density_fn(),
        mixture: spec.mixture.clone(),
        bounds: spec.bounds(),
        n_samples: cfg.eval_samples,
        k_sigma: 3.0,
    }
}

fn save_net(dir: &Path, name: &str, net: &MlpNetwork) -> Result<()> {
    nn::save(net, &dir.join(format!("{name}.ckpt")))
}

fn dispatch(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    match cfg.mode {
        Mode::TrainGan => run_gan(cfg, seed, dir),
        Mode::TrainRas | Mode::Constrained => run_ras(cfg, seed, dir),
        Mode::Svgd => run_svgd_mode(cfg, seed, dir),
        Mode::AmortizedSvgd => run_amortized(cfg, seed, dir),
        Mode::Sql => run_sql_mode(cfg, seed, dir),
        Mode::Eval => run_eval(cfg, dir),
    }
}

fn finish_sampler_artifacts(
    cfg: &ExperimentConfig,
    spec: &TargetSpec,
    dir: &Path,
    trace: &[MetricRow],
    samples: Array2<f64>,
) -> Result<()> {
    write_metric_rows(&dir.join("metrics.csv"), trace)?;
    write_samples(&dir.join("samples.csv"), samples.view())?;
    let log_density = spec.log_density_fn();
    write_grid_pmf(&dir.join("grid_pmf.csv"), &cfg.grid, |x| log_density(x), samples.view())?;
    Ok(())
}

fn run_gan(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let spec = target_by_id(&cfg.target)?;
    let mixture = spec
        .mixture
        .clone()
        .ok_or_else(|| Error::Config(format!("target {:?} has no sampler", cfg.target)))?;
    let data = match cfg.dataset_size {
        None => DataSource::Mixture(mixture),
        Some(n) => {
            let mut rng = stream_rng(seed, Stream::DatasetInit);
            DataSource::Dataset(mixture.sample(n, &mut rng))
        }
    };
    let entropy = cfg
        .regularizer
        .needs_inverse_map()
        .then_some(cfg.schedule);
    let gc = GanConfig {
        objective: cfg.objective,
        entropy,
        iterations: cfg.iterations,
        batch_size: cfg.batch_size,
        adam: adam_of(cfg),
        critic_steps: cfg.critic_steps,
        noise_dim: cfg.noise_dim,
        generator_layers: cfg.generator_layers.clone(),
        critic_layers: cfg.critic_layers.clone(),
        inverse_layers: cfg.inverse_layers.clone(),
        eval_interval: cfg.eval_interval,
    };
    let eval = eval_context(cfg, &spec);
    let (trainer, trace) = train_gan(&gc, &data, &eval, seed)?;
    let samples = trainer.sample(cfg.final_samples, &mut stream_rng(seed, Stream::Eval))?;
    finish_sampler_artifacts(cfg, &spec, dir, &trace, samples)?;
    save_net(dir, "generator", &trainer.generator)?;
    save_net(dir, "critic", &trainer.critic)?;
    if let Some(inv) = &trainer.inverse {
        save_net(dir, "inverse", inv)?;
    }
    Ok(())
}

fn run_ras(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let spec = target_by_id(&cfg.target)?;
    let rc = RasConfig {
        objective: cfg.objective,
        regularizer: cfg.regularizer,
        schedule: cfg.schedule,
        reference: cfg.reference,
        refit_interval: cfg.refit_interval,
        f2_clamp: cfg.f2_clamp,
        iterations: cfg.iterations,
        batch_size: cfg.batch_size,
        adam: adam_of(cfg),
        critic_steps: cfg.critic_steps,
        noise_dim: cfg.noise_dim,
        generator_layers: cfg.generator_layers.clone(),
        critic_layers: cfg.critic_layers.clone(),
        inverse_layers: cfg.inverse_layers.clone(),
        eval_interval: cfg.eval_interval,
    };
    let eval = eval_context(cfg, &spec);
    let (trainer, trace) = train_ras(&rc, spec.target.clone(), &eval, seed)?;
    let samples = trainer.sample(cfg.final_samples, &mut stream_rng(seed, Stream::Eval))?;
    finish_sampler_artifacts(cfg, &spec, dir, &trace, samples)?;
    save_net(dir, "generator", &trainer.generator)?;
    save_net(dir, "critic", &trainer.critic)?;
    if let Some(inv) = &trainer.inverse {
        save_net(dir, "inverse", inv)?;
    }
    Ok(())
}

fn run_svgd_mode(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let spec = target_by_id(&cfg.target)?;
    let noise = GaussianNoise::new(spec.dim())?;
    let init = noise.sample(cfg.particles, &mut stream_rng(seed, Stream::Noise));
    let mut particles = ParticleSet::new(init, cfg.svgd_step_size)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let ood = |p: &ParticleSet| -> f64 {
        match spec.bounds() {
            Some((lo, hi)) => out_of_domain_fraction(p.positions.view(), lo, hi),
            None => f64::NAN,
        }
    };
    for step in 0..cfg.svgd_steps {
        particles = svgd_step(&particles, &spec.target)?;
        let s = step + 1;
        if s % cfg.snapshot_interval == 0 || s == cfg.svgd_steps {
            rows.push(vec![
                s as f64,
                median_bandwidth(particles.positions.view()),
                ood(&particles),
            ]);
            write_samples(
                &dir.join(format!("particles_{s:06}.csv")),
                particles.positions.view(),
            )?;
        }
    }
    write_float_rows(
        &dir.join("metrics.csv"),
        &["step", "bandwidth", "out_of_domain_fraction"],
        &rows,
    )?;
    write_samples(&dir.join("samples.csv"), particles.positions.view())?;
    let log_density = spec.log_density_fn();
    write_grid_pmf(
        &dir.join("grid_pmf.csv"),
        &cfg.grid,
        |x| log_density(x),
        particles.positions.view(),
    )?;
    Ok(())
}

fn run_amortized(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let spec = target_by_id(&cfg.target)?;
    let mut am = AmortizedSvgd::new(
        &cfg.generator_layers,
        spec.bounds(),
        adam_of(cfg),
        cfg.svgd_step_size,
        seed,
    )?;
    let noise = GaussianNoise::new(cfg.noise_dim)?;
    let mut noise_rng = stream_rng(seed, Stream::Noise);
    let mut eval_rng = stream_rng(seed, Stream::Eval);
    let eval = eval_context(cfg, &spec);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for iter in 0..cfg.iterations {
        let eps = noise.sample(cfg.batch_size, &mut noise_rng);
        let loss = am.step(eps.view(), &spec.target)?;
        let s = iter + 1;
        if s % cfg.eval_interval == 0 || s == cfg.iterations {
            let samples = am.sample(cfg.eval_samples, &mut eval_rng)?;
            let outcome = eval.evaluate(samples.view())?;
            rows.push(vec![
                s as f64,
                loss,
                outcome.sym_kl,
                outcome.out_of_domain.unwrap_or(f64::NAN),
            ]);
        }
    }
    write_float_rows(
        &dir.join("metrics.csv"),
        &["iteration", "l2_loss", "sym_kl", "out_of_domain_fraction"],
        &rows,
    )?;
    let samples = am.sample(cfg.final_samples, &mut eval_rng)?;
    write_samples(&dir.join("samples.csv"), samples.view())?;
    let log_density = spec.log_density_fn();
    write_grid_pmf(&dir.join("grid_pmf.csv"), &cfg.grid, |x| log_density(x), samples.view())?;
    save_net(dir, "generator", &am.generator)?;
    Ok(())
}

fn run_sql_mode(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let env = PointMassEnv::default();
    let agent_cfg = SqlConfig {
        state_dim: 2,
        action_dim: 2,
        m_samples: cfg.m_samples,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        adam: adam_of(cfg),
        f2_clamp: cfg.f2_clamp,
        policy_layers: cfg.generator_layers.clone(),
        q_layers: cfg.q_layers.clone(),
        critic_layers: cfg.critic_layers.clone(),
        inverse_layers: cfg.inverse_layers.clone(),
    };
    let train_cfg = SqlTrainConfig {
        agent: agent_cfg,
        total_steps: cfg.env_steps,
        batch_size: cfg.batch_size,
        buffer_capacity: cfg.buffer_capacity,
        warmup: cfg.warmup,
        sync_interval: cfg.sync_interval,
        eval_interval: cfg.eval_interval,
        eval_rollouts: cfg.eval_rollouts,
        schedule: cfg.schedule,
    };
    let (agent, trace, _stats) = run_sql(&train_cfg, env, seed)?;
    write_return_rows(&dir.join("metrics.csv"), &trace)?;
    save_net(dir, "policy", &agent.policy)?;
    save_net(dir, "q", &agent.q)?;
    save_net(dir, "critic", &agent.critic)?;
    save_net(dir, "inverse", &agent.inverse)?;
    Ok(())
}

fn run_eval(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let spec = target_by_id(&cfg.target)?;
    let path = cfg
        .samples_path
        .as_ref()
        .ok_or_else(|| Error::Config("eval mode needs a samples_path".into()))?;
    let samples = read_samples(path)?;
    let eval = eval_context(cfg, &spec);
    let outcome = eval.evaluate(samples.view())?;
    write_float_rows(
        &dir.join("metrics.csv"),
        &[
            "sym_kl",
            "clip_fraction",
            "modes_hit",
            "high_quality_fraction",
            "out_of_domain_fraction",
        ],
        &[vec![
            outcome.sym_kl,
            outcome.clip_fraction,
            outcome.modes_hit.map(|m| m as f64).unwrap_or(f64::NAN),
            outcome.high_quality_fraction.unwrap_or(f64::NAN),
            outcome.out_of_domain.unwrap_or(f64::NAN),
        ]],
    )?;
    let log_density = spec.log_density_fn();
    write_grid_pmf(&dir.join("grid_pmf.csv"), &cfg.grid, |x| log_density(x), samples.view())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tiny_ras_config(dir: &Path) -> ExperimentConfig {
        super::super::config::config_from_value(
            json!({
                "mode": "train_ras",
                "target": "gmm8",
                "iterations": 30,
                "batch_size": 64,
                "eval_interval": 15,
                "eval_samples": 2000,
                "final_samples": 2000,
                "generator_layers": [2, 16, 2],
                "critic_layers": [2, 16, 1],
                "inverse_layers": [2, 16, 2],
                "seeds": [0, 1],
            }),
            &[],
            None,
            Some(dir.to_path_buf()),
        )
        .unwrap()
    }

    #[test]
    fn multi_seed_run_writes_sibling_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_ras_config(tmp.path());
        let outcome = run(&cfg).unwrap();
        assert_eq!(outcome.seed_dirs.len(), 2);
        for dir in &outcome.seed_dirs {
            for file in ["metrics.csv", "samples.csv", "grid_pmf.csv", "manifest.json", "generator.ckpt"] {
                assert!(dir.join(file).exists(), "missing {file} in {dir:?}");
            }
            let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
            let last = metrics.lines().last().unwrap();
            // The final row carries a sym_kl value.
            assert!(last.split(',').nth(4).unwrap().parse::<f64>().is_ok());
        }
    }

    #[test]
    fn same_seed_reruns_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = tiny_ras_config(tmp.path());
        cfg.seeds = vec![3];
        let a_dir = tmp.path().join("a");
        let b_dir = tmp.path().join("b");
        run_single(&cfg, 3, &a_dir).unwrap();
        run_single(&cfg, 3, &b_dir).unwrap();
        let a = std::fs::read(a_dir.join("metrics.csv")).unwrap();
        let b = std::fs::read(b_dir.join("metrics.csv")).unwrap();
        assert_eq!(a, b);
        let a = std::fs::read(a_dir.join("samples.csv")).unwrap();
        let b = std::fs::read(b_dir.join("samples.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_mode_consumes_a_sample_file() {
        let tmp = tempfile::tempdir().unwrap();
        // Produce samples with a quick run, then point eval mode at them.
        let cfg = tiny_ras_config(tmp.path());
        let dir = tmp.path().join("run");
        run_single(&cfg, 0, &dir).unwrap();
        let eval_cfg = super::super::config::config_from_value(
            json!({
                "mode": "eval",
                "target": "gmm8",
                "samples_path": dir.join("samples.csv"),
            }),
            &[],
            None,
            Some(tmp.path().join("eval_out")),
        )
        .unwrap();
        let outcome = run(&eval_cfg).unwrap();
        let metrics = std::fs::read_to_string(outcome.seed_dirs[0].join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 2);
        assert!(metrics.starts_with("sym_kl,"));
    }

    #[test]
    fn failed_run_writes_error_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let eval_cfg = super::super::config::config_from_value(
            json!({
                "mode": "eval",
                "target": "gmm8",
                "samples_path": tmp.path().join("does_not_exist.csv"),
            }),
            &[],
            None,
            Some(tmp.path().join("out")),
        )
        .unwrap();
        assert!(run(&eval_cfg).is_err());
        let manifest =
            std::fs::read_to_string(tmp.path().join("out/seed_0/manifest.json")).unwrap();
        assert!(manifest.contains("\"status\": \"error\""), "{manifest}");
    }
}
