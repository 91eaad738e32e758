//! The logistic critic recovers a log likelihood ratio.
//!
//! Trained to tell `N(0,1)` samples from `N(1,1)` samples, the critic's raw
//! output converges to the closed-form log ratio `w(x) = 0.5 - x`, the
//! quantity every generator update in this crate is built on. Runs in under
//! a minute.
//!
//! ```text
//! cargo run --release --example critic_ratio
//! ```

use advsampler::gan::logistic_critic_step;
use advsampler::nn::{AdamConfig, AdamState, MlpNetwork, OutputActivation};
use advsampler::seed::{stream_rng, Stream};
use ndarray::{array, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> advsampler::Result<()> {
    let mut critic = MlpNetwork::init(
        &[1, 128, 128, 1],
        OutputActivation::Linear,
        &mut stream_rng(0, Stream::CriticInit),
    )?;
    let mut opt = AdamState::new(&critic, AdamConfig::with_lr(1e-3));
    let mut data = stream_rng(0, Stream::Data);
    for step in 0..4000 {
        let real = Array2::from_shape_fn((512, 1), |_| data.sample::<f64, _>(StandardNormal));
        let fake = Array2::from_shape_fn((512, 1), |_| 1.0 + data.sample::<f64, _>(StandardNormal));
        let objective = logistic_critic_step(&mut critic, &mut opt, real.view(), fake.view())?;
        if (step + 1) % 1000 == 0 {
            println!("step {:>5}: critic objective {objective:.4}", step + 1);
        }
    }

    println!("{:>6} {:>10} {:>10}", "x", "critic", "0.5 - x");
    let mut total_err = 0.0;
    let grid = 13;
    for i in 0..grid {
        let x = -1.0 + 3.0 * i as f64 / (grid - 1) as f64;
        let w = critic.forward(array![[x]].view())?[[0, 0]];
        total_err += (w - (0.5 - x)).abs() / grid as f64;
        println!("{x:>6.2} {w:>10.4} {:>10.4}", 0.5 - x);
    }
    println!("mean absolute error on [-1, 2]: {total_err:.4}");
    Ok(())
}
