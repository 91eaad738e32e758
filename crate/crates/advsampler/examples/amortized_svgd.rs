//! Amortized SVGD: fitting a generator to transported particles.
//!
//! The generator's own samples take one SVGD step toward the target and the
//! generator chases them under an l2 loss. On a bimodal bounded target this
//! collapses toward a mode: the generator's sample variance ends up at a
//! fraction of the target's. Compare with `constrained_sampling`, which
//! covers both modes.
//!
//! ```text
//! cargo run --release --example amortized_svgd
//! ```

use advsampler::dist::target_by_id;
use advsampler::nn::AdamConfig;
use advsampler::seed::{stream_rng, Stream};
use advsampler::svgd::AmortizedSvgd;
use advsampler::dist::GaussianNoise;

fn main() -> advsampler::Result<()> {
    let spec = target_by_id("u2")?;

    // Target variance by quadrature on the known density.
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let n = 4000;
    for i in 0..n {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
        let u = spec.target.log_u(ndarray::array![x].view()).exp();
        z += u;
        m1 += x * u;
        m2 += x * x * u;
    }
    let target_mean = m1 / z;
    let target_var = m2 / z - target_mean * target_mean;

    let mut am = AmortizedSvgd::new(
        &[2, 128, 128, 1],
        spec.bounds(),
        AdamConfig::with_lr(1e-4),
        0.05,
        0,
    )?;
    let noise = GaussianNoise::new(2)?;
    let mut nr = stream_rng(0, Stream::Noise);
    let mut loss = f64::NAN;
    for _ in 0..2000 {
        let eps = noise.sample(512, &mut nr);
        loss = am.step(eps.view(), &spec.target)?;
    }

    let samples = am.sample(20_000, &mut stream_rng(1, Stream::Eval))?;
    let mean = samples.column(0).sum() / samples.nrows() as f64;
    let var = samples
        .column(0)
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / samples.nrows() as f64;
    println!("u2 target: mean {target_mean:.4}, variance {target_var:.4}");
    println!(
        "amortized generator: mean {mean:.4}, variance {var:.4} ({:.0}% of target), final l2 loss {loss:.2e}",
        100.0 * var / target_var
    );
    Ok(())
}
