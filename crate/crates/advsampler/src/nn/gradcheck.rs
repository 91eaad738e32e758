//! Finite-difference gradient checking.
//!
//! The checker only ever calls [`MlpNetwork::forward`]; it never touches the
//! analytic backward pass it is used to verify.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::mlp::{MlpNetwork, OutputActivation};
use crate::error::Result;
use crate::seed::{stream_rng, Stream};

/// Central-difference gradients of `sum(upstream * forward(batch))` with
/// respect to every parameter.
pub fn finite_diff_param_grads(
    net: &mut MlpNetwork,
    batch: &Array2<f64>,
    upstream: &Array2<f64>,
    step: f64,
) -> Result<(Vec<Array2<f64>>, Vec<Array1<f64>>)> {
    let loss = |net: &MlpNetwork| -> Result<f64> {
        Ok((&net.forward(batch.view())? * upstream).sum())
    };
    let mut gw = Vec::new();
    let mut gb = Vec::new();
    for l in 0..net.num_layers() {
        let shape = net.weights()[l].dim();
        let mut g = Array2::zeros(shape);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let (ws, _) = net.params_mut();
                let orig = ws[l][[i, j]];
                net.params_mut().0[l][[i, j]] = orig + step;
                let lp = loss(net)?;
                net.params_mut().0[l][[i, j]] = orig - step;
                let lm = loss(net)?;
                net.params_mut().0[l][[i, j]] = orig;
                g[[i, j]] = (lp - lm) / (2.0 * step);
            }
        }
        gw.push(g);
        let n = net.biases()[l].len();
        let mut g = Array1::zeros(n);
        for i in 0..n {
            let orig = net.biases()[l][i];
            net.params_mut().1[l][i] = orig + step;
            let lp = loss(net)?;
            net.params_mut().1[l][i] = orig - step;
            let lm = loss(net)?;
            net.params_mut().1[l][i] = orig;
            g[i] = (lp - lm) / (2.0 * step);
        }
        gb.push(g);
    }
    Ok((gw, gb))
}

/// Worst relative disagreement between analytic and central-difference
/// gradients (step `1e-5`) for a freshly initialized network of the given
/// shape, measured at `points` random inputs with random upstream weights.
///
/// Covers every parameter and the input gradient. Relative error uses
/// `|a - n| / max(|a|, |n|, 1e-5)`: gradients below `1e-5` in magnitude are
/// compared absolutely (to `1e-9` at the `1e-4` threshold), since the
/// central difference itself carries cancellation noise of roughly
/// `eps_machine * |loss| / (2 * step)` there.
pub fn max_grad_rel_err(
    layer_sizes: &[usize],
    output: OutputActivation,
    points: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, Stream::GeneratorInit);
    let mut net = MlpNetwork::init(layer_sizes, output, &mut rng)?;
    let d_in = net.input_dim();
    let d_out = net.output_dim();
    let batch = Array2::from_shape_fn((points, d_in), |_| rng.random_range(-1.5..1.5));
    let upstream = Array2::from_shape_fn((points, d_out), |_| rng.random_range(-1.0..1.0));

    let trace = net.forward_trace(batch.view())?;
    let grad = net.backward(&trace, upstream.view())?;

    let step = 1e-5;
    let (gw, gb) = finite_diff_param_grads(&mut net, &batch, &upstream, step)?;

    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-5);
    let mut worst = 0.0f64;
    for l in 0..net.num_layers() {
        for (a, n) in grad.weights[l].iter().zip(gw[l].iter()) {
            worst = worst.max(rel(*a, *n));
        }
        for (a, n) in grad.biases[l].iter().zip(gb[l].iter()) {
            worst = worst.max(rel(*a, *n));
        }
    }
    let mut b = batch.clone();
    for i in 0..points {
        for j in 0..d_in {
            let orig = b[[i, j]];
            b[[i, j]] = orig + step;
            let lp = (&net.forward(b.view())? * &upstream).sum();
            b[[i, j]] = orig - step;
            let lm = (&net.forward(b.view())? * &upstream).sum();
            b[[i, j]] = orig;
            worst = worst.max(rel(grad.input[[i, j]], (lp - lm) / (2.0 * step)));
        }
    }
    Ok(worst)
}
