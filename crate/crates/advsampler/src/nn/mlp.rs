//! Dense feed-forward networks with hand-rolled reverse-mode gradients.
//!
//! The topology is fixed (affine layers, ReLU hidden activations, a selectable
//! output activation), which keeps backprop a short explicit loop instead of a
//! general computation graph. All arithmetic is `f64`.
//!
//! Shapes are row-major batches: inputs are `B x d_in`, outputs `B x d_out`,
//! and layer `l` holds a `sizes[l] x sizes[l+1]` weight matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied on the final layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    Tanh,
    Sigmoid,
}

/// A fully-connected network `x -> W_L(relu(...relu(W_1 x + b_1)...)) + b_L`
/// followed by the output activation.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output_activation: OutputActivation,
}

/// Cached activations from one forward pass, consumed by [`MlpNetwork::backward`].
pub struct ForwardTrace {
    input: Array2<f64>,
    /// Post-activation output of every layer; the last entry is the network output.
    post: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("trace holds at least one layer")
    }
}

/// Parameter gradients mirroring a network's shape, plus the gradient with
/// respect to the batch input.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Sums another gradient of the same shape into this one (input included).
    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
        self.input += &other.input;
    }
}

impl MlpNetwork {
    /// Creates a network with Xavier-uniform weights
    /// (`U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`) and zero biases.
    /// Deterministic given the RNG state.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least 2 layer sizes, got {:?}",
                layer_sizes
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {:?}",
                layer_sizes
            )));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output_activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layer sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// Replaces the parameters wholesale; shapes must match the existing ones.
    pub fn set_params(&mut self, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<()> {
        if weights.len() != self.weights.len() || biases.len() != self.biases.len() {
            return Err(Error::Dimension {
                context: "set_params layer count",
                expected: self.weights.len(),
                got: weights.len(),
            });
        }
        for (new, old) in weights.iter().zip(&self.weights) {
            if new.dim() != old.dim() {
                return Err(Error::Dimension {
                    context: "set_params weight shape",
                    expected: old.len(),
                    got: new.len(),
                });
            }
        }
        self.weights = weights;
        self.biases = biases;
        Ok(())
    }

    pub fn assert_finite(&self) -> Result<()> {
        let ok = self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Numeric("network parameters are not finite".into()))
        }
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                context: "forward input columns",
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass. Pure: identical inputs yield identical outputs.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut a = batch.to_owned();
        let last = self.num_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                apply_output(&mut z, self.output_activation);
            }
            a = z;
        }
        Ok(a)
    }

    /// Forward pass that caches every layer's activations for a later backward pass.
    pub fn forward_trace(&self, batch: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&batch)?;
        let input = batch.to_owned();
        let mut post = Vec::with_capacity(self.num_layers());
        let last = self.num_layers() - 1;
        let mut a = input.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                apply_output(&mut z, self.output_activation);
            }
            post.push(z.clone());
            a = z;
        }
        Ok(ForwardTrace { input, post })
    }

    /// Reverse-mode gradients of the scalar `sum(upstream * output)` with
    /// respect to every parameter and to the batch input.
    ///
    /// `upstream` is `dL/d(output)`, shape `B x d_out`; any 1/B averaging is the
    /// caller's business. ReLU's derivative at exactly zero is taken as zero.
    pub fn backward(&self, trace: &ForwardTrace, upstream: ArrayView2<f64>) -> Result<Gradient> {
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Dimension {
                context: "backward upstream shape",
                expected: out.len(),
                got: upstream.len(),
            });
        }

        let mut delta = upstream.to_owned();
        chain_output(&mut delta, out, self.output_activation);

        let n_layers = self.num_layers();
        let mut gw: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        let mut gb: Vec<Array1<f64>> = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let a_prev = if l == 0 {
                trace.input.view()
            } else {
                trace.post[l - 1].view()
            };
            gw.push(a_prev.t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            let mut d_prev = delta.dot(&self.weights[l].t());
            if l > 0 {
                // ReLU mask: post-activation zero means the unit was clipped.
                Zip::from(&mut d_prev)
                    .and(&trace.post[l - 1])
                    .for_each(|d, &y| {
                        if y <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = d_prev;
        }
        gw.reverse();
        gb.reverse();
        Ok(Gradient {
            weights: gw,
            biases: gb,
            input: delta,
        })
    }

    /// Like [`MlpNetwork::backward`] but returns only the input gradient,
    /// skipping the parameter-gradient GEMMs. Used where a frozen network sits
    /// inside another network's objective.
    pub fn backward_input_only(
        &self,
        trace: &ForwardTrace,
        upstream: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Dimension {
                context: "backward upstream shape",
                expected: out.len(),
                got: upstream.len(),
            });
        }
        let mut delta = upstream.to_owned();
        chain_output(&mut delta, out, self.output_activation);
        for l in (0..self.num_layers()).rev() {
            let mut d_prev = delta.dot(&self.weights[l].t());
            if l > 0 {
                Zip::from(&mut d_prev)
                    .and(&trace.post[l - 1])
                    .for_each(|d, &y| {
                        if y <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = d_prev;
        }
        Ok(delta)
    }
}

fn apply_output(z: &mut Array2<f64>, act: OutputActivation) {
    match act {
        OutputActivation::Linear => {}
        OutputActivation::Tanh => z.mapv_inplace(f64::tanh),
        OutputActivation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
    }
}

/// Multiplies `delta` by the output activation's derivative, expressed through
/// the post-activation values `y`.
fn chain_output(delta: &mut Array2<f64>, y: &Array2<f64>, act: OutputActivation) {
    match act {
        OutputActivation::Linear => {}
        OutputActivation::Tanh => Zip::from(delta).and(y).for_each(|d, &y| *d *= 1.0 - y * y),
        OutputActivation::Sigmoid => Zip::from(delta).and(y).for_each(|d, &y| *d *= y * (1.0 - y)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::max_grad_rel_err;
    use crate::seed::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn forward_linear_affine_by_hand() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let mut net = MlpNetwork::init(&[2, 2], OutputActivation::Linear, &mut rng).unwrap();
        net.set_params(
            vec![array![[2.0, 0.0], [0.0, 3.0]]],
            vec![array![1.0, -1.0]],
        )
        .unwrap();
        let out = net.forward(array![[1.0, 1.0]].view()).unwrap();
        assert_eq!(out, array![[3.0, 2.0]]);
    }

    #[test]
    fn relu_clips_negative_preactivations() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let mut net = MlpNetwork::init(&[2, 2, 2], OutputActivation::Linear, &mut rng).unwrap();
        // First layer passes input through, so hidden pre-activations are [-1, 2].
        net.set_params(
            vec![
                array![[1.0, 0.0], [0.0, 1.0]],
                array![[1.0, 0.0], [0.0, 1.0]],
            ],
            vec![array![0.0, 0.0], array![0.0, 0.0]],
        )
        .unwrap();
        let out = net.forward(array![[-1.0, 2.0]].view()).unwrap();
        assert_eq!(out, array![[0.0, 2.0]]);
    }

    #[test]
    fn tanh_output_at_zero_is_zero() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let mut net = MlpNetwork::init(&[1, 1], OutputActivation::Tanh, &mut rng).unwrap();
        net.set_params(vec![array![[1.0]]], vec![array![0.0]]).unwrap();
        let out = net.forward(array![[0.0]].view()).unwrap();
        assert_eq!(out[[0, 0]], 0.0);
    }

    #[test]
    fn backward_tanh_scalar_matches_hand_derivative() {
        // f(w) = tanh(w * x) with w = 1, x = 0.5: df/dw = x * (1 - tanh(wx)^2).
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let mut net = MlpNetwork::init(&[1, 1], OutputActivation::Tanh, &mut rng).unwrap();
        net.set_params(vec![array![[1.0]]], vec![array![0.0]]).unwrap();
        let batch = array![[0.5]];
        let trace = net.forward_trace(batch.view()).unwrap();
        let grad = net.backward(&trace, array![[1.0]].view()).unwrap();
        assert_abs_diff_eq!(grad.weights[0][[0, 0]], 0.39322, epsilon = 1e-5);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = stream_rng(1, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[3, 8, 2], OutputActivation::Linear, &mut rng).unwrap();
        let batch = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let trace = net.forward_trace(batch.view()).unwrap();
        let grad = net.backward(&trace, Array2::zeros((4, 2)).view()).unwrap();
        assert!(grad.weights.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(grad.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(grad.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layer_relu_gradients_match_finite_differences() {
        let worst = max_grad_rel_err(&[3, 16, 2], OutputActivation::Linear, 10, 9).unwrap();
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn input_only_backward_matches_full_backward_bitwise() {
        let mut rng = stream_rng(21, Stream::GeneratorInit);
        for act in [OutputActivation::Linear, OutputActivation::Tanh, OutputActivation::Sigmoid] {
            let net = MlpNetwork::init(&[3, 16, 8, 2], act, &mut rng).unwrap();
            let batch = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.5..1.5));
            let upstream = Array2::from_shape_fn((7, 2), |_| rng.random_range(-1.0..1.0));
            let trace = net.forward_trace(batch.view()).unwrap();
            let full = net.backward(&trace, upstream.view()).unwrap();
            let input_only = net.backward_input_only(&trace, upstream.view()).unwrap();
            assert_eq!(full.input, input_only);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let mut a = stream_rng(7, Stream::GeneratorInit);
        let mut b = stream_rng(7, Stream::GeneratorInit);
        let na = MlpNetwork::init(&[2, 128, 128, 2], OutputActivation::Linear, &mut a).unwrap();
        let nb = MlpNetwork::init(&[2, 128, 128, 2], OutputActivation::Linear, &mut b).unwrap();
        assert_eq!(na.weights, nb.weights);
        assert_eq!(na.biases, nb.biases);
    }

    #[test]
    fn param_count_matches_arithmetic() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[2, 128, 128, 2], OutputActivation::Linear, &mut rng).unwrap();
        assert_eq!(net.param_count(), 17_154);
    }

    #[test]
    fn biases_start_at_zero() {
        let mut rng = stream_rng(3, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[4, 16, 3], OutputActivation::Sigmoid, &mut rng).unwrap();
        assert!(net.biases().iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn empty_layer_list_is_a_config_error() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        assert!(MlpNetwork::init(&[], OutputActivation::Linear, &mut rng).is_err());
        assert!(MlpNetwork::init(&[5], OutputActivation::Linear, &mut rng).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = stream_rng(11, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[2, 32, 2], OutputActivation::Tanh, &mut rng).unwrap();
        let batch = Array2::from_shape_fn((8, 2), |_| rng.random_range(-2.0..2.0));
        let a = net.forward(batch.view()).unwrap();
        let b = net.forward(batch.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_a_dimension_error() {
        let mut rng = stream_rng(0, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[3, 4, 1], OutputActivation::Linear, &mut rng).unwrap();
        let bad = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            net.forward(bad.view()),
            Err(Error::Dimension { .. })
        ));
    }
}
