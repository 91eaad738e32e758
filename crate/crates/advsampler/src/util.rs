//! Small numeric helpers shared across modules.

use ndarray::Array2;

/// Affine rescale from a tanh-bounded network output to a target interval.
/// `Identity` for unconstrained domains.
#[derive(Debug, Clone, Copy)]
pub(crate) enum AffineOutput {
    Identity,
    Bounded { mid: f64, half: f64 },
}

impl AffineOutput {
    pub(crate) fn from_bounds(bounds: Option<(f64, f64)>) -> Self {
        match bounds {
            Some((lo, hi)) => AffineOutput::Bounded { mid: 0.5 * (lo + hi), half: 0.5 * (hi - lo) },
            None => AffineOutput::Identity,
        }
    }

    pub(crate) fn apply(&self, y: &Array2<f64>) -> Array2<f64> {
        match *self {
            AffineOutput::Identity => y.clone(),
            AffineOutput::Bounded { mid, half } => y.mapv(|v| mid + half * v),
        }
    }

    /// Chain rule through the rescale: multiplies the upstream by `dx/dy`.
    pub(crate) fn chain(&self, dx: Array2<f64>) -> Array2<f64> {
        match *self {
            AffineOutput::Identity => dx,
            AffineOutput::Bounded { half, .. } => dx * half,
        }
    }
}

/// Numerically stable `log(sum(exp(values)))`.
pub(crate) fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Stable `log(1 + exp(x))`.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Median of a slice (average of the two middle order statistics for even
/// lengths). The slice is sorted in place.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
