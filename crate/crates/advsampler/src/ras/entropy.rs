//! Numeric realization of the cycle-consistency entropy bound.
//!
//! For a sampler `x = h(eps)` with base noise `eps ~ N(0, I_d)` and a
//! probabilistic inverse `t(eps | x) = N(eps; mu(x), I)`, the entropy of the
//! sample distribution is lower-bounded by
//! `H(q0) + E[log t(eps | h(eps))]`. With the identity sampler both sides are
//! closed-form: entropy `d/2 ln(2 pi e)` versus bound `d/2` for the perfect
//! inverse `mu(x) = x`.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy)]
pub struct EntropyBound {
    /// The exact entropy of the sample distribution (left-hand side).
    pub entropy: f64,
    /// The inverse-map lower bound (right-hand side).
    pub bound: f64,
}

impl EntropyBound {
    pub fn holds(&self) -> bool {
        self.entropy >= self.bound - 1e-9
    }
}

/// Closed-form case: identity sampler on `N(0, I_d)` with the perfect inverse.
pub fn entropy_bound_identity(dim: usize) -> EntropyBound {
    let d = dim as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    EntropyBound {
        entropy: 0.5 * d * (two_pi * std::f64::consts::E).ln(),
        bound: 0.5 * d,
    }
}

/// Monte-Carlo bound for an arbitrary inverse map, still with the identity
/// sampler (so the left-hand side stays closed-form). Any inverse map keeps
/// the inequality valid; worse maps only loosen the bound.
pub fn entropy_bound_mc<R, F>(dim: usize, inverse: F, n: usize, rng: &mut R) -> EntropyBound
where
    R: Rng + ?Sized,
    F: Fn(ArrayView1<f64>) -> Array1<f64>,
{
    let d = dim as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let h_q0 = 0.5 * d * (two_pi * std::f64::consts::E).ln();
    let mut mean_log_t = 0.0;
    for _ in 0..n {
        let eps = Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
        let mu = inverse(eps.view());
        let sq: f64 = eps.iter().zip(mu.iter()).map(|(e, m)| (e - m) * (e - m)).sum();
        mean_log_t += (-0.5 * d * two_pi.ln() - 0.5 * sq) / n as f64;
    }
    EntropyBound { entropy: h_q0, bound: h_q0 + mean_log_t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_values() {
        let b1 = entropy_bound_identity(1);
        assert_abs_diff_eq!(b1.entropy, 1.4189, epsilon = 1e-4);
        assert_abs_diff_eq!(b1.bound, 0.5, epsilon = 1e-12);
        assert!(b1.holds());

        let b2 = entropy_bound_identity(2);
        assert_abs_diff_eq!(b2.entropy, 2.8379, epsilon = 1e-4);
        assert_abs_diff_eq!(b2.bound, 1.0, epsilon = 1e-12);
        assert!(b2.holds());
    }

    #[test]
    fn perfect_inverse_matches_closed_form() {
        let mut rng = stream_rng(1, Stream::Eval);
        let mc = entropy_bound_mc(2, |x| x.to_owned(), 10_000, &mut rng);
        let exact = entropy_bound_identity(2);
        assert_abs_diff_eq!(mc.bound, exact.bound, epsilon = 1e-9);
    }

    #[test]
    fn suboptimal_inverse_loosens_but_keeps_the_bound() {
        let mut rng = stream_rng(2, Stream::Eval);
        let zero = entropy_bound_mc(2, |x| ndarray::Array1::zeros(x.len()), 20_000, &mut rng);
        let exact = entropy_bound_identity(2);
        assert!(zero.bound < exact.bound);
        assert!(zero.holds());
        // E||eps||^2 = d drops the bound by d/2, to about zero in 2D.
        assert_abs_diff_eq!(zero.bound, 0.0, epsilon = 0.05);
    }
}
