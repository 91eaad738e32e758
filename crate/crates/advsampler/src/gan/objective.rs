//! Generator objectives expressed through the logistic critic.
//!
//! The critic output `w` estimates a log likelihood ratio; the generator
//! ascends `g0(w)` for a selectable monotone `g0`. Besides the identity and
//! the log-sigmoid form, the divergence-induced `g(r)` choices are provided
//! with `r = exp(w)`. The total-variation choice is deliberately absent: its
//! `g` is a step function with zero gradient almost everywhere, so it cannot
//! drive the generator.

use serde::{Deserialize, Serialize};

use crate::util::{sigmoid, softplus};

/// Clamp on the critic score before exponentiation, guarding `exp` overflow.
pub const W_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticObjective {
    /// `g0(w) = w`: ascends the estimated log ratio directly (reverse-KL
    /// flavored; the adversarially-learned-likelihood-ratio setup).
    Identity,
    /// `g0(w) = log(1 + e^w)`: the classic GAN generator objective
    /// `-log[1/(1+r)]`, computed stably as softplus.
    LogSigmoid,
    /// `g(r) = r`.
    Kl,
    /// `g(r) = log r`.
    ReverseKl,
    /// `g(r) = sqrt(r)`.
    SquaredHellinger,
    /// `g(r) = (r-1)^2 + 2r`.
    Pearson,
    /// `g(r) = -1/r`.
    Neyman,
}

impl CriticObjective {
    pub fn all() -> &'static [CriticObjective] {
        use CriticObjective::*;
        &[Identity, LogSigmoid, Kl, ReverseKl, SquaredHellinger, Pearson, Neyman]
    }
}

/// `g0` applied to a critic score, with `w` clamped to `[-30, 30]`.
pub fn apply_g(objective: CriticObjective, w: f64) -> f64 {
    let w = w.clamp(-W_CLAMP, W_CLAMP);
    match objective {
        CriticObjective::Identity => w,
        CriticObjective::LogSigmoid => softplus(w),
        CriticObjective::Kl => w.exp(),
        CriticObjective::ReverseKl => w,
        CriticObjective::SquaredHellinger => (0.5 * w).exp(),
        CriticObjective::Pearson => {
            let e = w.exp();
            (e - 1.0) * (e - 1.0) + 2.0 * e
        }
        CriticObjective::Neyman => -(-w).exp(),
    }
}

/// Derivative of [`apply_g`] with respect to the (pre-clamp) score; zero in
/// the clamped region.
pub fn apply_g_deriv(objective: CriticObjective, w: f64) -> f64 {
    if !(-W_CLAMP..=W_CLAMP).contains(&w) {
        return 0.0;
    }
    match objective {
        CriticObjective::Identity => 1.0,
        CriticObjective::LogSigmoid => sigmoid(w),
        CriticObjective::Kl => w.exp(),
        CriticObjective::ReverseKl => 1.0,
        CriticObjective::SquaredHellinger => 0.5 * (0.5 * w).exp(),
        CriticObjective::Pearson => 2.0 * (2.0 * w).exp(),
        CriticObjective::Neyman => (-w).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn table_values() {
        // KL at r = 2 (w = ln 2) gives g = r = 2.
        assert_abs_diff_eq!(apply_g(CriticObjective::Kl, 2.0f64.ln()), 2.0, epsilon = 1e-12);
        // Reverse KL at r = 1 (w = 0) gives log r = 0.
        assert_eq!(apply_g(CriticObjective::ReverseKl, 0.0), 0.0);
        // GAN objective at r = 1 gives ln 2.
        assert_abs_diff_eq!(
            apply_g(CriticObjective::LogSigmoid, 0.0),
            2.0f64.ln(),
            epsilon = 1e-12
        );
        // Pearson at r = 1 gives 2, Hellinger gives 1, Neyman gives -1.
        assert_abs_diff_eq!(apply_g(CriticObjective::Pearson, 0.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(apply_g(CriticObjective::SquaredHellinger, 0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(apply_g(CriticObjective::Neyman, 0.0), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for &obj in CriticObjective::all() {
            for &w in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
                let fd = (apply_g(obj, w + h) - apply_g(obj, w - h)) / (2.0 * h);
                let an = apply_g_deriv(obj, w);
                assert!(
                    (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                    "{obj:?} at {w}: fd {fd} analytic {an}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn strictly_monotone_increasing(a in -14.0f64..14.0, gap in 0.01f64..5.0) {
            let b = (a + gap).min(14.5);
            for &obj in CriticObjective::all() {
                prop_assert!(
                    apply_g(obj, b) > apply_g(obj, a),
                    "{:?} not increasing between {} and {}", obj, a, b
                );
            }
        }
    }
}
