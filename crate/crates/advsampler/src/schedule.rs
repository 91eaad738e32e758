//! Annealing schedule for the entropy-regularization weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight `beta` as a function of the training iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaSchedule {
    /// Hold `beta = 1` for the first `hold` iterations, then decay linearly to
    /// zero at iteration `total`.
    FixAndDecay { total: u64, hold: u64 },
    /// Constant weight in `[0, 1]`.
    Constant { value: f64 },
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::FixAndDecay { total, hold } => {
                if hold > total {
                    return Err(Error::Config(format!(
                        "schedule hold ({hold}) must not exceed total ({total})"
                    )));
                }
                Ok(())
            }
            BetaSchedule::Constant { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Config(format!(
                        "constant beta must lie in [0, 1], got {value}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The weight at `iter`; iterations past `total` clamp to zero.
    pub fn value(&self, iter: u64) -> f64 {
        match *self {
            BetaSchedule::FixAndDecay { total, hold } => {
                if iter <= hold {
                    1.0
                } else if iter >= total {
                    0.0
                } else {
                    1.0 - (iter - hold) as f64 / (total - hold) as f64
                }
            }
            BetaSchedule::Constant { value } => value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fix_and_decay_reference_points() {
        let s = BetaSchedule::FixAndDecay { total: 50_000, hold: 10_000 };
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(5_000), 1.0);
        assert_abs_diff_eq!(s.value(30_000), 0.5, epsilon = 1e-12);
        assert_eq!(s.value(50_000), 0.0);
        assert_eq!(s.value(60_000), 0.0);
    }

    #[test]
    fn schedule_is_nonincreasing_and_bounded() {
        let s = BetaSchedule::FixAndDecay { total: 1000, hold: 100 };
        let mut prev = f64::INFINITY;
        for it in 0..1200 {
            let v = s.value(it);
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn constant_and_validation() {
        assert_eq!(BetaSchedule::Constant { value: 0.5 }.value(123), 0.5);
        assert!(BetaSchedule::Constant { value: 1.5 }.validate().is_err());
        assert!(BetaSchedule::FixAndDecay { total: 10, hold: 20 }.validate().is_err());
    }
}
