//! The toy control environment.

use ndarray::{array, Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};

/// Minimal episodic environment interface so alternative environments can be
/// plugged into the soft-Q trainer.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns the initial state.
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Array1<f64>;
    /// Applies a bounded action; returns `(next_state, reward, done)`.
    fn step(&mut self, action: ArrayView1<f64>) -> Result<(Array1<f64>, f64, bool)>;
}

/// 2D point mass in the box `[-5, 5]^2` with four goals at `(+-3, 0)` and
/// `(0, +-3)`. Dynamics: `s' = clip(s + 0.5 a)`; reward is the negative
/// distance to the nearest goal; episodes last 50 steps. Initial states are
/// uniform over the box.
#[derive(Debug, Clone)]
pub struct PointMassEnv {
    pos: Array1<f64>,
    t: usize,
    goals: Array2<f64>,
    horizon: usize,
    step_scale: f64,
    bound: f64,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self {
            pos: Array1::zeros(2),
            t: 0,
            goals: array![[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0], [0.0, -3.0]],
            horizon: 50,
            step_scale: 0.5,
            bound: 5.0,
        }
    }
}

impl PointMassEnv {
    pub fn goals(&self) -> &Array2<f64> {
        &self.goals
    }

    pub fn state(&self) -> &Array1<f64> {
        &self.pos
    }

    fn nearest_goal_distance(&self, pos: &Array1<f64>) -> f64 {
        self.goals
            .rows()
            .into_iter()
            .map(|g| {
                pos.iter()
                    .zip(g.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl Environment for PointMassEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Array1<f64> {
        self.pos = Array1::from_shape_fn(2, |_| rng.random_range(-self.bound..self.bound));
        self.t = 0;
        self.pos.clone()
    }

    fn step(&mut self, action: ArrayView1<f64>) -> Result<(Array1<f64>, f64, bool)> {
        if action.len() != 2 {
            return Err(Error::Dimension {
                context: "point-mass action",
                expected: 2,
                got: action.len(),
            });
        }
        if action.iter().any(|&a| a.abs() > 1.0 + 1e-9) {
            return Err(Error::Domain(format!(
                "action outside [-1, 1]^2: {:?}",
                action.to_vec()
            )));
        }
        for (p, &a) in self.pos.iter_mut().zip(action.iter()) {
            *p = (*p + self.step_scale * a).clamp(-self.bound, self.bound);
        }
        self.t += 1;
        let reward = -self.nearest_goal_distance(&self.pos);
        let done = self.t >= self.horizon;
        Ok((self.pos.clone(), reward, done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{stream_rng, Stream};
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_arithmetic() {
        let mut env = PointMassEnv::default();
        env.reset(&mut stream_rng(1, Stream::Env));
        env.pos = array![0.0, 0.0];
        let (s, r, done) = env.step(array![1.0, 0.0].view()).unwrap();
        assert_eq!(s, array![0.5, 0.0]);
        assert_abs_diff_eq!(r, -2.5, epsilon = 1e-12);
        assert!(!done);
    }

    #[test]
    fn zero_action_keeps_state() {
        let mut env = PointMassEnv::default();
        env.reset(&mut stream_rng(2, Stream::Env));
        let before = env.state().clone();
        let (s, r, _) = env.step(array![0.0, 0.0].view()).unwrap();
        assert_eq!(s, before);
        assert_abs_diff_eq!(r, -env.nearest_goal_distance(&before), epsilon = 1e-12);
    }

    #[test]
    fn boundary_clipping() {
        let mut env = PointMassEnv::default();
        env.reset(&mut stream_rng(3, Stream::Env));
        env.pos = array![5.0, 5.0];
        let (s, _, _) = env.step(array![1.0, 1.0].view()).unwrap();
        assert_eq!(s, array![5.0, 5.0]);
    }

    #[test]
    fn out_of_bounds_action_is_rejected() {
        let mut env = PointMassEnv::default();
        env.reset(&mut stream_rng(4, Stream::Env));
        assert!(matches!(
            env.step(array![1.5, 0.0].view()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut env = PointMassEnv::default();
        env.reset(&mut stream_rng(5, Stream::Env));
        let mut done = false;
        for k in 0..50 {
            let (_, _, d) = env.step(array![0.1, -0.1].view()).unwrap();
            done = d;
            assert_eq!(d, k == 49);
        }
        assert!(done);
    }
}
