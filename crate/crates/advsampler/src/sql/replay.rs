//! Ring-buffer experience storage.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Array1<f64>,
    pub action: Array1<f64>,
    pub reward: f64,
    pub next_state: Array1<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer: once full, the oldest transition is
/// overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

/// A sampled minibatch in batched array form.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, data: Vec::new(), next: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }

    /// Uniform-with-replacement minibatch.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Minibatch> {
        if self.data.is_empty() {
            return Err(Error::InsufficientData("replay buffer is empty".into()));
        }
        let ds = self.data[0].state.len();
        let da = self.data[0].action.len();
        let mut states = Array2::zeros((n, ds));
        let mut actions = Array2::zeros((n, da));
        let mut rewards = Array1::zeros(n);
        let mut next_states = Array2::zeros((n, ds));
        let mut dones = Vec::with_capacity(n);
        for i in 0..n {
            let t = &self.data[rng.random_range(0..self.data.len())];
            states.index_axis_mut(Axis(0), i).assign(&t.state);
            actions.index_axis_mut(Axis(0), i).assign(&t.action);
            rewards[i] = t.reward;
            next_states.index_axis_mut(Axis(0), i).assign(&t.next_state);
            dones.push(t.done);
        }
        Ok(Minibatch { states, actions, rewards, next_states, dones })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn tag(i: usize) -> Transition {
        Transition {
            state: array![i as f64, 0.0],
            action: array![0.0, 0.0],
            reward: i as f64,
            next_state: array![0.0, 0.0],
            done: false,
        }
    }

    #[test]
    fn ring_keeps_most_recent() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for i in 0..7 {
            buf.push(tag(i));
        }
        let mut rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rewards, vec![4.0, 5.0, 6.0]);
    }

    proptest! {
        #[test]
        fn ring_matches_reference_deque(capacity in 1usize..20, inserts in 0usize..100) {
            let mut buf = ReplayBuffer::new(capacity).unwrap();
            let mut oracle: VecDeque<usize> = VecDeque::new();
            for i in 0..inserts {
                buf.push(tag(i));
                oracle.push_back(i);
                if oracle.len() > capacity {
                    oracle.pop_front();
                }
            }
            let mut got: Vec<usize> = buf.iter().map(|t| t.reward as usize).collect();
            got.sort_unstable();
            let mut want: Vec<usize> = oracle.into_iter().collect();
            want.sort_unstable();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn sampling_draws_stored_transitions() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for i in 0..5 {
            buf.push(tag(i));
        }
        let mb = buf
            .sample(32, &mut crate::seed::stream_rng(1, crate::seed::Stream::Data))
            .unwrap();
        assert_eq!(mb.states.nrows(), 32);
        for i in 0..32 {
            assert!(mb.rewards[i] >= 0.0 && mb.rewards[i] < 5.0);
        }
    }
}
