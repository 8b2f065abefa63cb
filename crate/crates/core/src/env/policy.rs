//! Policies over discrete actions.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};

/// A policy maps a state to a distribution over actions.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Uniform over all actions.
    UniformRandom,
    /// Always the given action.
    FixedAction(usize),
    /// With probability `base_fraction` act like `base`, otherwise uniformly
    /// at random.
    Mixture {
        base: Box<Policy>,
        base_fraction: f64,
    },
    /// Cart-pole stabilizer: push toward the sign of
    /// `angle + 0.5 * angular_velocity`.
    HeuristicCartPole,
    /// Explicit per-state action probabilities for tabular environments.
    TabularStochastic(Vec<Vec<f64>>),
}

impl Policy {
    /// Checks that action probabilities are non-negative and sum to 1
    /// (tolerance 1e-9) for every state this policy can describe.
    pub fn validate(&self, action_count: usize) -> Result<()> {
        match self {
            Policy::UniformRandom | Policy::HeuristicCartPole => Ok(()),
            Policy::FixedAction(a) => {
                if *a < action_count {
                    Ok(())
                } else {
                    Err(Error::Config(alloc::format!(
                        "fixed action {a} out of range (action_count {action_count})"
                    )))
                }
            }
            Policy::Mixture {
                base,
                base_fraction,
            } => {
                if !(0.0..=1.0).contains(base_fraction) {
                    return Err(Error::Config(alloc::format!(
                        "mixture fraction must lie in [0,1], got {base_fraction}"
                    )));
                }
                base.validate(action_count)
            }
            Policy::TabularStochastic(table) => {
                for (s, row) in table.iter().enumerate() {
                    if row.len() != action_count {
                        return Err(Error::Config(alloc::format!(
                            "policy row {s} has {} entries, expected {action_count}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|p| *p < 0.0) {
                        return Err(Error::Config(alloc::format!(
                            "negative action probability at state {s}"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Config(alloc::format!(
                            "action probabilities at state {s} sum to {sum}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Action probabilities at `state`.
    pub fn action_probs(&self, state: &[f64], action_count: usize) -> Vec<f64> {
        match self {
            Policy::UniformRandom => vec![1.0 / action_count as f64; action_count],
            Policy::FixedAction(a) => {
                let mut p = vec![0.0; action_count];
                p[*a] = 1.0;
                p
            }
            Policy::Mixture {
                base,
                base_fraction,
            } => {
                let mut p = base.action_probs(state, action_count);
                let uniform = (1.0 - base_fraction) / action_count as f64;
                for q in p.iter_mut() {
                    *q = base_fraction * *q + uniform;
                }
                p
            }
            Policy::HeuristicCartPole => {
                let mut p = vec![0.0; action_count];
                p[Self::heuristic_action(state)] = 1.0;
                p
            }
            Policy::TabularStochastic(table) => {
                let s = libm::round(state[0]) as usize;
                table[s].clone()
            }
        }
    }

    /// Probability of a single action at `state`.
    pub fn prob(&self, state: &[f64], action: usize, action_count: usize) -> f64 {
        match self {
            Policy::UniformRandom => 1.0 / action_count as f64,
            Policy::FixedAction(a) => {
                if *a == action {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Mixture {
                base,
                base_fraction,
            } => {
                base_fraction * base.prob(state, action, action_count)
                    + (1.0 - base_fraction) / action_count as f64
            }
            Policy::HeuristicCartPole => {
                if Self::heuristic_action(state) == action {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::TabularStochastic(table) => {
                let s = libm::round(state[0]) as usize;
                table[s][action]
            }
        }
    }

    /// Draw an action by inverting the cumulative action distribution.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action_count: usize,
        rng: &mut R,
    ) -> usize {
        let probs = self.action_probs(state, action_count);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        action_count - 1
    }

    /// Rightward push iff `angle + 0.5 * angular_velocity > 0`.
    pub fn heuristic_action(state: &[f64]) -> usize {
        if state[2] + 0.5 * state[3] > 0.0 {
            1
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_probs_blend_base_and_uniform() {
        let p = Policy::Mixture {
            base: Box::new(Policy::FixedAction(1)),
            base_fraction: 0.8,
        };
        let probs = p.action_probs(&[0.0; 4], 2);
        assert!((probs[0] - 0.1).abs() < 1e-12);
        assert!((probs[1] - 0.9).abs() < 1e-12);
        assert!((p.prob(&[0.0; 4], 1, 2) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn tabular_rows_must_be_distributions() {
        let bad = Policy::TabularStochastic(vec![vec![0.7, 0.2]]);
        assert!(bad.validate(2).is_err());
        let good = Policy::TabularStochastic(vec![vec![0.7, 0.3]]);
        assert!(good.validate(2).is_ok());
    }

    #[test]
    fn heuristic_pushes_toward_lean() {
        assert_eq!(Policy::heuristic_action(&[0.0, 0.0, 0.1, 0.0]), 1);
        assert_eq!(Policy::heuristic_action(&[0.0, 0.0, -0.1, 0.0]), 0);
        // Angular velocity dominates a small opposing angle.
        assert_eq!(Policy::heuristic_action(&[0.0, 0.0, -0.01, 0.5]), 1);
    }
}
