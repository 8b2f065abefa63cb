//! Offline data generation: occupancy-sampled transitions, full episodes,
//! and Monte-Carlo return distributions.

use alloc::vec::Vec;
use rand::Rng;

use super::{Env, Policy, ReturnDistribution, Transition};
use crate::error::{Error, Result};

/// A full trajectory `(s_0, a_0, r_0), (s_1, a_1, r_1), ...`.
#[derive(Debug, Clone)]
pub struct Episode {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Discounted return `sum_t gamma^t r_t`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut w = 1.0;
        for r in &self.rewards {
            g += w * r;
            w *= gamma;
        }
        g
    }
}

/// Draws `n` transitions from the discounted occupancy of `behavior`.
///
/// Each sample restarts a trajectory, draws a geometric(1 - gamma) time
/// index, and records the transition at that index. Episodes that end before
/// the sampled index are discarded and both the episode and the index are
/// redrawn, so accepted samples follow the occupancy measure restricted to
/// reachable times.
pub fn collect_dataset<R: Rng + ?Sized>(
    env: &Env,
    behavior: &Policy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    if n == 0 {
        return Err(Error::Input("dataset size must be >= 1".into()));
    }
    behavior.validate(env.action_count())?;
    let gamma = env.gamma();
    let cap = env.horizon_cap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t_index = geometric_index(gamma, rng);
        if t_index >= cap {
            continue;
        }
        let mut state = env.reset(rng);
        let mut reached = true;
        for step_idx in 0..t_index {
            let action = behavior.sample_action(&state, env.action_count(), rng);
            let step = env.step(&state, action, rng);
            let terminal = step.terminal || step_idx + 1 >= cap;
            if terminal {
                reached = false;
                break;
            }
            state = step.next_state;
        }
        if !reached {
            continue;
        }
        let action = behavior.sample_action(&state, env.action_count(), rng);
        let step = env.step(&state, action, rng);
        let terminal = step.terminal || t_index + 1 >= cap;
        out.push(Transition {
            state,
            action,
            reward: step.reward,
            next_state: step.next_state,
            terminal,
        });
    }
    Ok(out)
}

/// Rolls out `n` full episodes under `policy` (horizon-capped).
pub fn collect_episodes<R: Rng + ?Sized>(
    env: &Env,
    policy: &Policy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Episode>> {
    if n == 0 {
        return Err(Error::Input("episode count must be >= 1".into()));
    }
    policy.validate(env.action_count())?;
    let cap = env.horizon_cap();
    let mut episodes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut state = env.reset(rng);
        let mut ep = Episode {
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
        };
        for step_idx in 0..cap {
            let action = policy.sample_action(&state, env.action_count(), rng);
            let step = env.step(&state, action, rng);
            ep.states.push(state);
            ep.actions.push(action);
            ep.rewards.push(step.reward);
            state = step.next_state;
            if step.terminal || step_idx + 1 >= cap {
                break;
            }
        }
        episodes.push(ep);
    }
    Ok(episodes)
}

/// Monte-Carlo oracle: sorted discounted returns of `n_rollouts` episodes
/// started from the initial-state distribution under `target`.
pub fn mc_return_distribution<R: Rng + ?Sized>(
    env: &Env,
    target: &Policy,
    n_rollouts: usize,
    rng: &mut R,
) -> Result<ReturnDistribution> {
    if n_rollouts == 0 {
        return Err(Error::Input("rollout count must be >= 1".into()));
    }
    target.validate(env.action_count())?;
    let gamma = env.gamma();
    let cap = env.horizon_cap();
    let mut returns = Vec::with_capacity(n_rollouts);
    for _ in 0..n_rollouts {
        let mut state = env.reset(rng);
        let mut g = 0.0;
        let mut w = 1.0;
        for step_idx in 0..cap {
            let action = target.sample_action(&state, env.action_count(), rng);
            let step = env.step(&state, action, rng);
            g += w * step.reward;
            w *= gamma;
            state = step.next_state;
            if step.terminal || step_idx + 1 >= cap {
                break;
            }
        }
        returns.push(g);
    }
    ReturnDistribution::from_samples(returns)
}

/// Geometric(1 - gamma) time index: P(T = k) = (1 - gamma) gamma^k.
fn geometric_index<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    // 1 - u lies in (0, 1], so the log is finite and non-positive.
    libm::floor(libm::log(1.0 - u) / libm::log(gamma)) as usize
}
