//! Importance-sampling estimators over full trajectories.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{Episode, Policy};
use crate::error::{Error, Result};

fn step_ratio(
    target: &Policy,
    behavior: &Policy,
    state: &[f64],
    action: usize,
    action_count: usize,
) -> Result<f64> {
    let pb = behavior.prob(state, action, action_count);
    if pb <= 0.0 {
        return Err(Error::DegenerateRatio(alloc::format!(
            "behavior probability is {pb} for an observed action"
        )));
    }
    Ok(target.prob(state, action, action_count) / pb)
}

/// Step-wise weighted importance sampling.
///
/// Each reward is weighted by its cumulative ratio `rho_{1:t}` normalized by
/// the cross-trajectory mean `omega_t`; episodes shorter than `t` keep
/// contributing their final cumulative ratio to `omega_t` (weight
/// freezing), which reduces to the equal-horizon formula when lengths
/// match.
pub fn wis_estimate(
    episodes: &[Episode],
    target: &Policy,
    behavior: &Policy,
    action_count: usize,
    gamma: f64,
) -> Result<f64> {
    if episodes.is_empty() || episodes.iter().any(Episode::is_empty) {
        return Err(Error::Input("need >= 1 non-empty episode".into()));
    }
    let n = episodes.len() as f64;
    let mut cums: Vec<Vec<f64>> = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let mut cum = Vec::with_capacity(ep.len());
        let mut acc = 1.0;
        for t in 0..ep.len() {
            acc *= step_ratio(target, behavior, &ep.states[t], ep.actions[t], action_count)?;
            cum.push(acc);
        }
        cums.push(cum);
    }
    let t_max = episodes.iter().map(Episode::len).max().unwrap();
    let mut omega = vec![0.0; t_max];
    for cum in &cums {
        for (t, w) in omega.iter_mut().enumerate() {
            *w += cum[t.min(cum.len() - 1)] / n;
        }
    }
    let mut value = 0.0;
    for (ep, cum) in episodes.iter().zip(&cums) {
        let mut discount = 1.0;
        for t in 0..ep.len() {
            if omega[t] > 0.0 {
                value += discount * (cum[t] / omega[t]) * ep.rewards[t] / n;
            }
            discount *= gamma;
        }
    }
    Ok(value)
}

/// Doubly robust estimator with the backward recursion
/// `V <- Vhat(s_t) + rho_t (r_t + gamma V - Qhat(s_t, a_t))`,
/// initialized at 0 past the final step and averaged over episodes.
/// `q` supplies `Qhat`; `Vhat(s) = sum_a pi(a|s) Qhat(s, a)`.
pub fn dr_estimate(
    episodes: &[Episode],
    target: &Policy,
    behavior: &Policy,
    q: &dyn Fn(&[f64], usize) -> f64,
    action_count: usize,
    gamma: f64,
) -> Result<f64> {
    if episodes.is_empty() || episodes.iter().any(Episode::is_empty) {
        return Err(Error::Input("need >= 1 non-empty episode".into()));
    }
    let mut total = 0.0;
    for ep in episodes {
        let mut v_dr = 0.0;
        for t in (0..ep.len()).rev() {
            let state = &ep.states[t];
            let rho = step_ratio(target, behavior, state, ep.actions[t], action_count)?;
            let v_hat: f64 = target
                .action_probs(state, action_count)
                .iter()
                .enumerate()
                .map(|(a, p)| p * q(state, a))
                .sum();
            v_dr = v_hat + rho * (ep.rewards[t] + gamma * v_dr - q(state, ep.actions[t]));
        }
        total += v_dr;
    }
    Ok(total / episodes.len() as f64)
}
