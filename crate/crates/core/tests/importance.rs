//! WIS and DR against analytic values on a small tabular problem.

use dqpope_core::env::{collect_episodes, Env, Policy, TabularEnv};
use dqpope_core::ope::{dr_estimate, wis_estimate};
use dqpope_core::tabular::{exact_q_values, DiscreteReturnLaw, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two states, two actions, mildly off-policy behavior, horizon cap 60 at
/// gamma 0.8 (truncation error ~1e-6 of the value scale).
fn fixture(target_rows: Vec<Vec<f64>>) -> (Env, TabularMdp) {
    let mdp = TabularMdp {
        n_states: 2,
        n_actions: 2,
        transition: vec![
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.3, 0.7], vec![0.6, 0.4]],
        ],
        reward: vec![
            vec![DiscreteReturnLaw::dirac(0.0), DiscreteReturnLaw::dirac(0.4)],
            vec![DiscreteReturnLaw::dirac(1.0), DiscreteReturnLaw::dirac(0.5)],
        ],
        gamma: 0.8,
        target_policy: target_rows,
    };
    let env = Env::Tabular(
        TabularEnv::new(
            mdp.clone(),
            vec![1.0, 0.0],
            vec![false, false],
            60,
        )
        .unwrap(),
    );
    (env, mdp)
}

fn analytic_value(mdp: &TabularMdp, initial: &[f64]) -> f64 {
    let q = exact_q_values(mdp, None, 1e-13, 100_000);
    (0..mdp.n_states)
        .map(|s| {
            initial[s]
                * (0..mdp.n_actions)
                    .map(|a| mdp.target_policy[s][a] * q[s][a])
                    .sum::<f64>()
        })
        .sum()
}

#[test]
fn wis_recovers_analytic_value_within_two_percent() {
    let target_rows = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let (env, mdp) = fixture(target_rows.clone());
    let truth = analytic_value(&mdp, &[1.0, 0.0]);
    assert!(truth.abs() > 0.5, "fixture value too small: {truth}");

    let behavior = Policy::UniformRandom;
    let target = Policy::TabularStochastic(target_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let episodes = collect_episodes(&env, &behavior, 100_000, &mut rng).unwrap();
    let estimate = wis_estimate(&episodes, &target, &behavior, 2, 0.8).unwrap();
    let rel = (estimate - truth).abs() / truth.abs();
    assert!(rel < 0.02, "WIS {estimate} vs truth {truth} (rel {rel})");
}

#[test]
fn dr_with_exact_q_telescopes_per_episode_for_deterministic_policy() {
    // Deterministic target = behavior: action 0 in state 0, action 1 in 1.
    let target_rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let (env, mdp) = fixture(target_rows.clone());
    let q = exact_q_values(&mdp, None, 1e-13, 100_000);
    let q_fn = move |state: &[f64], action: usize| -> f64 {
        q[TabularEnv::state_index(state)][action]
    };
    let policy = Policy::TabularStochastic(target_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(82);
    let episodes = collect_episodes(&env, &policy, 200, &mut rng).unwrap();
    let mut mean_return = 0.0;
    for ep in &episodes {
        let single = dr_estimate(
            core::slice::from_ref(ep),
            &policy,
            &policy,
            &q_fn,
            2,
            0.8,
        )
        .unwrap();
        let plain = ep.discounted_return(0.8);
        assert!(
            (single - plain).abs() < 1e-9,
            "per-episode DR {single} vs return {plain}"
        );
        mean_return += plain / episodes.len() as f64;
    }
    let avg = dr_estimate(&episodes, &policy, &policy, &q_fn, 2, 0.8).unwrap();
    assert!((avg - mean_return).abs() < 1e-9);
}

#[test]
fn dr_with_exact_q_is_unbiased_for_stochastic_policies() {
    let target_rows = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let (env, mdp) = fixture(target_rows.clone());
    let truth = analytic_value(&mdp, &[1.0, 0.0]);
    let q = exact_q_values(&mdp, None, 1e-13, 100_000);
    let q_fn = move |state: &[f64], action: usize| -> f64 {
        q[TabularEnv::state_index(state)][action]
    };
    let behavior = Policy::UniformRandom;
    let target = Policy::TabularStochastic(target_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let episodes = collect_episodes(&env, &behavior, 20_000, &mut rng).unwrap();
    let estimate = dr_estimate(&episodes, &target, &behavior, &q_fn, 2, 0.8).unwrap();
    let rel = (estimate - truth).abs() / truth.abs();
    assert!(rel < 0.02, "DR {estimate} vs truth {truth} (rel {rel})");
}

#[test]
fn dr_variance_stays_below_unnormalized_is_variance() {
    let target_rows = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let (env, mdp) = fixture(target_rows.clone());
    // Imperfect but sane value estimate: exact Q plus a state-dependent bump.
    let q = exact_q_values(&mdp, None, 1e-13, 100_000);
    let q_fn = move |state: &[f64], action: usize| -> f64 {
        let s = TabularEnv::state_index(state);
        q[s][action] + 0.2 * (s as f64 - 0.5)
    };
    let zero_q = |_: &[f64], _: usize| 0.0;
    let behavior = Policy::UniformRandom;
    let target = Policy::TabularStochastic(target_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(84);
    let episodes = collect_episodes(&env, &behavior, 2000, &mut rng).unwrap();

    let mut dr_vals = Vec::new();
    let mut is_vals = Vec::new();
    for ep in &episodes {
        let one = core::slice::from_ref(ep);
        dr_vals.push(dr_estimate(one, &target, &behavior, &q_fn, 2, 0.8).unwrap());
        // DR with a zero value function degenerates to unnormalized
        // per-step importance sampling.
        is_vals.push(dr_estimate(one, &target, &behavior, &zero_q, 2, 0.8).unwrap());
    }
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    };
    let v_dr = var(&dr_vals);
    let v_is = var(&is_vals);
    assert!(
        v_dr < v_is,
        "DR variance {v_dr} should undercut IS variance {v_is}"
    );
}
