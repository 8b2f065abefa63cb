//! Trained-model properties of the iterative estimators.

use std::sync::OnceLock;

use dqpope_core::env::{
    collect_dataset, make_toy_env, Env, Policy, RewardNoise, TabularEnv,
};
use dqpope_core::metrics::{ks_statistic, midpoint_levels, sample_from_net, uniform_levels, value_from_quantiles};
use dqpope_core::net::QuantileNet;
use dqpope_core::ope::{
    cateope_train, dope_train, dqope_train, dqpope_train, q_value, AtomGrid, TrainConfig,
};
use dqpope_core::tabular::{exact_q_values, DiscreteReturnLaw, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Quantile net fit on ~5000 Adam steps of 10^4 standard-normal targets at
/// the single toy state-action pair. Shared by several property tests.
fn normal_fit() -> &'static QuantileNet {
    static NET: OnceLock<QuantileNet> = OnceLock::new();
    NET.get_or_init(|| {
        let env = make_toy_env(RewardNoise::Normal { sigma: 1.0 }).unwrap();
        let mut r = rng(1001);
        let data = collect_dataset(&env, &Policy::FixedAction(0), 10_000, &mut r).unwrap();
        let cfg = TrainConfig {
            epochs_per_iteration: 16,
            ..TrainConfig::toy()
        };
        dqpope_train(&data, &Policy::FixedAction(0), 1, &cfg, &mut r)
            .unwrap()
            .model
    })
}

#[test]
fn fitted_quantiles_match_standard_normal() {
    let net = normal_fit();
    let f_median = net.forward(&[0.0], 0, 0.5).unwrap();
    let f_upper = net.forward(&[0.0], 0, 0.841).unwrap();
    assert!(f_median.abs() < 0.1, "f(0.5) = {f_median}");
    let gap = f_upper - f_median;
    assert!((0.8..=1.2).contains(&gap), "f(0.841) - f(0.5) = {gap}");
}

#[test]
fn generator_draws_pass_ks_against_fresh_normals() {
    let net = normal_fit();
    let mut r = rng(1002);
    let generated = sample_from_net(net, &[0.0], 0, 5000, &mut r).unwrap();
    let fresh: Vec<f64> = (0..5000)
        .map(|_| dqpope_core::env::sample_standard_normal(&mut r))
        .collect();
    let ks = ks_statistic(generated.samples(), &fresh);
    assert!(ks < 0.08, "two-sample KS statistic {ks}");
}

#[test]
fn fitted_quantile_curve_is_nearly_monotone() {
    let net = normal_fit();
    let values: Vec<f64> = midpoint_levels(99)
        .into_iter()
        .map(|tau| net.forward(&[0.0], 0, tau).unwrap())
        .collect();
    let inversions = values.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(
        inversions * 20 <= values.len() - 1,
        "{inversions} adjacent inversions over {} steps",
        values.len() - 1
    );
}

#[test]
fn toy_value_estimates_concentrate_near_truth() {
    let env = make_toy_env(RewardNoise::Normal { sigma: 1.0 }).unwrap();
    let cfg = TrainConfig::toy();
    let mut hits = 0;
    for rep in 0..100 {
        let mut r = rng(2000 + rep);
        let data = collect_dataset(&env, &Policy::FixedAction(0), 3200, &mut r).unwrap();
        let trained = dqpope_train(&data, &Policy::FixedAction(0), 1, &cfg, &mut r).unwrap();
        let draws = vec![(vec![0.0], 0usize); 32];
        let levels = uniform_levels(32, &mut r);
        let v = value_from_quantiles(&trained.model, &draws, &levels).unwrap();
        if v.abs() <= 0.15 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "only {hits}/100 replicates within 0.15 of truth");
}

#[test]
fn degenerate_discount_learns_immediate_reward_quantiles() {
    let env = Env::Toy(
        dqpope_core::env::ToyEnv::new(1.7, RewardNoise::Normal { sigma: 0.0 }, 0.5).unwrap(),
    );
    let mut r = rng(3000);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 3200, &mut r).unwrap();
    let cfg = TrainConfig {
        gamma: 0.0,
        epochs_per_iteration: 20,
        ..TrainConfig::toy()
    };
    let trained = dqpope_train(&data, &Policy::FixedAction(0), 1, &cfg, &mut r).unwrap();
    let samples = sample_from_net(&trained.model, &[0.0], 0, 1000, &mut r).unwrap();
    assert!(
        (samples.mean() - 1.7).abs() < 0.05,
        "mean sampled quantile {}",
        samples.mean()
    );
}

/// Direct transcription of the single-draw update (one tau, one next-action,
/// one generator level per transition), used to pin the generalized loop.
fn single_draw_reference(
    dataset: &[dqpope_core::env::Transition],
    target: &Policy,
    action_count: usize,
    cfg: &TrainConfig,
    r: &mut ChaCha8Rng,
) -> Vec<f64> {
    use dqpope_core::env::sample_open01;
    use dqpope_core::metrics::{pinball, pinball_grad};
    use dqpope_core::net::{optim_step_quantile, Optim};

    let state_dim = dataset[0].state.len();
    let mut net = QuantileNet::new(
        state_dim,
        action_count,
        &cfg.hidden,
        cfg.embedding,
        cfg.output_clip,
        r,
    )
    .unwrap();
    let mut target_net = net.clone();
    let mut opt = Optim::new(cfg.optimizer, net.param_count(), cfg.learning_rate);
    let mut losses = Vec::new();
    let mut step = 0usize;
    for _ in 0..cfg.iterations {
        for _ in 0..cfg.epochs_per_iteration {
            for batch in dataset.chunks(cfg.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut grads = net.zero_grads();
                let mut loss = 0.0;
                for tr in batch {
                    let tau = sample_open01(r);
                    let y = if tr.terminal {
                        tr.reward
                    } else {
                        let a2 = target.sample_action(&tr.next_state, action_count, r);
                        let u = sample_open01(r);
                        tr.reward + cfg.gamma * target_net.forward(&tr.next_state, a2, u).unwrap()
                    };
                    let (f, cache) = net.forward_cached(&tr.state, tr.action, tau).unwrap();
                    loss += scale * pinball(y - f, tau);
                    net.backward_cached(&cache, -scale * pinball_grad(y - f, tau), &mut grads);
                }
                losses.push(loss);
                optim_step_quantile(&mut net, &grads, &mut opt).unwrap();
                step += 1;
                if let dqpope_core::ope::TargetUpdate::HardEvery(k) = cfg.target_update {
                    if step % k == 0 {
                        target_net = net.clone();
                    }
                }
            }
        }
    }
    losses
}

#[test]
fn unit_m_reduces_to_single_draw_update_bit_exactly() {
    // Mixed terminal and bootstrapped transitions on a 2-dim state space.
    let mut r = rng(4000);
    let env = dqpope_core::env::make_cartpole_env();
    let data = collect_dataset(&env, &Policy::UniformRandom, 96, &mut r).unwrap();
    let cfg = TrainConfig {
        iterations: 1,
        epochs_per_iteration: 3,
        batch_size: 16,
        learning_rate: 0.001,
        gamma: 0.95,
        hidden: vec![10, 10],
        ..TrainConfig::toy()
    };
    assert!(data.iter().any(|tr| !tr.terminal));

    let mut rng_a = rng(4001);
    let trace_a = dqpope_train(&data, &Policy::HeuristicCartPole, 2, &cfg, &mut rng_a)
        .unwrap()
        .loss_trace;
    let mut rng_b = rng(4001);
    let trace_b = single_draw_reference(&data, &Policy::HeuristicCartPole, 2, &cfg, &mut rng_b);
    assert_eq!(trace_a.len(), trace_b.len());
    for (a, b) in trace_a.iter().zip(&trace_b) {
        assert_eq!(a.to_bits(), b.to_bits(), "loss traces diverge: {a} vs {b}");
    }
}

fn chain_mdp() -> (TabularMdp, Vec<bool>) {
    // 0 -> 1 -> 2 -> 3 (terminal), reward 1 per step.
    let step_to = |s2: usize| -> Vec<f64> {
        let mut row = vec![0.0; 4];
        row[s2] = 1.0;
        row
    };
    let mdp = TabularMdp {
        n_states: 4,
        n_actions: 1,
        transition: vec![
            vec![step_to(1)],
            vec![step_to(2)],
            vec![step_to(3)],
            vec![step_to(3)],
        ],
        reward: vec![
            vec![DiscreteReturnLaw::dirac(1.0)],
            vec![DiscreteReturnLaw::dirac(1.0)],
            vec![DiscreteReturnLaw::dirac(1.0)],
            vec![DiscreteReturnLaw::dirac(0.0)],
        ],
        gamma: 0.9,
        target_policy: vec![vec![1.0]; 4],
    };
    (mdp, vec![false, false, false, true])
}

#[test]
fn fitted_q_matches_tabular_value_iteration_on_chain() {
    let (mdp, terminals) = chain_mdp();
    let q_true = exact_q_values(&mdp, Some(&terminals), 1e-12, 1000);
    assert!((q_true[0][0] - (1.0 + 0.9 + 0.81)).abs() < 1e-12);

    let env = Env::Tabular(
        TabularEnv::new(mdp, vec![1.0, 0.0, 0.0, 0.0], terminals, 50).unwrap(),
    );
    let mut r = rng(5000);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 4000, &mut r).unwrap();
    let cfg = TrainConfig {
        epochs_per_iteration: 30,
        learning_rate: 0.002,
        gamma: 0.9,
        hidden: vec![32, 32],
        ..TrainConfig::toy()
    };
    let trained = dope_train(&data, &Policy::FixedAction(0), 1, &cfg, &mut r).unwrap();
    let q_hat = q_value(&trained.model, &[0.0], 0, 1);
    assert!(
        (q_hat - q_true[0][0]).abs() < 0.1,
        "Q(start) = {q_hat} vs oracle {}",
        q_true[0][0]
    );
}

#[test]
fn fitted_q_with_zero_discount_learns_constant_reward() {
    let env = Env::Toy(
        dqpope_core::env::ToyEnv::new(0.75, RewardNoise::Normal { sigma: 0.0 }, 0.5).unwrap(),
    );
    let mut r = rng(5001);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 3200, &mut r).unwrap();
    let cfg = TrainConfig {
        gamma: 0.0,
        epochs_per_iteration: 10,
        ..TrainConfig::toy()
    };
    let trained = dope_train(&data, &Policy::FixedAction(0), 1, &cfg, &mut r).unwrap();
    let q_hat = q_value(&trained.model, &[0.0], 0, 1);
    assert!((q_hat - 0.75).abs() < 0.05, "Q = {q_hat}");
}

#[test]
fn single_head_converges_to_deterministic_reward() {
    let env = Env::Toy(
        dqpope_core::env::ToyEnv::new(-0.6, RewardNoise::Normal { sigma: 0.0 }, 0.5).unwrap(),
    );
    let mut r = rng(6000);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 3200, &mut r).unwrap();
    let cfg = TrainConfig {
        epochs_per_iteration: 20,
        ..TrainConfig::toy()
    };
    let trained = dqope_train(&data, &Policy::FixedAction(0), &[0.5], 1, &cfg, &mut r).unwrap();
    let head = trained.model.quantiles(&[0.0], 0)[0];
    assert!((head + 0.6).abs() < 0.05, "median head {head}");
}

#[test]
fn fixed_level_estimates_track_normal_quantiles() {
    let env = make_toy_env(RewardNoise::Normal { sigma: 1.0 }).unwrap();
    let mut r = rng(6001);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 10_000, &mut r).unwrap();
    let levels = midpoint_levels(99);
    let cfg = TrainConfig {
        epochs_per_iteration: 48,
        ..TrainConfig::toy()
    };
    let trained = dqope_train(&data, &Policy::FixedAction(0), &levels, 1, &cfg, &mut r).unwrap();
    let estimates = trained.model.quantiles(&[0.0], 0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for (tau, est) in levels.iter().zip(&estimates) {
        if *tau < 0.1 || *tau > 0.9 {
            continue;
        }
        let truth = normal.inverse_cdf(*tau);
        assert!(
            (est - truth).abs() < 0.15,
            "tau {tau}: estimate {est} vs normal quantile {truth}"
        );
    }
}

#[test]
fn categorical_model_concentrates_on_deterministic_reward() {
    let env = Env::Toy(
        dqpope_core::env::ToyEnv::new(2.0, RewardNoise::Normal { sigma: 0.0 }, 0.5).unwrap(),
    );
    let mut r = rng(7000);
    let data = collect_dataset(&env, &Policy::FixedAction(0), 3200, &mut r).unwrap();
    let grid = AtomGrid {
        count: 11,
        v_min: -5.0,
        v_max: 5.0,
    };
    let cfg = TrainConfig {
        epochs_per_iteration: 20,
        learning_rate: 0.01,
        ..TrainConfig::toy()
    };
    let trained = cateope_train(&data, &Policy::FixedAction(0), grid, 1, &cfg, &mut r).unwrap();
    let probs = trained.model.probs(&[0.0], 0);
    let atoms = grid.atoms();
    let near: f64 = probs
        .iter()
        .zip(&atoms)
        .filter(|(_, z)| (**z - 2.0).abs() <= grid.spacing() + 1e-12)
        .map(|(p, _)| p)
        .sum();
    assert!(near >= 0.9, "mass within one atom of the reward: {near}");
    let value = trained.model.value(&[0.0], 0);
    assert!((grid.v_min..=grid.v_max).contains(&value));
}
