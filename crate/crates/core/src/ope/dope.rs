//! Value-based fitted-Q evaluation with squared loss.

use alloc::vec::Vec;
use rand::Rng;

use super::{check_loss, iteration_shards, sa_input, Trained, TrainConfig, TargetUpdate};
use crate::env::{Policy, Transition};
use crate::error::{Error, Result};
use crate::net::{optim_step_mlp, soft_update_mlp, Optim, Mlp};

/// Q-value of a scalar-output state-action network.
pub fn q_value(net: &Mlp, state: &[f64], action: usize, action_count: usize) -> f64 {
    net.forward(&sa_input(state, action, action_count))[0]
}

/// State value under `policy`: `sum_a pi(a|s) Q(s, a)`.
pub fn v_value(net: &Mlp, state: &[f64], policy: &Policy, action_count: usize) -> f64 {
    policy
        .action_probs(state, action_count)
        .iter()
        .enumerate()
        .map(|(a, p)| p * q_value(net, state, a, action_count))
        .sum()
}

/// Fitted-Q iteration: regression targets `r + gamma * Q_target(s', a')`
/// with `a' ~ pi(.|s')` (terminal transitions use `r`), squared loss, Adam,
/// and the same target-network machinery as the distributional estimators.
pub fn dope_train<R: Rng + ?Sized>(
    dataset: &[Transition],
    target: &Policy,
    action_count: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Trained<Mlp>> {
    if dataset.is_empty() {
        return Err(Error::Input("dataset must be non-empty".into()));
    }
    cfg.validate()?;
    target.validate(action_count)?;
    let state_dim = dataset[0].state.len();

    let mut widths = Vec::with_capacity(cfg.hidden.len() + 2);
    widths.push(state_dim + action_count);
    widths.extend_from_slice(&cfg.hidden);
    widths.push(1);
    let mut net = Mlp::new(&widths, rng)?;
    if cfg.warm_start_bias {
        let v0 = super::warm_start_value(dataset, cfg.gamma);
        net.layers.last_mut().unwrap().b[0] = v0;
    }
    let mut target_net = net.clone();
    let mut opt = Optim::new(cfg.optimizer, net.param_count(), cfg.learning_rate);
    let mut loss_trace = Vec::new();
    let mut step = 0usize;

    for shard in iteration_shards(dataset, cfg)? {
        for _ in 0..cfg.epochs_per_iteration {
            for batch in shard.chunks(cfg.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut grads = net.zero_grads();
                let mut loss = 0.0;
                for tr in batch {
                    let y = if tr.terminal {
                        cfg.clip_target(tr.reward)
                    } else {
                        let a2 = target.sample_action(&tr.next_state, action_count, rng);
                        let q_next = q_value(&target_net, &tr.next_state, a2, action_count);
                        cfg.clip_target(tr.reward + cfg.gamma * q_next)
                    };
                    let x = sa_input(&tr.state, tr.action, action_count);
                    let (out, acts) = net.forward_cached(&x);
                    let diff = out[0] - y;
                    loss += scale * diff * diff;
                    net.backward_cached(&acts, &[2.0 * scale * diff], &mut grads);
                }
                check_loss(loss, step)?;
                loss_trace.push(loss);
                optim_step_mlp(&mut net, &grads, &mut opt)?;
                step += 1;
                match cfg.target_update {
                    TargetUpdate::HardEvery(k) => {
                        if step % k == 0 {
                            target_net = net.clone();
                        }
                    }
                    TargetUpdate::Soft(rho) => soft_update_mlp(&mut target_net, &net, rho)?,
                }
            }
        }
    }
    Ok(Trained {
        model: net,
        loss_trace,
    })
}
