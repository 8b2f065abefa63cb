//! Quantile-process regression against bootstrapped distributional targets.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::{check_loss, iteration_shards, Trained, TrainConfig, TargetUpdate};
use crate::env::{sample_open01, Policy, Transition};
use crate::error::{Error, Result};
use crate::metrics::{pinball, pinball_grad};
use crate::net::{optim_step_quantile, soft_update, Optim, QuantileNet};

/// Trains the quantile-process model `f(s, a, tau)`.
///
/// Per minibatch transition the loop draws `m'` quantile levels
/// `tau^h ~ Unif(0,1)`, one next action `a' ~ pi(.|s')`, and `m` generator
/// levels `u^j ~ Unif(0,1)` (in that order, which pins the RNG stream);
/// targets are `y^j = r + gamma * f_target(s', a', u^j)`, or `y = r` on
/// terminal transitions. One Adam step minimizes the average check loss
/// `(1/(B m m')) sum_{j,h} rho_{tau^h}(y^j - f(s, a, tau^h))`.
pub fn dqpope_train<R: Rng + ?Sized>(
    dataset: &[Transition],
    target: &Policy,
    action_count: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Trained<QuantileNet>> {
    if dataset.is_empty() {
        return Err(Error::Input("dataset must be non-empty".into()));
    }
    cfg.validate()?;
    target.validate(action_count)?;
    let state_dim = dataset[0].state.len();

    let mut net = QuantileNet::new(
        state_dim,
        action_count,
        &cfg.hidden,
        cfg.embedding,
        cfg.output_clip,
        rng,
    )?;
    if cfg.warm_start_bias {
        let v0 = super::warm_start_value(dataset, cfg.gamma);
        net.layers.last_mut().unwrap().b[0] = v0;
    }
    let mut target_net = net.clone();
    let mut opt = Optim::new(cfg.optimizer, net.param_count(), cfg.learning_rate);
    let mut loss_trace = Vec::new();
    let mut step = 0usize;

    let m = cfg.m_target_samples;
    let m_levels = cfg.m_quantile_levels;
    for shard in iteration_shards(dataset, cfg)? {
        for _ in 0..cfg.epochs_per_iteration {
            for batch in shard.chunks(cfg.batch_size) {
                let scale = 1.0 / (batch.len() * m * m_levels) as f64;
                let mut grads = net.zero_grads();
                let mut loss = 0.0;
                for tr in batch {
                    let taus: Vec<f64> = (0..m_levels).map(|_| sample_open01(rng)).collect();
                    let targets: Vec<f64> = if tr.terminal {
                        vec![cfg.clip_target(tr.reward); m]
                    } else {
                        let a2 = target.sample_action(&tr.next_state, action_count, rng);
                        let mut ys = Vec::with_capacity(m);
                        for _ in 0..m {
                            let u = sample_open01(rng);
                            let cont = target_net.forward(&tr.next_state, a2, u)?;
                            ys.push(cfg.clip_target(tr.reward + cfg.gamma * cont));
                        }
                        ys
                    };
                    for &tau in &taus {
                        let (f, cache) = net.forward_cached(&tr.state, tr.action, tau)?;
                        let mut upstream = 0.0;
                        for &y in &targets {
                            loss += scale * pinball(y - f, tau);
                            upstream -= scale * pinball_grad(y - f, tau);
                        }
                        net.backward_cached(&cache, upstream, &mut grads);
                    }
                }
                check_loss(loss, step)?;
                loss_trace.push(loss);
                optim_step_quantile(&mut net, &grads, &mut opt)?;
                step += 1;
                match cfg.target_update {
                    TargetUpdate::HardEvery(k) => {
                        if step % k == 0 {
                            target_net = net.clone();
                        }
                    }
                    TargetUpdate::Soft(rho) => soft_update(&mut target_net, &net, rho)?,
                }
            }
        }
    }
    Ok(Trained {
        model: net,
        loss_trace,
    })
}
