//! Discrete-quantile regression at fixed levels (QR-DQN style baseline).
//!
//! One multi-head network estimates the quantiles at a fixed level grid.
//! Because the heads cannot generate fresh target draws, bootstrapped
//! targets are the pseudo-samples `y^p_j = r + gamma * f_{tau_j}(s', a')`,
//! a uniform Dirac mixture over the heads of the target network.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::{check_loss, iteration_shards, sa_input, Trained, TrainConfig, TargetUpdate};
use crate::env::{Policy, Transition};
use crate::error::{Error, Result};
use crate::metrics::{pinball, pinball_grad};
use crate::net::{optim_step_mlp, soft_update_mlp, Optim, Mlp};

/// Multi-head quantile model at fixed, strictly increasing levels.
#[derive(Debug, Clone)]
pub struct DiscreteQuantileModel {
    pub levels: Vec<f64>,
    pub action_count: usize,
    /// `levels.len()` outputs on the one-hot state-action encoding.
    pub net: Mlp,
}

impl DiscreteQuantileModel {
    pub fn quantiles(&self, state: &[f64], action: usize) -> Vec<f64> {
        self.net.forward(&sa_input(state, action, self.action_count))
    }

    /// Quantile-averaged value: the mean over heads.
    pub fn value(&self, state: &[f64], action: usize) -> f64 {
        let q = self.quantiles(state, action);
        q.iter().sum::<f64>() / q.len() as f64
    }
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("need >= 1 fixed quantile level".into()));
    }
    if levels.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Config("levels must lie in (0,1)".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Trains the fixed-level model by minimizing
/// `(1/m^2) sum_{h,j} rho_{tau_h}(y^p_j - f_{tau_h}(s, a))` per transition.
pub fn dqope_train<R: Rng + ?Sized>(
    dataset: &[Transition],
    target: &Policy,
    levels: &[f64],
    action_count: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Trained<DiscreteQuantileModel>> {
    if dataset.is_empty() {
        return Err(Error::Input("dataset must be non-empty".into()));
    }
    cfg.validate()?;
    validate_levels(levels)?;
    target.validate(action_count)?;
    let state_dim = dataset[0].state.len();
    let m = levels.len();

    let mut widths = Vec::with_capacity(cfg.hidden.len() + 2);
    widths.push(state_dim + action_count);
    widths.extend_from_slice(&cfg.hidden);
    widths.push(m);
    let mut net = Mlp::new(&widths, rng)?;
    let mut target_net = net.clone();
    let mut opt = Optim::new(cfg.optimizer, net.param_count(), cfg.learning_rate);
    let mut loss_trace = Vec::new();
    let mut step = 0usize;

    for shard in iteration_shards(dataset, cfg)? {
        for _ in 0..cfg.epochs_per_iteration {
            for batch in shard.chunks(cfg.batch_size) {
                let scale = 1.0 / (batch.len() * m * m) as f64;
                let mut grads = net.zero_grads();
                let mut loss = 0.0;
                for tr in batch {
                    let targets: Vec<f64> = if tr.terminal {
                        vec![cfg.clip_target(tr.reward); m]
                    } else {
                        let a2 = target.sample_action(&tr.next_state, action_count, rng);
                        let heads = target_net.forward(&sa_input(&tr.next_state, a2, action_count));
                        heads
                            .iter()
                            .map(|q| cfg.clip_target(tr.reward + cfg.gamma * q))
                            .collect()
                    };
                    let x = sa_input(&tr.state, tr.action, action_count);
                    let (heads, acts) = net.forward_cached(&x);
                    let mut out_grad = vec![0.0; m];
                    for (h, tau) in levels.iter().enumerate() {
                        for &y in &targets {
                            loss += scale * pinball(y - heads[h], *tau);
                            out_grad[h] -= scale * pinball_grad(y - heads[h], *tau);
                        }
                    }
                    net.backward_cached(&acts, &out_grad, &mut grads);
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
        model: DiscreteQuantileModel {
            levels: levels.to_vec(),
            action_count,
            net,
        },
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_increasing_levels_are_rejected() {
        assert!(validate_levels(&[0.2, 0.2, 0.8]).is_err());
        assert!(validate_levels(&[0.8, 0.2]).is_err());
        assert!(validate_levels(&[]).is_err());
        assert!(validate_levels(&[0.0, 0.5]).is_err());
        assert!(validate_levels(&[0.25, 0.5, 0.75]).is_ok());
    }
}
