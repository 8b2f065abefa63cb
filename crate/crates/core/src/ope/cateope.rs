//! Categorical return-distribution estimation on a fixed atom grid.
//!
//! The bootstrapped target distribution is built by shifting every atom to
//! `clip(r + gamma * z_j, v_min, v_max)` and distributing its probability
//! mass onto the two neighboring grid atoms by linear interpolation; the
//! network is then fit by cross-entropy.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::{check_loss, iteration_shards, sa_input, Trained, TrainConfig, TargetUpdate};
use crate::env::{Policy, Transition};
use crate::error::{Error, Result};
use crate::net::{optim_step_mlp, soft_update_mlp, Optim, Mlp};

/// Uniformly spaced atom grid on `[v_min, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomGrid {
    pub count: usize,
    pub v_min: f64,
    pub v_max: f64,
}

impl AtomGrid {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::Config("atom grid needs >= 2 atoms".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Config("atom grid needs v_min < v_max".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.v_max - self.v_min) / (self.count - 1) as f64
    }

    pub fn atoms(&self) -> Vec<f64> {
        let dz = self.spacing();
        (0..self.count).map(|k| self.v_min + k as f64 * dz).collect()
    }
}

/// Categorical model: softmax head over the atom grid.
#[derive(Debug, Clone)]
pub struct CategoricalModel {
    pub grid: AtomGrid,
    pub action_count: usize,
    pub net: Mlp,
}

impl CategoricalModel {
    pub fn probs(&self, state: &[f64], action: usize) -> Vec<f64> {
        softmax(&self.net.forward(&sa_input(state, action, self.action_count)))
    }

    /// Expected value `sum_k z_k p_k`; always inside `[v_min, v_max]`.
    pub fn value(&self, state: &[f64], action: usize) -> f64 {
        let atoms = self.grid.atoms();
        self.probs(state, action)
            .iter()
            .zip(&atoms)
            .map(|(p, z)| p * z)
            .sum()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Projects the shifted distribution `clip(r + gamma * z, v_min, v_max)`
/// back onto the grid. Mass at a shifted atom `z_hat` with fractional index
/// `b = (z_hat - v_min)/dz` splits onto `floor(b)` and `ceil(b)` with linear
/// weights; an integral `b` (within 1e-9, absorbing float noise in the
/// shift) keeps its full mass on that atom.
pub fn cateope_project(
    reward: f64,
    gamma: f64,
    next_probs: &[f64],
    atoms: &[f64],
    v_min: f64,
    v_max: f64,
) -> Vec<f64> {
    debug_assert_eq!(next_probs.len(), atoms.len());
    let k = atoms.len();
    let dz = (v_max - v_min) / (k - 1) as f64;
    let mut mass = vec![0.0; k];
    for (p, z) in next_probs.iter().zip(atoms) {
        let shifted = (reward + gamma * z).clamp(v_min, v_max);
        let b = (shifted - v_min) / dz;
        let nearest = libm::round(b);
        if libm::fabs(b - nearest) < 1e-9 {
            mass[nearest as usize] += p;
        } else {
            let lo = libm::floor(b) as usize;
            let hi = libm::ceil(b) as usize;
            mass[lo] += p * (hi as f64 - b);
            mass[hi] += p * (b - lo as f64);
        }
    }
    mass
}

/// Trains the categorical model: targets from [`cateope_project`] applied to
/// the target network's next-state distribution (terminal transitions
/// project the point mass at `r`), cross-entropy loss, Adam.
pub fn cateope_train<R: Rng + ?Sized>(
    dataset: &[Transition],
    target: &Policy,
    grid: AtomGrid,
    action_count: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Trained<CategoricalModel>> {
    if dataset.is_empty() {
        return Err(Error::Input("dataset must be non-empty".into()));
    }
    cfg.validate()?;
    grid.validate()?;
    target.validate(action_count)?;
    let state_dim = dataset[0].state.len();
    let atoms = grid.atoms();
    let k = atoms.len();

    let mut widths = Vec::with_capacity(cfg.hidden.len() + 2);
    widths.push(state_dim + action_count);
    widths.extend_from_slice(&cfg.hidden);
    widths.push(k);
    let mut net = Mlp::new(&widths, rng)?;
    let mut target_net = net.clone();
    let mut opt = Optim::new(cfg.optimizer, net.param_count(), cfg.learning_rate);
    let mut loss_trace = Vec::new();
    let mut step = 0usize;

    let uniform = vec![1.0 / k as f64; k];
    for shard in iteration_shards(dataset, cfg)? {
        for _ in 0..cfg.epochs_per_iteration {
            for batch in shard.chunks(cfg.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut grads = net.zero_grads();
                let mut loss = 0.0;
                for tr in batch {
                    let target_mass = if tr.terminal {
                        // gamma = 0 collapses every shifted atom onto r, so
                        // the next-state distribution is irrelevant.
                        cateope_project(tr.reward, 0.0, &uniform, &atoms, grid.v_min, grid.v_max)
                    } else {
                        let a2 = target.sample_action(&tr.next_state, action_count, rng);
                        let next_probs = softmax(
                            &target_net.forward(&sa_input(&tr.next_state, a2, action_count)),
                        );
                        cateope_project(
                            tr.reward,
                            cfg.gamma,
                            &next_probs,
                            &atoms,
                            grid.v_min,
                            grid.v_max,
                        )
                    };
                    let x = sa_input(&tr.state, tr.action, action_count);
                    let (logits, acts) = net.forward_cached(&x);
                    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let log_norm =
                        libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
                    let probs = softmax(&logits);
                    let mut out_grad = vec![0.0; k];
                    for idx in 0..k {
                        if target_mass[idx] > 0.0 {
                            loss -= scale * target_mass[idx] * (logits[idx] - max - log_norm);
                        }
                        out_grad[idx] = scale * (probs[idx] - target_mass[idx]);
                    }
                    net.backward_cached(&acts, &out_grad, &mut grads);
                }
                check_loss(loss, step)?;
                loss_trace.push(loss);
                optim_step_mlp(&mut net, &grads, &mut opt)?;
                step += 1;
                match cfg.target_update {
                    TargetUpdate::HardEvery(kk) => {
                        if step % kk == 0 {
                            target_net = net.clone();
                        }
                    }
                    TargetUpdate::Soft(rho) => soft_update_mlp(&mut target_net, &net, rho)?,
                }
            }
        }
    }
    Ok(Trained {
        model: CategoricalModel {
            grid,
            action_count,
            net,
        },
        loss_trace,
    })
}
