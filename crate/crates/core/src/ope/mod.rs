//! Off-policy estimators of the return distribution and policy value.
//!
//! `dqpope` is the quantile-process estimator; `dope` (fitted Q with squared
//! loss), `dqope` (fixed-level quantile regression), and `cateope`
//! (categorical projection) are the learned baselines; `wis`/`dr` are the
//! importance-sampling baselines over full trajectories.

mod cateope;
mod dope;
mod dqope;
mod dqpope;
mod importance;

pub use cateope::{cateope_project, cateope_train, AtomGrid, CategoricalModel};
pub use dope::{dope_train, q_value, v_value};
pub use dqope::{dqope_train, DiscreteQuantileModel};
pub use dqpope::dqpope_train;
pub use importance::{dr_estimate, wis_estimate};

use alloc::vec::Vec;
use rand::Rng;

use crate::env::{sample_open01, Env, Policy, ReturnDistribution, Transition};
use crate::error::{Error, Result};
use crate::net::{EmbeddingMode, OptimizerKind};

/// Losses above this (or any non-finite loss) abort training.
pub const LOSS_DIVERGENCE_LIMIT: f64 = 1e6;

/// How the lagged target model tracks the online model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetUpdate {
    /// Copy the online model every `k` optimizer steps.
    HardEvery(usize),
    /// Polyak-blend with rate `rho` after every step.
    Soft(f64),
}

/// Shared training configuration for the iterative estimators.
///
/// `m_target_samples` / `m_quantile_levels` are the improved multi-quantile
/// knobs; `(1, 1)` reproduces the single-draw update exactly.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Outer iterations `T`.
    pub iterations: usize,
    pub epochs_per_iteration: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    /// Partition the dataset into `T` contiguous shards, one per iteration.
    pub data_split: bool,
    /// Generator draws `u^j` per transition.
    pub m_target_samples: usize,
    /// Quantile levels `tau^h` per transition.
    pub m_quantile_levels: usize,
    pub target_update: TargetUpdate,
    pub embedding: EmbeddingMode,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub output_clip: Option<f64>,
    /// Clip regression targets to [-1e6, 1e6] (off by default; heavy-tailed
    /// rewards are passed through unless explicitly requested).
    pub clip_targets: bool,
    pub optimizer: OptimizerKind,
    /// Initialize the output bias at `mean(reward) / (1 - gamma)` so
    /// bootstrapped training starts near the value scale instead of
    /// climbing from zero.
    pub warm_start_bias: bool,
}

impl TrainConfig {
    /// Two hidden layers of 12 units, lr 0.002, batch 32: the one-step toy
    /// study setup. Plain SGD here: the toy study contrasts bounded pinball
    /// gradients with outlier-driven squared-loss gradients, a gap Adam's
    /// normalization would flatten.
    pub fn toy() -> Self {
        Self {
            iterations: 1,
            epochs_per_iteration: 1,
            batch_size: 32,
            learning_rate: 0.002,
            gamma: 0.99,
            data_split: false,
            m_target_samples: 1,
            m_quantile_levels: 1,
            target_update: TargetUpdate::HardEvery(15),
            embedding: EmbeddingMode::ConcatScalar,
            hidden: alloc::vec![12, 12],
            output_clip: None,
            clip_targets: false,
            optimizer: OptimizerKind::Sgd { momentum: 0.9 },
            warm_start_bias: false,
        }
    }

    /// Three hidden layers of 64 units, batch 64, hard target refreshes,
    /// Adam, warm-started output bias: the cart-pole study setup.
    pub fn cartpole() -> Self {
        Self {
            iterations: 1,
            epochs_per_iteration: 1,
            batch_size: 64,
            learning_rate: 0.001,
            gamma: 0.99,
            data_split: false,
            m_target_samples: 1,
            m_quantile_levels: 1,
            target_update: TargetUpdate::HardEvery(10),
            embedding: EmbeddingMode::ConcatScalar,
            hidden: alloc::vec![64, 64, 64],
            output_clip: None,
            clip_targets: false,
            optimizer: OptimizerKind::Adam,
            warm_start_bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0
            || self.epochs_per_iteration == 0
            || self.batch_size == 0
            || self.m_target_samples == 0
            || self.m_quantile_levels == 0
        {
            return Err(Error::Config(
                "iterations, epochs, batch size, and m/m' must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(alloc::format!(
                "gamma must lie in [0,1), got {}",
                self.gamma
            )));
        }
        if let TargetUpdate::HardEvery(k) = self.target_update {
            if k == 0 {
                return Err(Error::Config("hard update interval must be positive".into()));
            }
        }
        if let TargetUpdate::Soft(rho) = self.target_update {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::Config("soft update rate must lie in [0,1]".into()));
            }
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|w| *w == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn clip_target(&self, y: f64) -> f64 {
        if self.clip_targets {
            y.clamp(-1e6, 1e6)
        } else {
            y
        }
    }
}

/// A trained model together with its per-step loss trace.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub loss_trace: Vec<f64>,
}

/// Iteration shards: contiguous equal splits when `data_split` is set
/// (requiring `T` to divide `N`), otherwise the full dataset `T` times.
pub(crate) fn iteration_shards<'a>(
    dataset: &'a [Transition],
    cfg: &TrainConfig,
) -> Result<Vec<&'a [Transition]>> {
    if cfg.data_split {
        if dataset.len() % cfg.iterations != 0 {
            return Err(Error::Config(alloc::format!(
                "data_split requires iterations ({}) to divide dataset size ({})",
                cfg.iterations,
                dataset.len()
            )));
        }
        let shard = dataset.len() / cfg.iterations;
        Ok(dataset.chunks(shard).collect())
    } else {
        Ok((0..cfg.iterations).map(|_| dataset).collect())
    }
}

/// One-hot state-action encoding shared by every model in this module.
pub(crate) fn sa_input(state: &[f64], action: usize, action_count: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action_count);
    x.extend_from_slice(state);
    for a in 0..action_count {
        x.push(if a == action { 1.0 } else { 0.0 });
    }
    x
}

/// Dataset-driven output-bias warm start: mean reward scaled by an
/// effective discounted horizon. The terminal fraction of the occupancy
/// sample estimates the inverse episode length, so point-mass terminal data
/// warm-starts at the mean reward and non-terminating data at
/// `mean(r) / (1 - gamma)`.
pub(crate) fn warm_start_value(dataset: &[Transition], gamma: f64) -> f64 {
    let n = dataset.len() as f64;
    let mean_r = dataset.iter().map(|tr| tr.reward).sum::<f64>() / n;
    let term_frac = dataset.iter().filter(|tr| tr.terminal).count() as f64 / n;
    if gamma == 0.0 {
        return mean_r;
    }
    let effective_len = 1.0 / term_frac.max(1e-9);
    mean_r * (1.0 - libm::pow(gamma, effective_len)) / (1.0 - gamma)
}

pub(crate) fn check_loss(loss: f64, step: usize) -> Result<()> {
    if !loss.is_finite() || loss > LOSS_DIVERGENCE_LIMIT {
        Err(Error::TrainingDiverged { step, loss })
    } else {
        Ok(())
    }
}

/// Samples the estimated mixture return distribution: draws initial states
/// from the environment, actions from the target policy, and one generator
/// level per draw.
pub fn mixture_return_samples<R: Rng + ?Sized>(
    net: &crate::net::QuantileNet,
    env: &Env,
    target: &Policy,
    n: usize,
    rng: &mut R,
) -> Result<ReturnDistribution> {
    if n == 0 {
        return Err(Error::Input("sample count must be >= 1".into()));
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let s0 = env.reset(rng);
        let a0 = target.sample_action(&s0, env.action_count(), rng);
        let u = sample_open01(rng);
        samples.push(net.forward(&s0, a0, u)?);
    }
    ReturnDistribution::from_samples(samples)
}
