//! Experiment configuration: a single TOML document. Unknown keys are hard
//! errors so hyperparameter typos cannot pass silently.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dqpope_core::env::{Env, Policy, RewardNoise, TabularEnv, ToyEnv};
use dqpope_core::net::{EmbeddingMode, OptimizerKind};
use dqpope_core::ope::{TargetUpdate, TrainConfig};
use dqpope_core::tabular::{DiscreteReturnLaw, TabularMdp};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ToyMseTable,
    ComplexitySweep,
    TabularContraction,
    QuantileFitSanity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub replicates: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_mixture_rates")]
    pub mixture_rates: Vec<f64>,
    #[serde(default = "default_mc_rollouts")]
    pub mc_rollouts: usize,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Worker threads for replicate execution; 0 means all available.
    #[serde(default)]
    pub threads: usize,
    pub env: EnvConfig,
    #[serde(default)]
    pub target_policy: Option<PolicyConfig>,
    #[serde(default)]
    pub estimators: Vec<EstimatorConfig>,
}

fn default_k_values() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn default_sample_sizes() -> Vec<usize> {
    vec![1000, 4000, 16000]
}

fn default_mixture_rates() -> Vec<f64> {
    vec![1.0, 0.8, 0.6, 0.4]
}

fn default_mc_rollouts() -> usize {
    1000
}

fn default_eval_samples() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub horizon_cap: Option<usize>,
    /// Toy environment base reward.
    #[serde(default)]
    pub base_reward: f64,
    #[serde(default)]
    pub reward_noise: Option<NoiseConfig>,
    #[serde(default)]
    pub tabular: Option<TabularConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    ToyTwoState,
    Cartpole,
    Tabular,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub distribution: NoiseKind,
    #[serde(default)]
    pub degrees_of_freedom: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Normal,
    StudentT,
}

impl NoiseConfig {
    pub fn to_noise(&self) -> Result<RewardNoise> {
        let noise = match self.distribution {
            NoiseKind::Normal => RewardNoise::Normal {
                sigma: self.sigma.context("normal noise requires `sigma`")?,
            },
            NoiseKind::StudentT => RewardNoise::StudentT {
                df: self
                    .degrees_of_freedom
                    .context("student-t noise requires `degrees_of_freedom`")?,
            },
        };
        noise.validate()?;
        Ok(noise)
    }
}

/// Explicit finite MDP tables.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularConfig {
    /// `transition[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward_atoms[s][a]` and matching probabilities.
    pub reward_atoms: Vec<Vec<Vec<f64>>>,
    pub reward_probs: Vec<Vec<Vec<f64>>>,
    /// Target policy table `pi[s][a]`.
    pub policy: Vec<Vec<f64>>,
    pub initial_dist: Vec<f64>,
    #[serde(default)]
    pub terminal_states: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default)]
    pub action: Option<usize>,
    #[serde(default)]
    pub base_fraction: Option<f64>,
    #[serde(default)]
    pub base: Option<Box<PolicyConfig>>,
    #[serde(default)]
    pub table: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    UniformRandom,
    FixedAction,
    Mixture,
    HeuristicCartpole,
    TabularStochastic,
}

impl PolicyConfig {
    pub fn to_policy(&self) -> Result<Policy> {
        Ok(match self.kind {
            PolicyKind::UniformRandom => Policy::UniformRandom,
            PolicyKind::FixedAction => {
                Policy::FixedAction(self.action.context("fixed-action requires `action`")?)
            }
            PolicyKind::Mixture => Policy::Mixture {
                base: Box::new(
                    self.base
                        .as_ref()
                        .context("mixture requires a `base` policy")?
                        .to_policy()?,
                ),
                base_fraction: self
                    .base_fraction
                    .context("mixture requires `base_fraction`")?,
            },
            PolicyKind::HeuristicCartpole => Policy::HeuristicCartPole,
            PolicyKind::TabularStochastic => Policy::TabularStochastic(
                self.table
                    .clone()
                    .context("tabular-stochastic requires `table`")?,
            ),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub name: EstimatorName,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Total optimizer steps for the run.
    #[serde(default = "default_updates")]
    pub updates: usize,
    #[serde(default = "default_one")]
    pub iterations: usize,
    #[serde(default)]
    pub data_split: bool,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub embedding: EmbeddingKind,
    #[serde(default = "default_cosine_order")]
    pub cosine_order: usize,
    #[serde(default)]
    pub output_clip: Option<f64>,
    #[serde(default)]
    pub clip_targets: bool,
    #[serde(default)]
    pub m_target_samples: Option<usize>,
    #[serde(default)]
    pub m_quantile_levels: Option<usize>,
    #[serde(default)]
    pub target_update: Option<TargetUpdateConfig>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub warm_start_bias: Option<bool>,
    /// Fixed-pool size for the toy table; 0 draws fresh data per batch.
    #[serde(default)]
    pub pool_size: usize,
    /// Fixed-level head count (dqope).
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Atom grid (cateope).
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Evaluate the policy value on a fixed midpoint grid instead of random
    /// levels (dqpope).
    #[serde(default)]
    pub midpoint_levels: bool,
}

fn default_lr() -> f64 {
    0.002
}
fn default_batch() -> usize {
    32
}
fn default_updates() -> usize {
    100
}
fn default_one() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![12, 12]
}
fn default_cosine_order() -> usize {
    64
}
fn default_levels() -> usize {
    32
}
fn default_atoms() -> usize {
    51
}
fn default_v_min() -> f64 {
    -10.0
}
fn default_v_max() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Dqpope,
    Dope,
    Dqope,
    Cateope,
}

impl EstimatorName {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorName::Dqpope => "dqpope",
            EstimatorName::Dope => "dope",
            EstimatorName::Dqope => "dqope",
            EstimatorName::Cateope => "cateope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    #[default]
    ConcatScalar,
    Cosine,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetUpdateConfig {
    #[serde(default)]
    pub hard_every: Option<usize>,
    #[serde(default)]
    pub soft: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam,
    Sgd {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be >= 1");
        }
        if self.k_values.is_empty() {
            bail!("k_values must be non-empty");
        }
        for est in &self.estimators {
            if est.updates == 0 || est.batch_size == 0 {
                bail!("estimator {} needs positive updates/batch", est.name.as_str());
            }
        }
        match self.kind {
            ExperimentKind::ToyMseTable | ExperimentKind::QuantileFitSanity => {
                if self.env.kind != EnvKind::ToyTwoState {
                    bail!("{:?} requires the toy-two-state environment", self.kind);
                }
            }
            ExperimentKind::ComplexitySweep => {
                if self.env.kind == EnvKind::ToyTwoState {
                    bail!("complexity-sweep requires cartpole or tabular environment");
                }
                if self.sample_sizes.is_empty() || self.mixture_rates.is_empty() {
                    bail!("complexity-sweep requires sample_sizes and mixture_rates");
                }
            }
            ExperimentKind::TabularContraction => {}
        }
        Ok(())
    }

    /// Output directory, honoring the `DQPOPE_OUTPUT_DIR` override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os("DQPOPE_OUTPUT_DIR") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn build_env(&self) -> Result<Env> {
        self.env.build()
    }

    /// Target policy; defaults to the heuristic on cartpole, the single
    /// action on the toy environment, and the MDP's own table on tabular.
    pub fn build_target_policy(&self) -> Result<Policy> {
        if let Some(p) = &self.target_policy {
            return p.to_policy();
        }
        Ok(match self.env.kind {
            EnvKind::ToyTwoState => Policy::FixedAction(0),
            EnvKind::Cartpole => Policy::HeuristicCartPole,
            EnvKind::Tabular => {
                let tab = self.env.tabular.as_ref().context("tabular env tables")?;
                Policy::TabularStochastic(tab.policy.clone())
            }
        })
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<Env> {
        match self.kind {
            EnvKind::ToyTwoState => {
                let noise = match &self.reward_noise {
                    Some(n) => n.to_noise()?,
                    None => RewardNoise::Normal { sigma: 1.0 },
                };
                Ok(Env::Toy(ToyEnv::new(
                    self.base_reward,
                    noise,
                    self.gamma.unwrap_or(ToyEnv::DEFAULT_GAMMA),
                )?))
            }
            EnvKind::Cartpole => {
                let gamma = self.gamma.unwrap_or(0.99);
                let cap = self.horizon_cap.unwrap_or(500);
                Ok(Env::CartPole(dqpope_core::env::CartPoleEnv::new(gamma, cap)?))
            }
            EnvKind::Tabular => {
                let tab = self
                    .tabular
                    .as_ref()
                    .context("tabular environment requires [env.tabular] tables")?;
                let n_states = tab.transition.len();
                let n_actions = tab
                    .transition
                    .first()
                    .map(|row| row.len())
                    .context("empty transition table")?;
                let mut reward = Vec::with_capacity(n_states);
                for (s, (atoms_row, probs_row)) in
                    tab.reward_atoms.iter().zip(&tab.reward_probs).enumerate()
                {
                    let mut row = Vec::with_capacity(n_actions);
                    for (a, (atoms, probs)) in atoms_row.iter().zip(probs_row).enumerate() {
                        let pairs: Vec<(f64, f64)> = atoms
                            .iter()
                            .copied()
                            .zip(probs.iter().copied())
                            .collect();
                        row.push(DiscreteReturnLaw::new(pairs).with_context(|| {
                            format!("reward law at state {s} action {a}")
                        })?);
                    }
                    reward.push(row);
                }
                let mdp = TabularMdp {
                    n_states,
                    n_actions,
                    transition: tab.transition.clone(),
                    reward,
                    gamma: self.gamma.unwrap_or(0.9),
                    target_policy: tab.policy.clone(),
                };
                mdp.validate()?;
                let terminal = tab
                    .terminal_states
                    .clone()
                    .unwrap_or_else(|| vec![false; n_states]);
                Ok(Env::Tabular(TabularEnv::new(
                    mdp,
                    tab.initial_dist.clone(),
                    terminal,
                    self.horizon_cap.unwrap_or(100),
                )?))
            }
        }
    }
}

impl EstimatorConfig {
    /// Training configuration for a dataset of `n` transitions: epochs are
    /// chosen so roughly `updates` optimizer steps run in total.
    pub fn train_config(&self, n: usize, gamma: f64) -> TrainConfig {
        let per_epoch = n.div_ceil(self.batch_size).max(1);
        let epochs = self
            .updates
            .div_ceil(self.iterations.max(1) * per_epoch)
            .max(1);
        let mut cfg = TrainConfig {
            iterations: self.iterations.max(1),
            epochs_per_iteration: epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            gamma,
            data_split: self.data_split,
            hidden: self.hidden.clone(),
            output_clip: self.output_clip,
            clip_targets: self.clip_targets,
            ..TrainConfig::toy()
        };
        cfg.embedding = match self.embedding {
            EmbeddingKind::ConcatScalar => EmbeddingMode::ConcatScalar,
            EmbeddingKind::Cosine => EmbeddingMode::Cosine {
                order: self.cosine_order,
            },
        };
        if let Some(m) = self.m_target_samples {
            cfg.m_target_samples = m;
        }
        if let Some(m) = self.m_quantile_levels {
            cfg.m_quantile_levels = m;
        }
        if let Some(tu) = &self.target_update {
            cfg.target_update = match (tu.hard_every, tu.soft) {
                (Some(k), None) => TargetUpdate::HardEvery(k),
                (None, Some(rho)) => TargetUpdate::Soft(rho),
                _ => cfg.target_update,
            };
        }
        if let Some(opt) = &self.optimizer {
            cfg.optimizer = match opt {
                OptimizerConfig::Adam => OptimizerKind::Adam,
                OptimizerConfig::Sgd { momentum } => OptimizerKind::Sgd {
                    momentum: *momentum,
                },
            };
        }
        if let Some(w) = self.warm_start_bias {
            cfg.warm_start_bias = w;
        }
        cfg
    }

    /// Dataset size for one toy-table run: `updates * batch` fresh draws, or
    /// the configured fixed pool.
    pub fn toy_dataset_size(&self) -> usize {
        if self.pool_size > 0 {
            self.pool_size
        } else {
            self.updates * self.batch_size
        }
    }
}
