//! Policy-value MSE table on the one-step toy environment across
//! heavy-tailed noise settings.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use dqpope_core::env::{collect_dataset, Env, Policy, RewardNoise, ToyEnv};
use dqpope_core::metrics::{midpoint_levels, mse_over_replicates, uniform_levels, value_from_quantiles};
use dqpope_core::ope::{cateope_train, dope_train, dqope_train, dqpope_train, q_value, AtomGrid};
use rand::Rng;

use super::replicate_rng;
use crate::config::{EstimatorConfig, EstimatorName, ExperimentConfig};
use crate::csvout::{Cell, CsvWriter};
use crate::pool::parallel_run;

/// The study's noise settings, heaviest tail first.
pub fn noise_settings() -> Vec<(&'static str, RewardNoise)> {
    vec![
        ("t2", RewardNoise::StudentT { df: 2.0 }),
        ("t4", RewardNoise::StudentT { df: 4.0 }),
        ("t6", RewardNoise::StudentT { df: 6.0 }),
        ("t8", RewardNoise::StudentT { df: 8.0 }),
        ("t10", RewardNoise::StudentT { df: 10.0 }),
        ("normal", RewardNoise::Normal { sigma: 1.0 }),
    ]
}

/// Aggregated table: `mse[noise][column]`, scaled by 1e3 like the headline
/// numbers, plus the standard deviation of per-replicate squared errors.
#[derive(Debug, Clone)]
pub struct ToyMseTable {
    pub noises: Vec<String>,
    pub columns: Vec<String>,
    pub mse_x1000: Vec<Vec<f64>>,
    pub sd_x1000: Vec<Vec<f64>>,
}

impl ToyMseTable {
    pub fn cell(&self, noise: &str, column: &str) -> Option<f64> {
        let i = self.noises.iter().position(|n| n == noise)?;
        let j = self.columns.iter().position(|c| c == column)?;
        Some(self.mse_x1000[i][j])
    }
}

fn column_labels(estimators: &[EstimatorConfig], k_values: &[usize]) -> Vec<String> {
    let mut columns = Vec::new();
    for est in estimators {
        match est.name {
            EstimatorName::Dqpope => {
                for k in k_values {
                    columns.push(format!("dqpope_k{k}"));
                }
            }
            EstimatorName::Dope => columns.push("dope".into()),
            EstimatorName::Dqope => columns.push(format!("dqope_m{}", est.levels)),
            EstimatorName::Cateope => columns.push("cateope".into()),
        }
    }
    columns
}

/// One replicate: per-column policy-value estimates for one noise setting.
fn run_replicate(
    cfg: &ExperimentConfig,
    noise: RewardNoise,
    noise_idx: usize,
    replicate: u64,
) -> Result<Vec<f64>> {
    let env = Env::Toy(ToyEnv::new(
        cfg.env.base_reward,
        noise,
        cfg.env.gamma.unwrap_or(ToyEnv::DEFAULT_GAMMA),
    )?);
    let target = Policy::FixedAction(0);
    let action_count = env.action_count();
    let cell = noise_idx as u64;

    let max_size = cfg
        .estimators
        .iter()
        .map(EstimatorConfig::toy_dataset_size)
        .max()
        .context("no estimators configured")?;
    let mut data_rng = replicate_rng(cfg.base_seed, replicate, 100 + cell);
    let dataset = collect_dataset(&env, &target, max_size, &mut data_rng)?;

    let mut estimates = Vec::new();
    for (e_idx, est) in cfg.estimators.iter().enumerate() {
        let slice = &dataset[..est.toy_dataset_size()];
        let train_cfg = est.train_config(slice.len(), env.gamma());
        let mut train_rng =
            replicate_rng(cfg.base_seed, replicate, 1000 + cell * 16 + e_idx as u64);
        let mut eval_rng =
            replicate_rng(cfg.base_seed, replicate, 5000 + cell * 16 + e_idx as u64);
        match est.name {
            EstimatorName::Dqpope => {
                let trained = dqpope_train(slice, &target, action_count, &train_cfg, &mut train_rng)?;
                for k in &cfg.k_values {
                    let draws: Vec<(Vec<f64>, usize)> = (0..*k)
                        .map(|_| {
                            let s0 = env.reset(&mut eval_rng);
                            let a0 = target.sample_action(&s0, action_count, &mut eval_rng);
                            (s0, a0)
                        })
                        .collect();
                    let levels = if est.midpoint_levels {
                        midpoint_levels(*k)
                    } else {
                        uniform_levels(*k, &mut eval_rng)
                    };
                    estimates.push(value_from_quantiles(&trained.model, &draws, &levels)?);
                }
            }
            EstimatorName::Dope => {
                let trained = dope_train(slice, &target, action_count, &train_cfg, &mut train_rng)?;
                estimates.push(mean_initial_value(&env, &target, &mut eval_rng, |s, a| {
                    q_value(&trained.model, s, a, action_count)
                }));
            }
            EstimatorName::Dqope => {
                let levels = midpoint_levels(est.levels);
                let trained =
                    dqope_train(slice, &target, &levels, action_count, &train_cfg, &mut train_rng)?;
                estimates.push(mean_initial_value(&env, &target, &mut eval_rng, |s, a| {
                    trained.model.value(s, a)
                }));
            }
            EstimatorName::Cateope => {
                let grid = AtomGrid {
                    count: est.atoms,
                    v_min: est.v_min,
                    v_max: est.v_max,
                };
                let trained =
                    cateope_train(slice, &target, grid, action_count, &train_cfg, &mut train_rng)?;
                estimates.push(mean_initial_value(&env, &target, &mut eval_rng, |s, a| {
                    trained.model.value(s, a)
                }));
            }
        }
    }
    Ok(estimates)
}

/// Value estimate averaged over initial state-action draws.
fn mean_initial_value<R: Rng>(
    env: &Env,
    target: &Policy,
    rng: &mut R,
    value: impl Fn(&[f64], usize) -> f64,
) -> f64 {
    let draws = 128;
    let mut acc = 0.0;
    for _ in 0..draws {
        let s0 = env.reset(rng);
        let a0 = target.sample_action(&s0, env.action_count(), rng);
        acc += value(&s0, a0);
    }
    acc / draws as f64
}

pub fn run_toy_mse_table(cfg: &ExperimentConfig) -> Result<(ToyMseTable, PathBuf)> {
    if cfg.estimators.is_empty() {
        bail!("toy-mse-table requires at least one estimator");
    }
    let columns = column_labels(&cfg.estimators, &cfg.k_values);
    let settings = noise_settings();
    let truth = cfg.env.base_reward;

    let mut mse_x1000 = Vec::new();
    let mut sd_x1000 = Vec::new();
    for (noise_idx, (_, noise)) in settings.iter().enumerate() {
        let per_replicate: Vec<Result<Vec<f64>>> = parallel_run(cfg.replicates, cfg.threads, |r| {
            run_replicate(cfg, *noise, noise_idx, r as u64)
        });
        let mut by_column: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.replicates); columns.len()];
        for rep in per_replicate {
            let estimates = rep?;
            for (j, v) in estimates.into_iter().enumerate() {
                by_column[j].push(v);
            }
        }
        let mut row_mse = Vec::new();
        let mut row_sd = Vec::new();
        for estimates in &by_column {
            let mse = mse_over_replicates(estimates, truth)?;
            let sq: Vec<f64> = estimates.iter().map(|v| (v - truth) * (v - truth)).collect();
            let var = sq.iter().map(|x| (x - mse) * (x - mse)).sum::<f64>() / sq.len() as f64;
            row_mse.push(mse * 1e3);
            row_sd.push(var.sqrt() * 1e3);
        }
        mse_x1000.push(row_mse);
        sd_x1000.push(row_sd);
    }

    let table = ToyMseTable {
        noises: settings.iter().map(|(n, _)| n.to_string()).collect(),
        columns,
        mse_x1000,
        sd_x1000,
    };

    let path = cfg.resolved_output_dir().join("toy_mse_table.csv");
    let mut out = CsvWriter::create(&path, &["noise", "estimator", "mse_x1000", "sd_x1000"])?;
    for (i, noise) in table.noises.iter().enumerate() {
        for (j, column) in table.columns.iter().enumerate() {
            out.row(&[
                Cell::Text(noise.clone()),
                Cell::Text(column.clone()),
                Cell::Float(table.mse_x1000[i][j]),
                Cell::Float(table.sd_x1000[i][j]),
            ])?;
        }
    }
    out.finish()?;
    Ok((table, path))
}
