//! Sample-complexity sweep: estimation error against the Monte-Carlo oracle
//! across dataset sizes and behavior-mixture rates.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use dqpope_core::env::{collect_dataset, mc_return_distribution, Policy};
use dqpope_core::metrics::w1_empirical;
use dqpope_core::ope::{dqpope_train, mixture_return_samples};

use super::replicate_rng;
use crate::config::{EstimatorName, ExperimentConfig};
use crate::csvout::{Cell, CsvWriter};
use crate::pool::parallel_run;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mixture_rate: f64,
    pub sample_size: usize,
    pub seed: u64,
    pub w1: f64,
}

pub fn run_complexity_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, PathBuf)> {
    let est = cfg
        .estimators
        .iter()
        .find(|e| e.name == EstimatorName::Dqpope)
        .context("complexity-sweep requires a dqpope estimator entry")?;
    let env = cfg.build_env()?;
    let target = cfg.build_target_policy()?;
    target.validate(env.action_count())?;

    // Ground truth: the mixture return distribution under the target policy.
    let mut oracle_rng = replicate_rng(cfg.base_seed, 0, 1);
    let oracle = mc_return_distribution(&env, &target, cfg.mc_rollouts, &mut oracle_rng)?;

    let mut cells = Vec::new();
    for (i, rate) in cfg.mixture_rates.iter().enumerate() {
        if !(0.0..=1.0).contains(rate) {
            bail!("mixture rate {rate} outside [0,1]");
        }
        for (j, n) in cfg.sample_sizes.iter().enumerate() {
            cells.push((*rate, *n, (i * cfg.sample_sizes.len() + j) as u64));
        }
    }

    let runs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates as u64).map(move |s| (c, s)))
        .collect();
    let results: Vec<Result<SweepRow>> = parallel_run(runs.len(), cfg.threads, |idx| {
        let (c, seed) = runs[idx];
        let (rate, n, cell) = cells[c];
        let behavior = Policy::Mixture {
            base: Box::new(target.clone()),
            base_fraction: rate,
        };
        let mut data_rng = replicate_rng(cfg.base_seed, seed, 8 * cell + 2);
        let dataset = collect_dataset(&env, &behavior, n, &mut data_rng)?;
        let train_cfg = est.train_config(n, env.gamma());
        let mut train_rng = replicate_rng(cfg.base_seed, seed, 8 * cell + 3);
        let trained = dqpope_train(&dataset, &target, env.action_count(), &train_cfg, &mut train_rng)?;
        let mut eval_rng = replicate_rng(cfg.base_seed, seed, 8 * cell + 4);
        let estimate =
            mixture_return_samples(&trained.model, &env, &target, cfg.eval_samples, &mut eval_rng)?;
        Ok(SweepRow {
            mixture_rate: rate,
            sample_size: n,
            seed,
            w1: w1_empirical(&estimate, &oracle),
        })
    });
    let rows: Vec<SweepRow> = results.into_iter().collect::<Result<_>>()?;

    let path = cfg.resolved_output_dir().join("complexity_sweep.csv");
    let mut out = CsvWriter::create(&path, &["mixture_rate", "sample_size", "seed", "w1"])?;
    for row in &rows {
        out.row(&[
            Cell::Float(row.mixture_rate),
            Cell::Int(row.sample_size as i64),
            Cell::Int(row.seed as i64),
            Cell::Float(row.w1),
        ])?;
    }
    out.finish()?;
    Ok((rows, path))
}

/// Mean W1 over seeds for one (rate, size) cell.
pub fn mean_w1(rows: &[SweepRow], rate: f64, size: usize) -> Option<f64> {
    let cell: Vec<f64> = rows
        .iter()
        .filter(|r| r.mixture_rate == rate && r.sample_size == size)
        .map(|r| r.w1)
        .collect();
    if cell.is_empty() {
        None
    } else {
        Some(cell.iter().sum::<f64>() / cell.len() as f64)
    }
}
