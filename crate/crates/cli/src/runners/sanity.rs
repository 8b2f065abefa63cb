//! Single-pair quantile-fit sanity study: train on the toy environment,
//! compare the learned quantile function and its generated samples against
//! the Monte-Carlo ground truth.

use std::path::PathBuf;

use anyhow::{Context, Result};
use dqpope_core::env::{collect_dataset, mc_return_distribution, Policy};
use dqpope_core::metrics::{ks_statistic, midpoint_levels, sample_from_net};
use dqpope_core::ope::dqpope_train;

use super::replicate_rng;
use crate::config::{EstimatorName, ExperimentConfig};
use crate::csvout::{Cell, CsvWriter};
use crate::model_io::save_model;

#[derive(Debug, Clone)]
pub struct SanityReport {
    pub ks: f64,
    pub median_abs: f64,
    pub upper_gap: f64,
    pub files: Vec<PathBuf>,
}

impl SanityReport {
    pub fn pass(&self) -> bool {
        self.ks < 0.08 && self.median_abs < 0.1 && (0.8..=1.2).contains(&self.upper_gap)
    }
}

pub fn run_quantile_fit_sanity(cfg: &ExperimentConfig) -> Result<(SanityReport, PathBuf)> {
    let est = cfg
        .estimators
        .iter()
        .find(|e| e.name == EstimatorName::Dqpope)
        .context("quantile-fit-sanity requires a dqpope estimator entry")?;
    let env = cfg.build_env()?;
    let target = Policy::FixedAction(0);

    let n = est.toy_dataset_size();
    let mut data_rng = replicate_rng(cfg.base_seed, 0, 11);
    let dataset = collect_dataset(&env, &target, n, &mut data_rng)?;
    let train_cfg = est.train_config(n, env.gamma());
    let mut train_rng = replicate_rng(cfg.base_seed, 0, 12);
    let trained = dqpope_train(&dataset, &target, env.action_count(), &train_cfg, &mut train_rng)?;
    let net = trained.model;

    let mut oracle_rng = replicate_rng(cfg.base_seed, 0, 13);
    let oracle = mc_return_distribution(&env, &target, cfg.mc_rollouts, &mut oracle_rng)?;

    let state = vec![0.0];
    let out_dir = cfg.resolved_output_dir();
    let mut files = Vec::new();

    // Estimated vs ground-truth quantile curve on the 99-point midpoint grid.
    let curve_path = out_dir.join("quantile_curve.csv");
    let mut curve = CsvWriter::create(&curve_path, &["tau", "estimated", "ground_truth"])?;
    for tau in midpoint_levels(99) {
        curve.row(&[
            Cell::Float(tau),
            Cell::Float(net.forward(&state, 0, tau)?),
            Cell::Float(oracle.quantile(tau)),
        ])?;
    }
    curve.finish()?;
    files.push(curve_path);

    // Per-level curve dump of the trained estimator alone.
    let est_path = out_dir.join("estimator_curve.csv");
    let mut est_curve = CsvWriter::create(&est_path, &["tau", "value"])?;
    for tau in midpoint_levels(99) {
        est_curve.row(&[Cell::Float(tau), Cell::Float(net.forward(&state, 0, tau)?)])?;
    }
    est_curve.finish()?;
    files.push(est_path);

    let model_path = out_dir.join("model.json");
    save_model(&net, &model_path)?;
    files.push(model_path);

    // Generator fidelity and fitted-quantile checks.
    let mut gen_rng = replicate_rng(cfg.base_seed, 0, 14);
    let generated = sample_from_net(&net, &state, 0, 5000, &mut gen_rng)?;
    let mut fresh_rng = replicate_rng(cfg.base_seed, 0, 15);
    let fresh = mc_return_distribution(&env, &target, 5000, &mut fresh_rng)?;
    let ks = ks_statistic(generated.samples(), fresh.samples());
    let f_median = net.forward(&state, 0, 0.5)?;
    let upper_gap = net.forward(&state, 0, 0.841)? - f_median;

    let report = SanityReport {
        ks,
        median_abs: f_median.abs(),
        upper_gap,
        files,
    };

    let summary_path = out_dir.join("sanity.csv");
    let mut out = CsvWriter::create(&summary_path, &["metric", "value", "threshold", "pass"])?;
    let rows: Vec<(&str, f64, String, bool)> = vec![
        ("ks_statistic", report.ks, "<0.08".into(), report.ks < 0.08),
        (
            "median_abs",
            report.median_abs,
            "<0.1".into(),
            report.median_abs < 0.1,
        ),
        (
            "upper_gap",
            report.upper_gap,
            "[0.8,1.2]".into(),
            (0.8..=1.2).contains(&report.upper_gap),
        ),
    ];
    for (metric, value, threshold, pass) in rows {
        out.row(&[
            Cell::Text(metric.into()),
            Cell::Float(value),
            Cell::Text(threshold),
            Cell::Text(if pass { "1".into() } else { "0".into() }),
        ])?;
    }
    out.finish()?;
    Ok((report, summary_path))
}
