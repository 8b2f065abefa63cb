//! Contraction property suite over random tabular problems.

use std::path::PathBuf;

use anyhow::Result;
use dqpope_core::tabular::{
    apply_bellman, discounted_occupancy, occupancy_terms_for_tol, wbar_p, DiscreteReturnLaw,
    ReturnLawTable, TabularMdp,
};
use rand::Rng;

use super::replicate_rng;
use crate::config::ExperimentConfig;
use crate::csvout::{Cell, CsvWriter};

#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// One entry per (gamma, p): (gamma, p, trials, skipped, max_ratio, bound).
    pub rows: Vec<(f64, u32, usize, usize, f64, f64)>,
}

impl ContractionReport {
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|(_, _, _, _, ratio, bound)| *ratio <= bound + 1e-9)
    }
}

fn random_dist<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_law<R: Rng>(rng: &mut R) -> DiscreteReturnLaw {
    let n = rng.gen_range(1..=3);
    let probs = random_dist(n, rng);
    let pairs = probs
        .into_iter()
        .map(|p| (rng.gen_range(-3.0..3.0), p))
        .collect();
    DiscreteReturnLaw::new(pairs).expect("random law is valid")
}

fn random_mdp<R: Rng>(gamma: f64, rng: &mut R) -> TabularMdp {
    let n_states = rng.gen_range(2..=4);
    let n_actions = rng.gen_range(1..=3);
    TabularMdp {
        n_states,
        n_actions,
        transition: (0..n_states)
            .map(|_| (0..n_actions).map(|_| random_dist(n_states, rng)).collect())
            .collect(),
        reward: (0..n_states)
            .map(|_| (0..n_actions).map(|_| random_law(rng)).collect())
            .collect(),
        gamma,
        target_policy: (0..n_states).map(|_| random_dist(n_actions, rng)).collect(),
    }
}

fn random_table<R: Rng>(mdp: &TabularMdp, rng: &mut R) -> ReturnLawTable {
    (0..mdp.n_states)
        .map(|_| (0..mdp.n_actions).map(|_| random_law(rng)).collect())
        .collect()
}

/// Max observed contraction ratio over `trials` random problems; degenerate
/// pairs (distance zero) are skipped and counted.
pub fn max_contraction_ratio(
    gamma: f64,
    p: u32,
    trials: usize,
    base_seed: u64,
    stream: u64,
) -> Result<(f64, usize)> {
    let mut rng = replicate_rng(base_seed, 0, stream);
    let terms = occupancy_terms_for_tol(gamma, 1e-12);
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut skipped = 0;
    while done < trials {
        let mdp = random_mdp(gamma, &mut rng);
        let rho = random_dist(mdp.n_states, &mut rng);
        let occupancy = discounted_occupancy(&mdp, &mdp.target_policy, &rho, terms);
        let eta1 = random_table(&mdp, &mut rng);
        let eta2 = random_table(&mdp, &mut rng);
        let before = wbar_p(&occupancy, &eta1, &eta2, p)?;
        if before == 0.0 {
            skipped += 1;
            continue;
        }
        let after = wbar_p(
            &occupancy,
            &apply_bellman(&mdp, &eta1)?,
            &apply_bellman(&mdp, &eta2)?,
            p,
        )?;
        worst = worst.max(after / before);
        done += 1;
    }
    Ok((worst, skipped))
}

pub fn run_contraction_suite(cfg: &ExperimentConfig) -> Result<(ContractionReport, PathBuf)> {
    let mut rows = Vec::new();
    for (i, (gamma, p)) in [(0.5f64, 1u32), (0.5, 2), (0.9, 1), (0.9, 2)]
        .into_iter()
        .enumerate()
    {
        let bound = gamma.powf(1.0 - 1.0 / (2.0 * p as f64));
        let (ratio, skipped) =
            max_contraction_ratio(gamma, p, cfg.replicates, cfg.base_seed, 40 + i as u64)?;
        rows.push((gamma, p, cfg.replicates, skipped, ratio, bound));
    }
    let report = ContractionReport { rows };

    let path = cfg.resolved_output_dir().join("contraction.csv");
    let mut out = CsvWriter::create(
        &path,
        &["gamma", "p", "trials", "skipped", "max_ratio", "bound", "pass"],
    )?;
    for (gamma, p, trials, skipped, ratio, bound) in &report.rows {
        out.row(&[
            Cell::Float(*gamma),
            Cell::Int(*p as i64),
            Cell::Int(*trials as i64),
            Cell::Int(*skipped as i64),
            Cell::Float(*ratio),
            Cell::Float(*bound),
            Cell::Text(if ratio <= &(bound + 1e-9) { "1".into() } else { "0".into() }),
        ])?;
    }
    out.finish()?;
    Ok((report, path))
}
