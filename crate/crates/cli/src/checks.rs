//! Built-in property suites behind `dqpope check`.

use anyhow::Result;
use dqpope_core::net::{EmbeddingMode, QuantileGrads, QuantileNet};
use dqpope_core::ope::cateope_project;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::runners::contraction::max_contraction_ratio;

pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub fn run_all_checks() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        gradient_check()?,
        contraction_check()?,
        projection_check(),
    ])
}

fn param_get(net: &QuantileNet, mut k: usize) -> f64 {
    for layer in &net.layers {
        if k < layer.w.len() {
            return layer.w[k];
        }
        k -= layer.w.len();
        if k < layer.b.len() {
            return layer.b[k];
        }
        k -= layer.b.len();
    }
    let e = net.embed.as_ref().unwrap();
    if k < e.w.len() {
        e.w[k]
    } else {
        e.b[k - e.w.len()]
    }
}

fn param_set(net: &mut QuantileNet, mut k: usize, v: f64) {
    for layer in net.layers.iter_mut() {
        if k < layer.w.len() {
            layer.w[k] = v;
            return;
        }
        k -= layer.w.len();
        if k < layer.b.len() {
            layer.b[k] = v;
            return;
        }
        k -= layer.b.len();
    }
    let e = net.embed.as_mut().unwrap();
    if k < e.w.len() {
        e.w[k] = v;
    } else {
        e.b[k - e.w.len()] = v;
    }
}

fn grad_get(grads: &QuantileGrads, mut k: usize) -> f64 {
    for layer in &grads.layers {
        if k < layer.w.len() {
            return layer.w[k];
        }
        k -= layer.w.len();
        if k < layer.b.len() {
            return layer.b[k];
        }
        k -= layer.b.len();
    }
    let e = grads.embed.as_ref().unwrap();
    if k < e.w.len() {
        e.w[k]
    } else {
        e.b[k - e.w.len()]
    }
}

/// Analytic gradients vs central finite differences (h = 1e-5) for both
/// embedding modes and both reference architectures.
pub fn gradient_check() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (mode, hidden, seed) in [
        (EmbeddingMode::ConcatScalar, vec![12usize, 12], 21u64),
        (EmbeddingMode::ConcatScalar, vec![64, 64, 64], 22),
        (EmbeddingMode::Cosine { order: 64 }, vec![12, 12], 23),
        (EmbeddingMode::Cosine { order: 64 }, vec![64, 64, 64], 24),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = QuantileNet::new(4, 2, &hidden, mode, None, &mut rng)?;
        let total = net.param_count();
        for k in 0..total {
            param_set(&mut net, k, rng.gen_range(-0.5..0.5));
        }
        let batch: Vec<(Vec<f64>, usize, f64, f64)> = (0..6)
            .map(|_| {
                let s: Vec<f64> = (0..4)
                    .map(|_| dqpope_core::env::sample_standard_normal(&mut rng))
                    .collect();
                (s, rng.gen_range(0..2), rng.gen_range(0.05..0.95), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let borrowed: Vec<(&[f64], usize, f64, f64)> = batch
            .iter()
            .map(|(s, a, t, u)| (s.as_slice(), *a, *t, *u))
            .collect();
        let grads = net.backward(&borrowed)?;
        let objective = |net: &QuantileNet| -> f64 {
            batch
                .iter()
                .map(|(s, a, t, u)| u * net.forward(s, *a, *t).unwrap())
                .sum()
        };
        let h = 1e-5;
        for _ in 0..50 {
            let k = rng.gen_range(0..total);
            let orig = param_get(&net, k);
            param_set(&mut net, k, orig + h);
            let up = objective(&net);
            param_set(&mut net, k, orig - h);
            let down = objective(&net);
            param_set(&mut net, k, orig);
            let fd = (up - down) / (2.0 * h);
            let analytic = grad_get(&grads, k);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    detail.push_str(&format!("max relative error {worst:.2e} (tolerance 1e-4)"));
    Ok(CheckOutcome {
        name: "gradients",
        pass: worst < 1e-4,
        detail,
    })
}

/// Contraction bound over 200 random tabular problems per (gamma, p).
pub fn contraction_check() -> Result<CheckOutcome> {
    let mut pass = true;
    let mut detail = String::new();
    for (i, (gamma, p)) in [(0.5f64, 1u32), (0.5, 2), (0.9, 1), (0.9, 2)]
        .into_iter()
        .enumerate()
    {
        let bound = gamma.powf(1.0 - 1.0 / (2.0 * p as f64));
        let (ratio, _) = max_contraction_ratio(gamma, p, 200, 7, 60 + i as u64)?;
        pass &= ratio <= bound + 1e-9;
        detail.push_str(&format!("gamma {gamma} p {p}: {ratio:.6} <= {bound:.6}; "));
    }
    Ok(CheckOutcome {
        name: "contraction",
        pass,
        detail,
    })
}

/// Categorical projection: mass conservation on random triples plus the
/// identity / full-clip / half-split examples.
pub fn projection_check() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let count = rng.gen_range(2..=64);
        let v_min = rng.gen_range(-20.0..0.0);
        let v_max = v_min + rng.gen_range(0.5..40.0);
        let dz = (v_max - v_min) / (count - 1) as f64;
        let atoms: Vec<f64> = (0..count).map(|k| v_min + k as f64 * dz).collect();
        let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let reward = rng.gen_range(-30.0..30.0);
        let gamma = rng.gen_range(0.0..1.0);
        let mass = cateope_project(reward, gamma, &probs, &atoms, v_min, v_max);
        let sum: f64 = mass.iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }

    let atoms: Vec<f64> = (0..11).map(|k| -5.0 + k as f64).collect();
    let probs: Vec<f64> = (0..11).map(|i| (i + 1) as f64 / 66.0).collect();
    let identity = cateope_project(0.0, 1.0, &probs, &atoms, -5.0, 5.0) == probs;
    let clip = {
        let mass = cateope_project(100.0, 1.0, &probs, &atoms, -5.0, 5.0);
        (mass[10] - 1.0).abs() < 1e-12 && mass[..10].iter().all(|m| *m == 0.0)
    };
    let split = {
        let mut point = vec![0.0; 11];
        point[4] = 1.0;
        let mass = cateope_project(0.5, 1.0, &point, &atoms, -5.0, 5.0);
        (mass[4] - 0.5).abs() < 1e-12 && (mass[5] - 0.5).abs() < 1e-12
    };

    CheckOutcome {
        name: "categorical-projection",
        pass: worst < 1e-9 && identity && clip && split,
        detail: format!(
            "max mass defect {worst:.2e}; identity {identity}, clip {clip}, split {split}"
        ),
    }
}
