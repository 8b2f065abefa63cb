//! Losses, distances, and policy-value estimators.

use alloc::vec::Vec;
use rand::Rng;

use crate::env::{sample_open01, ReturnDistribution};
use crate::error::{Error, Result};
use crate::net::QuantileNet;

/// Check loss `rho_tau(u) = u * (tau - 1{u <= 0})`; the indicator includes
/// `u = 0`.
pub fn pinball(u: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0);
    u * (tau - if u <= 0.0 { 1.0 } else { 0.0 })
}

/// Subgradient of the check loss in `u`: `tau - 1{u <= 0}` (so `tau - 1` at
/// the kink).
pub fn pinball_grad(u: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0);
    tau - if u <= 0.0 { 1.0 } else { 0.0 }
}

/// W1 between empirical distributions. Equal sizes reduce to the mean
/// absolute difference of sorted samples; otherwise the two empirical
/// quantile step functions are merged and integrated exactly.
pub fn w1_empirical(a: &ReturnDistribution, b: &ReturnDistribution) -> f64 {
    let xs = a.samples();
    let ys = b.samples();
    if xs.len() == ys.len() {
        return xs
            .iter()
            .zip(ys)
            .map(|(x, y)| libm::fabs(x - y))
            .sum::<f64>()
            / xs.len() as f64;
    }
    let n = xs.len() as f64;
    let m = ys.len() as f64;
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut prev = 0.0;
    let mut acc = 0.0;
    while ia < xs.len() && ib < ys.len() {
        let ca = (ia + 1) as f64 / n;
        let cb = (ib + 1) as f64 / m;
        let level = ca.min(cb);
        acc += (level - prev) * libm::fabs(xs[ia] - ys[ib]);
        prev = level;
        if ca <= cb {
            ia += 1;
        }
        if cb <= ca {
            ib += 1;
        }
    }
    acc
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let m = ys.len() as f64;
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut best = 0.0f64;
    while ia < xs.len() && ib < ys.len() {
        let x = xs[ia].min(ys[ib]);
        while ia < xs.len() && xs[ia] <= x {
            ia += 1;
        }
        while ib < ys.len() && ys[ib] <= x {
            ib += 1;
        }
        best = best.max(libm::fabs(ia as f64 / n - ib as f64 / m));
    }
    best
}

/// Quantile-averaged policy value: the mean of `f(s_k, a_k, tau_k)` over
/// paired initial draws and quantile levels.
pub fn value_from_quantiles(
    net: &QuantileNet,
    initial_draws: &[(Vec<f64>, usize)],
    levels: &[f64],
) -> Result<f64> {
    if initial_draws.is_empty() || initial_draws.len() != levels.len() {
        return Err(Error::Input(alloc::format!(
            "need matching non-empty draws/levels, got {} and {}",
            initial_draws.len(),
            levels.len()
        )));
    }
    let mut acc = 0.0;
    for ((state, action), tau) in initial_draws.iter().zip(levels) {
        acc += net.forward(state, *action, *tau)?;
    }
    Ok(acc / levels.len() as f64)
}

/// `k` random uniform quantile levels in (0, 1).
pub fn uniform_levels<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| sample_open01(rng)).collect()
}

/// `k` midpoint-grid levels `(2i - 1) / (2k)`.
pub fn midpoint_levels(k: usize) -> Vec<f64> {
    (1..=k).map(|i| (2 * i - 1) as f64 / (2 * k) as f64).collect()
}

/// Mean squared error of replicate estimates against a known truth.
pub fn mse_over_replicates(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Input("need >= 1 estimate".into()));
    }
    Ok(estimates
        .iter()
        .map(|e| (e - truth) * (e - truth))
        .sum::<f64>()
        / estimates.len() as f64)
}

/// Uses the quantile net as a generator: draws `u_i ~ Unif(0,1)` and returns
/// the sorted values `f(state, action, u_i)`.
pub fn sample_from_net<R: Rng + ?Sized>(
    net: &QuantileNet,
    state: &[f64],
    action: usize,
    n: usize,
    rng: &mut R,
) -> Result<ReturnDistribution> {
    if n == 0 {
        return Err(Error::Input("sample count must be >= 1".into()));
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let u = sample_open01(rng);
        samples.push(net.forward(state, action, u)?);
    }
    ReturnDistribution::from_samples(samples)
}
