//! Distributional off-policy evaluation via deep quantile process regression.
//!
//! The crate estimates the full return distribution of a target policy from
//! offline transition data. The centerpiece is quantile-process regression:
//! a network `f(s, a, tau)` takes the quantile level as an input, so one model
//! represents the entire quantile function and acts as a generator for the
//! return law (sampling `u ~ Unif(0,1)` and evaluating `f(s', a', u)` yields
//! draws from the modeled distribution). Iterating the regression against
//! bootstrapped targets `r + gamma * f(s', a', u)` tracks the distributional
//! Bellman operator to its fixed point.
//!
//! Alongside the main estimator the crate ships value-based fitted-Q
//! (`dope`), fixed-level discrete quantile regression (`dqope`), categorical
//! projection (`cateope`), and importance-sampling baselines (WIS, DR), plus
//! exact tabular oracles and the metrics used to compare everything.
//!
//! The crate is `no_std` (with `alloc`); IO, configs, and the experiment CLI
//! live in the companion `dqpope-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod env;
pub mod error;
pub mod metrics;
pub mod net;
pub mod ope;
pub mod tabular;

pub use error::{Error, Result};
