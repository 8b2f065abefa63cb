//! Experiment runners: seeded replicate orchestration and CSV emission.
//!
//! Reproducibility contract: replicate `r` derives its generators from
//! `base_seed + r`, with one counter-based stream per (cell, purpose), so
//! replicates can execute in any order (or in parallel) without changing a
//! single output byte.

pub mod contraction;
pub mod sanity;
pub mod sweep;
pub mod toy_mse;

pub use contraction::{run_contraction_suite, ContractionReport};
pub use sanity::{run_quantile_fit_sanity, SanityReport};
pub use sweep::{run_complexity_sweep, SweepRow};
pub use toy_mse::{run_toy_mse_table, ToyMseTable};

use rand_chacha::ChaCha8Rng;

/// Stream-split generator: seed follows the replicate, the stream id the
/// cell/purpose.
pub(crate) fn replicate_rng(base_seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(replicate));
    rng.set_stream(stream);
    rng
}

/// Generator for standalone ground-truth computation; shares the sweep's
/// oracle stream so `oracle` reproduces the sweep's reference distribution.
pub fn oracle_rng(base_seed: u64) -> ChaCha8Rng {
    replicate_rng(base_seed, 0, 1)
}
