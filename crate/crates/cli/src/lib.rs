//! Experiment harness for distributional off-policy evaluation: TOML
//! configs, seeded replicate orchestration, and CSV outputs.

pub mod checks;
pub mod config;
pub mod csvout;
pub mod dataset_io;
pub mod model_io;
pub mod pool;
pub mod runners;
