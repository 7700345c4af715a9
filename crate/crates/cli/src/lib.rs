//! Experiment runner: TOML configs, seeded pipelines, reports and sweeps.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod sweep;
pub mod synth;

pub use config::RunConfig;
pub use pipeline::{execute, prepare, run};
pub use sweep::sweep;
