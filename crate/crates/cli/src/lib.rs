//! Experiment orchestration for the percolation engine: named experiments,
//! deterministic result records, statistical gates, and report rendering.

pub mod experiments;
pub mod gates;
pub mod report;
pub mod spec;

pub use report::{render_csv, render_summary, ResultRecord};
pub use spec::{ExperimentKind, ExperimentSpec};

/// Environment variable holding the default master seed.
pub const SEED_ENV: &str = "ENHPERC_SEED";

/// Default master seed when neither the flag nor the environment sets one.
pub const DEFAULT_SEED: u64 = 20260810;
