//! Sweep runner: evaluates the learned beamformer and the codebook
//! baselines on identical drops and writes CSV, a manifest and a plot.

pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::{Axis, ExperimentConfig, Scheme};
pub use error::{BenchError, BenchResult};
pub use output::{emit_outputs, overhead_report, write_csv};
pub use sweep::{run_sweep, EvalContext, ModelStore, SweepResult, SweepRow};
