//! Experiment runners: gatekeeping comparison, annotation-efficiency curve,
//! held-out annotators, Dawid-Skene comparison and Dirichlet sweep.
//!
//! Independent (config, seed, N) jobs run on a bounded worker pool; results
//! are reduced in a fixed order so reports do not depend on scheduling.

pub mod comparison;
pub mod config;
pub mod curve;
pub mod ds;
pub mod heldout;
pub mod output;
pub mod run;
pub mod summary;

pub use comparison::{run_comparison, ComparisonReport};
pub use config::{DataSource, ExperimentConfig, ModelConfig, RaterSource, SplitConfig};
pub use curve::{run_dirichlet_sweep, run_efficiency_curve, CurveReport, SweepReport};
pub use heldout::{run_held_out, HeldOutReport};
pub use ds::{run_ds_comparison, DsReport, LabelMethod};
pub use run::{prepare, prepare_from_config, run_single, Block, Prepared, RunOutput, RunResult};
pub use summary::{MeanSd, Metric};
