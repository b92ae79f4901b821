//! Experiment plans, parallel ensembles, output manifests and the acceptance
//! criteria behind the `burgulence` command.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod manifest;
pub mod pipelines;
pub mod plan;
pub mod runner;

pub use error::{HarnessError, Result};
pub use manifest::Manifest;
pub use pipelines::run_experiment;
pub use plan::{load_plan, ExperimentKind, ExperimentPlan};
