//! Experiment harness: configuration, per-atom measurements, report assembly
//! and serialization.

pub mod atom_checks;
pub mod config;
pub mod report;
pub mod runner;
pub mod superposition;

pub use atom_checks::{
    check_grand_decay, check_pointwise_domination, weak_bound_sample, DominationReport, GrandDecayReport,
    WeakBoundSample,
};
pub use config::ExperimentConfig;
pub use report::{emit_report, CheckReport, Format, MeasuredConstant, Status, VerificationReport};
pub use runner::{run_checks, weak_bound_experiment, Check, Context, Runner};
pub use superposition::{check_superposition, superposition_constant, SuperpositionFamily, SuperpositionReport};
