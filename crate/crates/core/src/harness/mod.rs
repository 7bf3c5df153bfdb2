//! Experiment plumbing: traces in, policies run, metrics and curves out.

pub mod experiment;
pub mod output;
pub mod trace;

pub use experiment::{
    run_experiment, ChannelSpec, ExperimentConfig, ExperimentResult, Policy, RlSettings, SweepParam, SweepSpec,
    SystemSpec, TraceSource,
};
pub use output::{emit_results, Summary};
pub use trace::{gen_synthetic_trace, load_trace};
