//! Causal policies: the transmitter only knows gains up to the current slot.

pub mod gwf;
pub mod sarsa;

pub use gwf::{solve_gwf, GroupConfig, GwfResult};
pub use sarsa::{run_sarsa, RlConfig, RlState, SarsaResult, WeightVector};
