//! Offline schedulers with the whole channel realization known in advance.

pub mod pm;
pub mod tm;

pub use pm::{solve_pm, PmSolution, WaterLevelProfile};
pub use tm::{solve_tm, TmResult};
