//! Power control for variable-bit-rate video over parallel fading subchannels.
//!
//! The receiver plays one frame per slot out of a finite buffer. A schedule
//! must deliver every frame before it is played and never deliver more than
//! the buffer holds. [`offline`] computes the minimum-power and minimum-time
//! schedules with full channel knowledge; [`online`] holds the causal
//! grouped water-filling policy and a SARSA learner; [`harness`] runs
//! experiments and writes their results.

pub mod channel;
pub mod error;
pub mod harness;
pub mod model;
pub mod offline;
pub mod online;
pub mod waterfill;

pub use error::{Error, Result, TraceError};
pub use model::{
    ChannelGains, CumulativeCurves, FeasibilityReport, PowerSchedule, SystemParams, VideoTrace,
};
