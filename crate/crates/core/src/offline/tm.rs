//! Minimum completion time under a per-slot total power cap.
//!
//! Each slot maximizes its own throughput: water-fill the full budget `Pmax`,
//! and if that would carry more than the slot may deliver (the free buffer
//! space or the data left, whichever is smaller), lower the level until it
//! carries exactly that cap. The underflow constraint is not part of this
//! problem, so a small `Pmax` can leave frames late; those slots are
//! reported rather than rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    cumulative_curves, verify_schedule, ChannelGains, FeasibilityReport, PowerSchedule, SystemParams, VideoTrace,
};
use crate::waterfill::{
    level_for_power_budget, powers_from_level, slot_bits_at_level, water_level_for_target, SpanTarget,
};

/// Slots allowed past the trace length, as a multiple of it, before giving up.
pub const PROGRESS_HORIZON_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmResult {
    /// Powers for `max(T, T1)` slots; every slot after `T1` is silent.
    pub schedule: PowerSchedule,
    /// `T1`, the 1-based slot in which the last bit arrives.
    pub completion_slot: usize,
    /// Feasibility of the first `T` slots against the playout curves.
    pub report: FeasibilityReport,
    /// Per-slot water level actually used.
    pub levels: Vec<f64>,
    /// `T`, the trace length the average is taken over.
    pub horizon: usize,
}

impl TmResult {
    /// Total energy per slot divided by `T`, not by `T1`.
    pub fn average_power(&self) -> f64 {
        self.schedule.total_powers().iter().sum::<f64>() / self.horizon as f64
    }
}

pub fn solve_tm(trace: &VideoTrace, gains: &ChannelGains, params: &SystemParams) -> Result<TmResult> {
    params.validate()?;
    let pmax = params
        .power_cap
        .ok_or_else(|| Error::param("power_cap", "time minimization needs a total power cap"))?;
    gains.check_shape(trace.len(), params)?;
    let n = trace.len();
    let total = trace.total_bits();
    let tol = params.tol_bits();
    let curves = cumulative_curves(trace, params);

    let mut powers = Vec::with_capacity(n);
    let mut delivered = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    let mut x = 0.0;
    let mut completion = None;
    let mut t = 0;
    while t < n || completion.is_none() {
        if completion.is_some() {
            powers.push(vec![0.0; params.subchannels]);
            delivered.push(0.0);
            levels.push(0.0);
            t += 1;
            continue;
        }
        if t >= gains.slots() {
            return Err(Error::Dimension(format!(
                "{:.3} bits still queued after the last gain slot {}",
                total - x,
                gains.slots()
            )));
        }
        let g = gains.slot(t);
        let remaining = total - x;
        // Past the trace the consumption curve is flat at the total, so the
        // free space is never binding there.
        let room = if t < n { curves.overflow[t] - x } else { f64::INFINITY };
        let cap = room.min(remaining).max(0.0);
        let level = if g.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            let w = level_for_power_budget(g, pmax, params)?;
            if slot_bits_at_level(w, g, params) > cap {
                water_level_for_target(&SpanTarget::single(g, cap), params)?
            } else {
                w
            }
        };
        let p = powers_from_level(level, g, params);
        let mut h = slot_bits_at_level(level, g, params);
        if h > cap {
            h = cap;
        }
        x += h;
        if total - x <= tol {
            completion = Some(t + 1);
        } else if h == 0.0 && t + 1 >= PROGRESS_HORIZON_FACTOR * n {
            return Err(Error::Progress(format!(
                "slot {} delivered nothing with {:.3} bits left",
                t + 1,
                total - x
            )));
        }
        powers.push(p);
        delivered.push(h);
        levels.push(level);
        t += 1;
    }

    let schedule = PowerSchedule::from_parts(powers, delivered);
    let head = PowerSchedule::from_parts(schedule.powers[..n].to_vec(), schedule.delivered[..n].to_vec());
    let report = verify_schedule(&head, trace, params, tol)?;
    Ok(TmResult {
        schedule,
        completion_slot: completion.expect("loop exits only after completion"),
        report,
        levels,
        horizon: n,
    })
}
