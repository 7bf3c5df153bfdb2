//! Domain types shared by every policy: link parameters, the frame-size demand
//! process, per-slot channel gains, power schedules and the playout-buffer
//! bookkeeping used to check them.
//!
//! Units are bits, watts, hertz and seconds throughout. Capacities use base-2
//! logarithms so throughput comes out in bits. Slot indices exposed in reports
//! are 1-based (slot 1 is the first frame time); vectors are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise power per subchannel, `N0 * Bc`, used when nothing else is configured.
/// Not derived from any measurement; pick one that fits your link budget.
pub const DEFAULT_NOISE_POWER_W: f64 = 1e-3;

/// Relative slack applied to the buffer size when checking schedules.
pub const DEFAULT_TOL_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of parallel subchannels.
    pub subchannels: usize,
    /// Bandwidth of one subchannel in Hz.
    pub subchannel_bw: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_density: f64,
    /// Frame slot duration in seconds.
    pub slot: f64,
    /// Playout buffer size in bits.
    pub buffer: f64,
    /// Optional cap on the total transmit power of one slot, in watts.
    pub power_cap: Option<f64>,
}

impl SystemParams {
    pub fn new(
        subchannels: usize,
        subchannel_bw: f64,
        noise_density: f64,
        slot: f64,
        buffer: f64,
    ) -> Result<Self> {
        let p = SystemParams {
            subchannels,
            subchannel_bw,
            noise_density,
            slot,
            buffer,
            power_cap: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit bandwidth, unit noise power and unit slot: one "bit" per doubling
    /// of SNR, which keeps hand-computed values simple.
    pub fn normalized(subchannels: usize, buffer: f64) -> Result<Self> {
        SystemParams::new(subchannels, 1.0, 1.0, 1.0, buffer)
    }

    pub fn with_power_cap(mut self, cap: f64) -> Result<Self> {
        self.power_cap = Some(cap);
        self.validate()?;
        Ok(self)
    }

    pub fn with_buffer(mut self, buffer: f64) -> Result<Self> {
        self.buffer = buffer;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subchannels == 0 {
            return Err(Error::param("subchannels", "must be at least 1"));
        }
        let positive = [
            ("subchannel_bw", self.subchannel_bw),
            ("noise_density", self.noise_density),
            ("slot", self.slot),
            ("buffer", self.buffer),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if let Some(cap) = self.power_cap {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::param("power_cap", format!("must be positive, got {cap}")));
            }
        }
        Ok(())
    }

    /// Noise power over one subchannel, `N0 * Bc`.
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.subchannel_bw
    }

    /// Bits carried in one slot per unit of `log2(1 + snr)` on one subchannel.
    pub fn bits_per_log2(&self) -> f64 {
        self.slot * self.subchannel_bw
    }

    pub fn tol_bits(&self) -> f64 {
        DEFAULT_TOL_FRACTION * self.buffer
    }
}

/// Frame sizes `F(1..T)` in bits. `F(0) = 0` by convention and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTrace {
    frames: Vec<f64>,
    fps: f64,
}

impl VideoTrace {
    pub fn new(frames: Vec<f64>, fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::param("frames", "trace must contain at least one frame"));
        }
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| !(f.is_finite() && **f > 0.0))
        {
            return Err(Error::param(
                "frames",
                format!("frame {} has non-positive size {f}", i + 1),
            ));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::param("fps", format!("must be positive, got {fps}")));
        }
        Ok(VideoTrace { frames, fps })
    }

    pub fn frames(&self) -> &[f64] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn slot_secs(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn total_bits(&self) -> f64 {
        self.frames.iter().sum()
    }

    pub fn max_frame(&self) -> f64 {
        self.frames.iter().copied().fold(0.0, f64::max)
    }
}

/// Power gains `gamma_i(t)`, stored one row of `M` gains per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    rows: Vec<Vec<f64>>,
}

impl ChannelGains {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if m == 0 {
            return Err(Error::Dimension("gains need at least one slot and one subchannel".into()));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "slot {} has {} gains, expected {m}",
                    t + 1,
                    row.len()
                )));
            }
            if let Some(g) = row.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                return Err(Error::Domain(format!("gain {g} in slot {} is negative or not finite", t + 1)));
            }
        }
        Ok(ChannelGains { rows })
    }

    /// Same gain row repeated for every slot.
    pub fn constant(row: Vec<f64>, slots: usize) -> Result<Self> {
        ChannelGains::new(vec![row; slots])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn slot(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn slots(&self) -> usize {
        self.rows.len()
    }

    pub fn subchannels(&self) -> usize {
        self.rows[0].len()
    }

    pub(crate) fn check_shape(&self, slots: usize, params: &SystemParams) -> Result<()> {
        if self.subchannels() != params.subchannels {
            return Err(Error::Dimension(format!(
                "gains have {} subchannels, parameters say {}",
                self.subchannels(),
                params.subchannels
            )));
        }
        if self.slots() < slots {
            return Err(Error::Dimension(format!(
                "gains cover {} slots, trace has {slots}",
                self.slots()
            )));
        }
        Ok(())
    }
}

/// Per-slot transmit powers with the bits they deliver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    /// `powers[t][i]` is the power on subchannel `i` in slot `t + 1`.
    pub powers: Vec<Vec<f64>>,
    /// `H(t)`, bits delivered in each slot.
    pub delivered: Vec<f64>,
    /// `X(t)`, cumulative delivered bits.
    pub cumulative: Vec<f64>,
}

impl PowerSchedule {
    /// Builds the schedule, deriving `H` and `X` from the capacity formula.
    pub fn from_powers(powers: Vec<Vec<f64>>, gains: &ChannelGains, params: &SystemParams) -> Result<Self> {
        if powers.len() > gains.slots() {
            return Err(Error::Dimension(format!(
                "{} power rows but only {} gain rows",
                powers.len(),
                gains.slots()
            )));
        }
        let delivered = powers
            .iter()
            .zip(gains.rows())
            .map(|(p, g)| slot_throughput(p, g, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(PowerSchedule::from_parts(powers, delivered))
    }

    pub(crate) fn from_parts(powers: Vec<Vec<f64>>, delivered: Vec<f64>) -> Self {
        let cumulative = delivered
            .iter()
            .scan(0.0, |acc, h| {
                *acc += h;
                Some(*acc)
            })
            .collect();
        PowerSchedule {
            powers,
            delivered,
            cumulative,
        }
    }

    pub fn slots(&self) -> usize {
        self.powers.len()
    }

    pub fn slot_power(&self, t: usize) -> f64 {
        self.powers[t].iter().sum()
    }

    pub fn total_powers(&self) -> Vec<f64> {
        (0..self.slots()).map(|t| self.slot_power(t)).collect()
    }

    /// Mean total power over all slots.
    pub fn average_power(&self) -> f64 {
        if self.slots() == 0 {
            return 0.0;
        }
        self.total_powers().iter().sum::<f64>() / self.slots() as f64
    }

    pub fn peak_power(&self) -> f64 {
        self.total_powers().into_iter().fold(0.0, f64::max)
    }

    pub fn total_bits(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// `O(t)` and `U(t)`: the ceiling and floor of the cumulative arrival curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurves {
    pub overflow: Vec<f64>,
    pub consumption: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferTrajectory {
    /// `D(t)`, buffered bits just before frame `t` is played. May go negative.
    pub remaining: Vec<f64>,
    pub overflow: Vec<f64>,
    pub consumption: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// 1-based slots with `X(t) < U(t) - tol`, checked for `t < T`.
    pub underflow_slots: Vec<usize>,
    /// 1-based slots with `X(t) > O(t) + tol`.
    pub overflow_slots: Vec<usize>,
    /// `|X(T) - U(T)|` in bits.
    pub total_bits_error: f64,
    pub feasible: bool,
}

/// Bits delivered in one slot by the given per-subchannel powers.
pub fn slot_throughput(powers: &[f64], gains: &[f64], params: &SystemParams) -> Result<f64> {
    if powers.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} powers for {} gains",
            powers.len(),
            gains.len()
        )));
    }
    let noise = params.noise_power();
    let mut bits = 0.0;
    for (&p, &g) in powers.iter().zip(gains) {
        if !(p >= 0.0) || !(g >= 0.0) {
            return Err(Error::Domain(format!("power {p} and gain {g} must be non-negative")));
        }
        bits += (p * g / noise).ln_1p();
    }
    Ok(params.bits_per_log2() * bits / std::f64::consts::LN_2)
}

/// Power needed to carry `rate` bits/s on one subchannel with power gain `gain`.
pub fn power_for_rate(rate: f64, gain: f64, params: &SystemParams) -> Result<f64> {
    if !(rate >= 0.0) || !(gain >= 0.0) {
        return Err(Error::Domain(format!("rate {rate} and gain {gain} must be non-negative")));
    }
    if rate == 0.0 {
        return Ok(0.0);
    }
    if gain == 0.0 {
        return Err(Error::Infeasible(format!("rate {rate} b/s requested on a zero-gain subchannel")));
    }
    Ok(((rate / params.subchannel_bw).exp2() - 1.0) * params.noise_power() / gain)
}

pub fn cumulative_curves(trace: &VideoTrace, params: &SystemParams) -> CumulativeCurves {
    let consumption: Vec<f64> = trace
        .frames()
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();
    let overflow = std::iter::once(0.0)
        .chain(consumption.iter().copied())
        .take(consumption.len())
        .map(|u| u + params.buffer)
        .collect();
    CumulativeCurves {
        overflow,
        consumption,
    }
}

/// Runs `D(t) = D(t-1) - F(t-1) + H(t)` from an empty buffer.
pub fn simulate_buffer(
    schedule: &PowerSchedule,
    trace: &VideoTrace,
    params: &SystemParams,
) -> Result<BufferTrajectory> {
    check_len(schedule, trace)?;
    let curves = cumulative_curves(trace, params);
    let mut remaining = Vec::with_capacity(trace.len());
    let mut d = 0.0;
    let mut prev_frame = 0.0;
    for (h, f) in schedule.delivered.iter().zip(trace.frames()) {
        d = d - prev_frame + h;
        remaining.push(d);
        prev_frame = *f;
    }
    Ok(BufferTrajectory {
        remaining,
        overflow: curves.overflow,
        consumption: curves.consumption,
    })
}

pub fn verify_schedule(
    schedule: &PowerSchedule,
    trace: &VideoTrace,
    params: &SystemParams,
    tol_bits: f64,
) -> Result<FeasibilityReport> {
    check_len(schedule, trace)?;
    let curves = cumulative_curves(trace, params);
    let t_last = trace.len() - 1;
    let mut underflow_slots = Vec::new();
    let mut overflow_slots = Vec::new();
    for (t, &x) in schedule.cumulative.iter().enumerate() {
        if t < t_last && x < curves.consumption[t] - tol_bits {
            underflow_slots.push(t + 1);
        }
        if x > curves.overflow[t] + tol_bits {
            overflow_slots.push(t + 1);
        }
    }
    let total_bits_error = (schedule.cumulative[t_last] - curves.consumption[t_last]).abs();
    let feasible = underflow_slots.is_empty() && overflow_slots.is_empty() && total_bits_error <= tol_bits;
    Ok(FeasibilityReport {
        underflow_slots,
        overflow_slots,
        total_bits_error,
        feasible,
    })
}

fn check_len(schedule: &PowerSchedule, trace: &VideoTrace) -> Result<()> {
    if schedule.slots() != trace.len() || schedule.cumulative.len() != trace.len() {
        return Err(Error::Dimension(format!(
            "schedule has {} slots, trace has {}",
            schedule.slots(),
            trace.len()
        )));
    }
    Ok(())
}
