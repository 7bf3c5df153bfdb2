//! Approximate SARSA over a discrete grid of total transmit powers.
//!
//! The action in each slot is a total power `k * delta`. Its value is
//! approximated by a linear model over three binary features: no overflow,
//! no underflow, and agreement with a two-slot water-filling reference that
//! treats the sample-mean gain as a forecast for the next slot. Actions are
//! chosen epsilon-greedily from the powers that keep the buffer between its
//! floor and ceiling. When even the cap cannot deliver the frame due, the
//! slot stalls: the cap is sent, the slot counts as a rebuffering slot and
//! playback continues on the nominal clock with an empty buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{FadingPath, SimRng};
use crate::error::{Error, Result};
use crate::model::{FeasibilityReport, PowerSchedule, SystemParams, VideoTrace};
use crate::waterfill::{
    level_for_power_budget, min_power_for_bits, powers_from_level, slot_bits_at_level, water_level_for_target,
    SpanTarget,
};

pub const FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSchedule {
    /// `beta_t = 1 / t`.
    Harmonic,
    Constant(f64),
}

impl BetaSchedule {
    /// Step size for the 1-based slot `t`.
    pub fn at(&self, t: usize) -> f64 {
        match self {
            BetaSchedule::Harmonic => 1.0 / t as f64,
            BetaSchedule::Constant(b) => *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub discount: f64,
    pub epsilon: f64,
    /// Number of grid steps between zero and `pmax`; `delta = pmax / delta_steps`.
    pub delta_steps: usize,
    /// Total power cap in watts.
    pub pmax: f64,
    pub w_init: [f64; FEATURES],
    pub beta: BetaSchedule,
}

impl RlConfig {
    /// Defaults for everything except the cap, which depends on the instance.
    pub fn with_pmax(pmax: f64) -> Self {
        RlConfig {
            discount: 0.9,
            epsilon: 0.1,
            delta_steps: 100,
            pmax,
            w_init: [1.0; FEATURES],
            beta: BetaSchedule::Harmonic,
        }
    }

    pub fn delta(&self) -> f64 {
        self.pmax / self.delta_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::param("discount", format!("must lie in (0, 1], got {}", self.discount)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(Error::param("epsilon", format!("must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.delta_steps == 0 {
            return Err(Error::param("delta_steps", "must be at least 1"));
        }
        if !(self.pmax > 0.0 && self.pmax.is_finite()) {
            return Err(Error::param("pmax", format!("must be positive, got {}", self.pmax)));
        }
        if self.w_init.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("w_init", "entries must be finite"));
        }
        if let BetaSchedule::Constant(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::param("beta", format!("must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: [f64; FEATURES],
}

impl WeightVector {
    pub fn new(w: [f64; FEATURES]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("weights {w:?}")));
        }
        Ok(WeightVector { w })
    }

    pub fn value(&self, f: &[f64; FEATURES]) -> f64 {
        self.w.iter().zip(f).map(|(w, f)| w * f).sum()
    }
}

/// What the transmitter knows at the start of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlState {
    /// 1-based slot index.
    pub t: usize,
    /// `D(t-1)`, buffered bits when the previous frame was due.
    pub d_prev: f64,
    /// `F(t-1)`, zero in the first slot.
    pub frame_prev: f64,
    pub frame_now: f64,
    /// `F(t+1)`, zero in the last slot.
    pub frame_next: f64,
    pub gains_now: Vec<f64>,
    /// Running mean of each subchannel's gain over slots `1..=t`.
    pub gain_mean_est: Vec<f64>,
}

impl RlState {
    /// Bits left in the buffer once the previous frame is played.
    pub fn carry(&self) -> f64 {
        (self.d_prev - self.frame_prev).max(0.0)
    }

    /// Buffer content after sending `power` split over the current gains.
    pub fn preview(&self, power: f64, params: &SystemParams) -> Result<f64> {
        Ok(self.carry() + bits_for_power(&self.gains_now, power, params)?)
    }
}

fn bits_for_power(gains: &[f64], power: f64, params: &SystemParams) -> Result<f64> {
    if power == 0.0 {
        return Ok(0.0);
    }
    let v = level_for_power_budget(gains, power, params)?;
    Ok(slot_bits_at_level(v, gains, params))
}

pub fn reward(power: f64, pmax: f64) -> f64 {
    1.0 - power / pmax
}

/// Current-slot power of the two-slot water-filling reference, floored to
/// the action grid.
pub fn wf_reference_power(state: &RlState, params: &SystemParams, delta: f64) -> Result<f64> {
    let need = (state.frame_now + state.frame_next - state.carry()).max(0.0);
    if need == 0.0 {
        return Ok(0.0);
    }
    let span = SpanTarget::new(vec![&state.gains_now, &state.gain_mean_est], need);
    let v = water_level_for_target(&span, params)?;
    let p: f64 = powers_from_level(v, &state.gains_now, params).iter().sum();
    Ok(delta * (p / delta).floor())
}

/// `(Pmin_t, Pmax_t)`: powers that exactly fill the underflow floor and the
/// overflow ceiling of the current slot.
pub fn feasible_power_bounds(state: &RlState, params: &SystemParams) -> Result<(f64, f64)> {
    let carry = state.carry();
    let low = min_power_for_bits(&state.gains_now, (state.frame_now - carry).max(0.0), params)?;
    let high = min_power_for_bits(&state.gains_now, (params.buffer - carry).max(0.0), params)?;
    Ok((low, high))
}

/// Grid of actions and the per-state quantities the features need.
struct Grid {
    delta: f64,
    top: usize,
    wf_index: usize,
}

impl Grid {
    fn new(state: &RlState, params: &SystemParams, cfg: &RlConfig) -> Result<Self> {
        let delta = cfg.delta();
        let p_wf = wf_reference_power(state, params, delta)?;
        let top = cfg.delta_steps;
        let wf_index = ((p_wf / delta).round() as usize).min(top);
        Ok(Grid { delta, top, wf_index })
    }

    fn power(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }
}

fn features_at(state: &RlState, grid: &Grid, k: usize, params: &SystemParams) -> Result<[f64; FEATURES]> {
    let d = state.preview(grid.power(k), params)?;
    let tol = params.tol_bits();
    Ok([
        (d <= params.buffer + tol) as u8 as f64,
        (d >= state.frame_now - tol) as u8 as f64,
        (k == grid.wf_index) as u8 as f64,
    ])
}

/// Binary features of taking total power `power` in `state`. `power` should
/// be a multiple of the grid step.
pub fn feature_vector(state: &RlState, power: f64, params: &SystemParams, cfg: &RlConfig) -> Result<[f64; FEATURES]> {
    let grid = Grid::new(state, params, cfg)?;
    features_at(state, &grid, (power / grid.delta).round() as usize, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub power: f64,
    /// Grid index, `None` for a stall at the cap.
    pub index: Option<usize>,
    pub stall: bool,
    pub features: [f64; FEATURES],
}

pub fn select_action(
    state: &RlState,
    weights: &WeightVector,
    params: &SystemParams,
    cfg: &RlConfig,
    rng: &mut SimRng,
) -> Result<Action> {
    let grid = Grid::new(state, params, cfg)?;
    let (p_lo, p_hi) = feasible_power_bounds(state, params)?;
    if p_lo > cfg.pmax {
        return Ok(Action {
            power: cfg.pmax,
            index: None,
            stall: true,
            features: features_at(state, &grid, grid.top, params)?,
        });
    }
    let hi = ((p_hi.min(cfg.pmax) / grid.delta).floor() as usize).min(grid.top);
    let lo = ((p_lo / grid.delta).ceil() as usize).min(hi);
    let k = if rng.random::<f64>() < cfg.epsilon {
        rng.random_range(lo..=hi)
    } else {
        greedy(state, &grid, lo, hi, weights, params)?
    };
    Ok(Action {
        power: grid.power(k),
        index: Some(k),
        stall: false,
        features: features_at(state, &grid, k, params)?,
    })
}

/// First index in `lo..=hi` where the monotone predicate holds, or `hi + 1`.
fn first_where(lo: usize, hi: usize, mut pred: impl FnMut(usize) -> Result<bool>) -> Result<usize> {
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let mid = a + (b - a) / 2;
        if pred(mid)? {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    Ok(a)
}

/// Lowest-power maximizer of `w . f` over `lo..=hi`.
///
/// The buffer preview grows with power, so `f2` switches on and `f1` off at
/// most once each, and `f3` marks a single index. The maximum is therefore
/// attained where one of the runs of constant features begins.
fn greedy(state: &RlState, grid: &Grid, lo: usize, hi: usize, weights: &WeightVector, params: &SystemParams) -> Result<usize> {
    let tol = params.tol_bits();
    let fed = first_where(lo, hi, |k| Ok(state.preview(grid.power(k), params)? >= state.frame_now - tol))?;
    let spill = first_where(lo, hi, |k| Ok(state.preview(grid.power(k), params)? > params.buffer + tol))?;
    let mut cand = vec![lo, fed, spill, grid.wf_index, grid.wf_index + 1];
    cand.retain(|k| (lo..=hi).contains(k));
    cand.sort_unstable();
    cand.dedup();
    let mut best = (f64::NEG_INFINITY, lo);
    for k in cand {
        let q = weights.value(&features_at(state, grid, k, params)?);
        if q > best.0 {
            best = (q, k);
        }
    }
    Ok(best.1)
}

/// One semi-gradient SARSA update. `next` is `None` at the terminal slot.
pub fn sarsa_step(
    weights: &WeightVector,
    features: &[f64; FEATURES],
    reward_val: f64,
    next: Option<&[f64; FEATURES]>,
    cfg: &RlConfig,
    t: usize,
) -> Result<WeightVector> {
    let q = weights.value(features);
    let q_next = next.map_or(0.0, |f| weights.value(f));
    let td = reward_val + cfg.discount * q_next - q;
    let beta = cfg.beta.at(t);
    let mut w = weights.w;
    for (w, f) in w.iter_mut().zip(features) {
        *w += beta * td * f;
    }
    WeightVector::new(w).map_err(|e| e.context(format!("weight update at slot {t}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarsaResult {
    pub schedule: PowerSchedule,
    pub report: FeasibilityReport,
    /// Realized `D(t)`, floored at zero after a stall.
    pub remaining: Vec<f64>,
    /// Discounted return accumulated up to each slot.
    pub learning_curve: Vec<f64>,
    pub stalls: Vec<usize>,
    pub weights: WeightVector,
}

impl SarsaResult {
    pub fn underflow_prob(&self) -> f64 {
        self.report.underflow_slots.len() as f64 / self.remaining.len() as f64
    }

    pub fn overflow_prob(&self) -> f64 {
        self.report.overflow_slots.len() as f64 / self.remaining.len() as f64
    }
}

fn state_at(trace: &VideoTrace, fading: &FadingPath, t: usize, d_prev: f64, mean: &[f64]) -> RlState {
    let frames = trace.frames();
    RlState {
        t: t + 1,
        d_prev,
        frame_prev: if t == 0 { 0.0 } else { frames[t - 1] },
        frame_now: frames[t],
        frame_next: frames.get(t + 1).copied().unwrap_or(0.0),
        gains_now: fading.gains().slot(t).to_vec(),
        gain_mean_est: mean.to_vec(),
    }
}

/// Learns and acts over one realization, starting from `cfg.w_init`.
pub fn run_sarsa(
    trace: &VideoTrace,
    fading: &FadingPath,
    params: &SystemParams,
    cfg: &RlConfig,
    rng: &mut SimRng,
) -> Result<SarsaResult> {
    run_sarsa_from(trace, fading, params, cfg, WeightVector::new(cfg.w_init)?, rng)
}

/// Same as [`run_sarsa`] with explicit starting weights, for carrying
/// weights across episodes.
pub fn run_sarsa_from(
    trace: &VideoTrace,
    fading: &FadingPath,
    params: &SystemParams,
    cfg: &RlConfig,
    mut weights: WeightVector,
    rng: &mut SimRng,
) -> Result<SarsaResult> {
    params.validate()?;
    cfg.validate()?;
    fading.gains().check_shape(trace.len(), params)?;
    if params.buffer <= trace.max_frame() {
        return Err(Error::BufferTooSmall {
            fmax: params.buffer,
            max_frame: trace.max_frame(),
        });
    }
    let n = trace.len();
    let m = params.subchannels;
    let tol = params.tol_bits();
    let mut sums = vec![0.0; m];
    let mut mean = vec![0.0; m];
    let update_mean = |t: usize, sums: &mut Vec<f64>, mean: &mut Vec<f64>| {
        for (i, g) in fading.gains().slot(t).iter().enumerate() {
            sums[i] += g;
            mean[i] = sums[i] / (t + 1) as f64;
        }
    };

    update_mean(0, &mut sums, &mut mean);
    let mut state = state_at(trace, fading, 0, 0.0, &mean);
    let mut action = select_action(&state, &weights, params, cfg, rng)?;

    let mut powers = Vec::with_capacity(n);
    let mut delivered = Vec::with_capacity(n);
    let mut remaining = Vec::with_capacity(n);
    let mut curve = Vec::with_capacity(n);
    let mut stalls = Vec::new();
    let mut underflow_slots = Vec::new();
    let mut overflow_slots = Vec::new();
    let mut ret = 0.0;
    let mut disc = 1.0;

    for t in 0..n {
        let g = &state.gains_now;
        let split = if action.power == 0.0 {
            vec![0.0; m]
        } else {
            powers_from_level(level_for_power_budget(g, action.power, params)?, g, params)
        };
        let h = bits_for_power(g, action.power, params)?;
        let d = state.carry() + h;
        if d < state.frame_now - tol {
            underflow_slots.push(t + 1);
        }
        if d > params.buffer + tol {
            overflow_slots.push(t + 1);
        }
        if action.stall {
            stalls.push(t + 1);
        }
        let r = reward(action.power, cfg.pmax);
        ret += disc * r;
        disc *= cfg.discount;
        curve.push(ret);
        powers.push(split);
        delivered.push(h);
        remaining.push(d);

        let next = if t + 1 < n {
            update_mean(t + 1, &mut sums, &mut mean);
            let s = state_at(trace, fading, t + 1, d, &mean);
            let a = select_action(&s, &weights, params, cfg, rng)?;
            Some((s, a))
        } else {
            None
        };
        weights = sarsa_step(
            &weights,
            &action.features,
            r,
            next.as_ref().map(|(_, a)| &a.features),
            cfg,
            t + 1,
        )?;
        if let Some((s, a)) = next {
            state = s;
            action = a;
        }
    }

    let schedule = PowerSchedule::from_parts(powers, delivered);
    let total_bits_error = (schedule.total_bits() - trace.total_bits()).abs();
    let report = FeasibilityReport {
        feasible: underflow_slots.is_empty() && overflow_slots.is_empty(),
        underflow_slots,
        overflow_slots,
        total_bits_error,
    };
    Ok(SarsaResult {
        schedule,
        report,
        remaining,
        learning_curve: curve,
        stalls,
        weights,
    })
}
