//! Minimum-power offline schedule: directional water-filling by dynamic
//! programming over frames.
//!
//! Frames are added one at a time. Each new frame starts as its own segment at
//! the level that delivers it in its own slot; while that level is above the
//! previous segment's and the buffer was not full at the boundary, the two are
//! merged (part of the new frame is sent earlier). The merged region is then
//! settled against the buffer curves: wherever a single level would overflow
//! or underflow, the region is cut at the binding slot and each piece gets its
//! own level. Finally the boundary in front of the region is checked. A level
//! rise is only allowed where the buffer is full and a drop only where it is
//! exactly drained, otherwise the region absorbs the previous segment and is
//! settled again.
//!
//! The result satisfies the KKT conditions of the convex rate problem, so it
//! is the global optimum. The returned water levels are the optimality
//! certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cumulative_curves, ChannelGains, PowerSchedule, SystemParams, VideoTrace};
use crate::waterfill::{powers_from_level, slot_bits_at_level, Thresholds};

/// Relative tolerance on level comparisons.
pub const LEVEL_TOL: f64 = 1e-9;

/// Internal bit slack, relative to the buffer size. Tighter than the
/// reporting tolerance so solver decisions never disagree with the report.
const INTERNAL_TOL_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterLevelProfile {
    /// `W(t)` per slot.
    pub levels: Vec<f64>,
    /// `q_0 = 0, q_1, ...`: frame counts after which the level changes.
    pub transitions: Vec<usize>,
    /// `f(t)`: buffer full after slot `t`'s arrivals, within the bit tolerance.
    pub full_flags: Vec<bool>,
}

impl WaterLevelProfile {
    pub fn max_level(&self) -> f64 {
        self.levels.iter().copied().fold(0.0, f64::max)
    }

    /// 1-based slots `k` where `W(k) < W(k+1)` without a full buffer at `k`.
    pub fn rise_violations(&self, tol_w: f64) -> Vec<usize> {
        self.levels
            .windows(2)
            .enumerate()
            .filter(|(k, w)| w[0] < w[1] - tol_w && !self.full_flags[*k])
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// Default level tolerance: `LEVEL_TOL * max(W)`.
    pub fn level_tol(&self) -> f64 {
        LEVEL_TOL * self.max_level()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmSolution {
    pub schedule: PowerSchedule,
    pub profile: WaterLevelProfile,
}

/// Minimum total power schedule delivering every frame on time without
/// overflowing the playout buffer.
pub fn solve_pm(trace: &VideoTrace, gains: &ChannelGains, params: &SystemParams) -> Result<PmSolution> {
    params.validate()?;
    gains.check_shape(trace.len(), params)?;
    if params.buffer <= trace.max_frame() {
        return Err(Error::BufferTooSmall {
            fmax: params.buffer,
            max_frame: trace.max_frame(),
        });
    }
    let rows = &gains.rows()[..trace.len()];
    if let Some(t) = rows.iter().position(|r| r.iter().all(|g| *g == 0.0)) {
        return Err(Error::Infeasible(format!("slot {} has no subchannel with positive gain", t + 1)));
    }
    let curves = cumulative_curves(trace, params);
    solve_curves(&curves.consumption, &curves.overflow, rows, params)
}

/// Same solver on explicit cumulative curves: `lower[t] <= X(t) <= upper[t]`
/// for `t < T - 1` and `X(T-1) = lower[T-1]`. `lower` must be nondecreasing
/// and `upper[t] > lower[t]`.
pub(crate) fn solve_curves(
    lower: &[f64],
    upper: &[f64],
    rows: &[Vec<f64>],
    params: &SystemParams,
) -> Result<PmSolution> {
    debug_assert_eq!(lower.len(), upper.len());
    debug_assert_eq!(lower.len(), rows.len());
    let mut dp = Dp::new(lower, upper, rows, params);
    for t in 0..lower.len() {
        dp.add_frame(t)?;
    }
    dp.finish()
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    end: usize,
    level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Touch {
    Overflow,
    Underflow,
}

struct Dp<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
    rows: &'a [Vec<f64>],
    params: &'a SystemParams,
    level: Vec<f64>,
    delivered: Vec<f64>,
    cum: Vec<f64>,
    /// Segment boundaries as slot counts: segment `k` is `bounds[k]..bounds[k+1]`.
    bounds: Vec<usize>,
    tol: f64,
}

fn greater(a: f64, b: f64) -> bool {
    a > b + LEVEL_TOL * a.abs().max(b.abs())
}

impl<'a> Dp<'a> {
    fn new(lower: &'a [f64], upper: &'a [f64], rows: &'a [Vec<f64>], params: &'a SystemParams) -> Self {
        let t = lower.len();
        Dp {
            lower,
            upper,
            rows,
            params,
            level: vec![0.0; t],
            delivered: vec![0.0; t],
            cum: vec![0.0; t],
            bounds: vec![0],
            tol: INTERNAL_TOL_FRACTION * params.buffer,
        }
    }

    fn x_before(&self, s: usize) -> f64 {
        if s == 0 {
            0.0
        } else {
            self.cum[s - 1]
        }
    }

    fn is_full(&self, k: usize) -> bool {
        self.upper[k] - self.cum[k] <= self.tol
    }

    fn is_drained(&self, k: usize) -> bool {
        self.cum[k] - self.lower[k] <= self.tol
    }

    fn level_over(&self, a: usize, b: usize, bits: f64) -> Result<f64> {
        let thr = Thresholds::from_rows(self.rows[a..=b].iter().map(Vec::as_slice), self.params);
        thr.level_for_units(bits / self.params.bits_per_log2()).ok_or_else(|| {
            Error::Infeasible(format!(
                "{bits} bits needed in slots {}..={} but no subchannel has positive gain",
                a + 1,
                b + 1
            ))
        })
    }

    fn fill(&mut self, seg: Segment) {
        let mut x = self.x_before(seg.start);
        for j in seg.start..=seg.end {
            self.level[j] = seg.level;
            self.delivered[j] = slot_bits_at_level(seg.level, &self.rows[j], self.params);
            x += self.delivered[j];
            self.cum[j] = x;
        }
    }

    /// Drops boundaries inside the region starting at slot `n`, leaving `n`
    /// as the last boundary.
    fn open_region(&mut self, n: usize) {
        while *self.bounds.last().unwrap() > n {
            self.bounds.pop();
        }
        if *self.bounds.last().unwrap() < n {
            self.bounds.push(n);
        }
    }

    /// Extends the region starting at `n` backwards over the previous segment.
    fn absorb_previous(&mut self, n: usize) -> usize {
        self.open_region(n);
        self.bounds.pop();
        *self.bounds.last().unwrap()
    }

    fn add_frame(&mut self, t: usize) -> Result<()> {
        let target = self.lower[t];
        let mut n = t;
        self.open_region(n);
        loop {
            // Pull the new demand backwards while it sits above a non-full boundary.
            while n > 0 {
                let wc = self.level_over(n, t, target - self.x_before(n))?;
                if greater(wc, self.level[n - 1]) && !self.is_full(n - 1) {
                    n = self.absorb_previous(n);
                } else {
                    break;
                }
            }
            self.open_region(n);
            let segs = self.settle(n, t, target)?;
            for seg in &segs {
                self.fill(*seg);
                if seg.end < t {
                    self.bounds.push(seg.end + 1);
                }
            }
            if n > 0 {
                let (first, prev) = (segs[0].level, self.level[n - 1]);
                let rise_ok = !greater(first, prev) || self.is_full(n - 1);
                let drop_ok = !greater(prev, first) || self.is_drained(n - 1);
                if !(rise_ok && drop_ok) {
                    n = self.absorb_previous(n);
                    continue;
                }
            }
            return Ok(());
        }
    }

    fn path_within_curves(&self, s: usize, t: usize, x0: f64, level: f64) -> bool {
        let mut x = x0;
        for k in s..t {
            x += slot_bits_at_level(level, &self.rows[k], self.params);
            if x < self.lower[k] - self.tol || x > self.upper[k] + self.tol {
                return false;
            }
        }
        true
    }

    /// Splits slots `n..=t` into constant-level pieces that run from
    /// `X(n-1)` to `target` inside the buffer curves, pulling the path taut.
    fn settle(&self, n: usize, t: usize, target: f64) -> Result<Vec<Segment>> {
        let bpl = self.params.bits_per_log2();
        let mut segs = Vec::new();
        let mut s = n;
        let mut x = self.x_before(n);
        while s <= t {
            let w_end = self.level_over(s, t, target - x)?;
            if self.path_within_curves(s, t, x, w_end) {
                segs.push(Segment { start: s, end: t, level: w_end });
                break;
            }
            // Scan forward keeping the band of levels that stay feasible so
            // far; the first slot that empties the band pins the cut.
            let mut thr = Thresholds::default();
            let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
            let mut cut = None;
            for e in s..=t {
                thr.push_row(&self.rows[e], self.params);
                if e == t {
                    if greater(w_end, hi) {
                        cut = Some((Touch::Overflow, hi, e));
                    } else if greater(lo, w_end) {
                        cut = Some((Touch::Underflow, lo, e));
                    }
                    break;
                }
                let need = thr
                    .level_for_units((self.lower[e] - x) / bpl)
                    .unwrap_or(f64::INFINITY);
                let room = thr
                    .level_for_units((self.upper[e] - x) / bpl)
                    .unwrap_or(f64::INFINITY);
                if greater(need, hi) {
                    cut = Some((Touch::Overflow, hi, e));
                    break;
                }
                if greater(lo, room) {
                    cut = Some((Touch::Underflow, lo, e));
                    break;
                }
                lo = lo.max(need);
                hi = hi.min(room);
            }
            let Some((touch, w_touch, e)) = cut else {
                segs.push(Segment { start: s, end: t, level: w_end });
                break;
            };
            // The binding slot is the one with least slack at the band edge;
            // ties go to the latest.
            let mut xk = x;
            let slack: Vec<f64> = (s..e)
                .map(|k| {
                    xk += slot_bits_at_level(w_touch, &self.rows[k], self.params);
                    match touch {
                        Touch::Overflow => self.upper[k] - xk,
                        Touch::Underflow => xk - self.lower[k],
                    }
                })
                .collect();
            let min = slack.iter().copied().fold(f64::INFINITY, f64::min);
            let k = s + slack.iter().rposition(|v| *v <= min + self.tol).unwrap();
            let reach = match touch {
                Touch::Overflow => self.upper[k],
                Touch::Underflow => self.lower[k],
            };
            let level = self.level_over(s, k, reach - x)?;
            segs.push(Segment { start: s, end: k, level });
            x = reach;
            s = k + 1;
        }
        Ok(segs)
    }

    fn finish(self) -> Result<PmSolution> {
        let powers: Vec<Vec<f64>> = self
            .level
            .iter()
            .zip(self.rows)
            .map(|(w, g)| powers_from_level(*w, g, self.params))
            .collect();
        let gains = ChannelGains::new(self.rows.to_vec())?;
        let schedule = PowerSchedule::from_powers(powers, &gains, self.params)?;
        let tol_bits = self.params.tol_bits();
        let full_flags = schedule
            .cumulative
            .iter()
            .zip(self.upper)
            .map(|(x, o)| o - x <= tol_bits)
            .collect();
        let scale = LEVEL_TOL * self.level.iter().copied().fold(0.0, f64::max);
        let mut transitions = vec![0];
        transitions.extend(
            self.bounds[1..]
                .iter()
                .copied()
                .filter(|&b| (self.level[b] - self.level[b - 1]).abs() > scale),
        );
        Ok(PmSolution {
            schedule,
            profile: WaterLevelProfile {
                levels: self.level,
                transitions,
                full_flags,
            },
        })
    }
}
