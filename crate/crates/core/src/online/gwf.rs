//! Grouped water-filling with causal channel knowledge.
//!
//! Frames are handled in groups of `ng * l`. In every slot the transmitter
//! sees the true current gains, forecasts the rest of the group from them,
//! solves the minimum-power problem on what is left of the group and sends
//! only the current slot's share. Buffer constraints are rebuilt each slot
//! from the bits actually delivered, so forecast errors cost power but never
//! cause a stall or an overflow.

use serde::{Deserialize, Serialize};

use crate::channel::{predicted_gain, FadingPath};
use crate::error::{Error, Result};
use crate::model::{verify_schedule, FeasibilityReport, PowerSchedule, SystemParams, VideoTrace};
use crate::offline::pm::solve_curves;
use crate::waterfill::{powers_from_level, slot_bits_at_level};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    /// Frames per GoP.
    pub ng: usize,
    /// GoPs per group.
    pub l: usize,
    /// Assumed slot-to-slot channel correlation used for forecasting.
    pub alpha_hat: f64,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            ng: 16,
            l: 4,
            alpha_hat: 0.99,
        }
    }
}

impl GroupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ng == 0 {
            return Err(Error::param("ng", "must be at least 1"));
        }
        if self.l == 0 {
            return Err(Error::param("l", "must be at least 1"));
        }
        if !(self.alpha_hat > 0.0 && self.alpha_hat <= 1.0) {
            return Err(Error::param("alpha_hat", format!("must lie in (0, 1], got {}", self.alpha_hat)));
        }
        Ok(())
    }

    pub fn group_len(&self) -> usize {
        self.ng * self.l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwfResult {
    pub schedule: PowerSchedule,
    pub report: FeasibilityReport,
    /// Level committed in each slot.
    pub levels: Vec<f64>,
}

pub fn solve_gwf(
    trace: &VideoTrace,
    fading: &FadingPath,
    params: &SystemParams,
    cfg: &GroupConfig,
) -> Result<GwfResult> {
    params.validate()?;
    cfg.validate()?;
    let gains = fading.gains();
    gains.check_shape(trace.len(), params)?;
    if params.buffer <= trace.max_frame() {
        return Err(Error::BufferTooSmall {
            fmax: params.buffer,
            max_frame: trace.max_frame(),
        });
    }
    let n = trace.len();
    let frames = trace.frames();
    let mut powers = Vec::with_capacity(n);
    let mut delivered = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);

    for g0 in (0..n).step_by(cfg.group_len()) {
        let len = cfg.group_len().min(n - g0);
        // Cumulative frame bits inside the group, with a leading zero.
        let mut fl = vec![0.0; len + 1];
        for k in 0..len {
            fl[k + 1] = fl[k] + frames[g0 + k];
        }
        let mut sent = 0.0;
        for j in 0..len {
            let now = gains.slot(g0 + j);
            if now.iter().all(|g| *g == 0.0) {
                return Err(Error::Infeasible(format!("slot {} has no subchannel with positive gain", g0 + j + 1)));
            }
            let rows: Vec<Vec<f64>> = (0..len - j)
                .map(|k| {
                    if k == 0 {
                        now.to_vec()
                    } else {
                        now.iter().map(|g| predicted_gain(*g, cfg.alpha_hat, k as u32)).collect()
                    }
                })
                .collect();
            let lower: Vec<f64> = (j..len).map(|l| (fl[l + 1] - sent).max(0.0)).collect();
            let upper: Vec<f64> = (j..len).map(|l| fl[l] - sent + params.buffer).collect();
            let sol = solve_curves(&lower, &upper, &rows, params).map_err(|e| {
                e.context(format!("residual problem at slot {}", g0 + j + 1))
            })?;
            let w = sol.profile.levels[0];
            let h = slot_bits_at_level(w, now, params);
            powers.push(powers_from_level(w, now, params));
            delivered.push(h);
            levels.push(w);
            sent += h;
        }
    }

    let schedule = PowerSchedule::from_parts(powers, delivered);
    let report = verify_schedule(&schedule, trace, params, params.tol_bits())?;
    Ok(GwfResult {
        schedule,
        report,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_gauss_markov, GaussMarkovParams};
    use crate::model::ChannelGains;
    use crate::offline::solve_pm;
    use crate::waterfill::{water_level_for_target, SpanTarget};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn constant_path(h: &[f64], slots: usize) -> FadingPath {
        let row: Vec<Complex64> = h.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        FadingPath::from_coefficients(vec![row; slots]).unwrap()
    }

    #[test]
    fn exact_forecast_matches_offline_per_group() {
        let frames = vec![1.0, 3.0, 0.5, 2.0, 2.5, 0.2, 1.0];
        let tr = VideoTrace::new(frames.clone(), 1.0).unwrap();
        let p = SystemParams::normalized(2, 4.0).unwrap();
        let path = constant_path(&[1.0, 0.7], frames.len());
        let cfg = GroupConfig { ng: 2, l: 2, alpha_hat: 1.0 };
        let r = solve_gwf(&tr, &path, &p, &cfg).unwrap();
        assert!(r.report.feasible);
        for (g0, chunk) in frames.chunks(4).enumerate() {
            let sub = VideoTrace::new(chunk.to_vec(), 1.0).unwrap();
            let gains = ChannelGains::constant(path.gains().slot(0).to_vec(), chunk.len()).unwrap();
            let off = solve_pm(&sub, &gains, &p).unwrap();
            for (k, x) in off.schedule.total_powers().iter().enumerate() {
                assert_relative_eq!(r.schedule.slot_power(4 * g0 + k), *x, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn single_slot_groups_deliver_each_frame() {
        let frames = vec![1.0, 3.0, 0.5];
        let tr = VideoTrace::new(frames.clone(), 1.0).unwrap();
        let p = SystemParams::normalized(1, 4.0).unwrap();
        let gp = GaussMarkovParams { alpha: 0.9, variance: 2.0, seed: 1 };
        let path = gen_gauss_markov(1, 3, &gp).unwrap();
        let cfg = GroupConfig { ng: 1, l: 1, alpha_hat: 0.9 };
        let r = solve_gwf(&tr, &path, &p, &cfg).unwrap();
        for (t, f) in frames.iter().enumerate() {
            let g = path.gains().slot(t);
            let w = water_level_for_target(&SpanTarget::single(g, *f), &p).unwrap();
            assert_relative_eq!(r.schedule.delivered[t], *f, max_relative = 1e-12);
            assert_relative_eq!(r.levels[t], w, max_relative = 1e-12);
        }
    }

    #[test]
    fn short_run_is_feasible_and_above_offline() {
        let frames = vec![2.0, 0.5, 0.7, 1.5, 0.4, 0.6, 2.2, 0.3];
        let tr = VideoTrace::new(frames, 1.0).unwrap();
        let p = SystemParams::normalized(1, 3.3).unwrap();
        let gp = GaussMarkovParams { alpha: 0.99, variance: 2.0, seed: 42 };
        let path = gen_gauss_markov(1, 8, &gp).unwrap();
        let cfg = GroupConfig { ng: 2, l: 2, alpha_hat: 0.99 };
        let r = solve_gwf(&tr, &path, &p, &cfg).unwrap();
        assert!(r.report.feasible, "{:?}", r.report);
        assert!(r.report.total_bits_error <= p.tol_bits());
        let off = solve_pm(&tr, path.gains(), &p).unwrap();
        assert!(r.schedule.average_power() >= off.schedule.average_power() * (1.0 - 1e-9));
    }

    #[test]
    fn group_totals_do_not_leak() {
        let frames = vec![2.0, 0.5, 0.7, 1.5, 0.4, 0.6, 2.2];
        let tr = VideoTrace::new(frames.clone(), 1.0).unwrap();
        let p = SystemParams::normalized(3, 3.0).unwrap();
        let gp = GaussMarkovParams { alpha: 0.9, variance: 2.0, seed: 3 };
        let path = gen_gauss_markov(3, frames.len(), &gp).unwrap();
        let cfg = GroupConfig { ng: 3, l: 1, alpha_hat: 0.8 };
        let r = solve_gwf(&tr, &path, &p, &cfg).unwrap();
        for (k, chunk) in frames.chunks(3).enumerate() {
            let sent: f64 = r.schedule.delivered[3 * k..3 * k + chunk.len()].iter().sum();
            assert_relative_eq!(sent, chunk.iter().sum::<f64>(), max_relative = 1e-9);
        }
    }

    #[test]
    fn causal() {
        let frames: Vec<f64> = (0..12).map(|k| 1.0 + (k % 4) as f64 * 0.5).collect();
        let tr = VideoTrace::new(frames, 1.0).unwrap();
        let p = SystemParams::normalized(2, 4.0).unwrap();
        let gp = GaussMarkovParams { alpha: 0.95, variance: 2.0, seed: 8 };
        let path = gen_gauss_markov(2, 12, &gp).unwrap();
        let other = gen_gauss_markov(2, 12, &GaussMarkovParams { seed: 9, ..gp }).unwrap();
        let cfg = GroupConfig { ng: 4, l: 2, alpha_hat: 0.95 };
        let base = solve_gwf(&tr, &path, &p, &cfg).unwrap();
        for cut in [1, 5, 9] {
            let mixed = path.with_suffix(cut, &other.coefficients()[cut..]).unwrap();
            let r = solve_gwf(&tr, &mixed, &p, &cfg).unwrap();
            assert_eq!(&r.schedule.powers[..cut], &base.schedule.powers[..cut]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GroupConfig { ng: 0, l: 1, alpha_hat: 0.9 }.validate().is_err());
        assert!(GroupConfig { ng: 1, l: 0, alpha_hat: 0.9 }.validate().is_err());
        assert!(GroupConfig { ng: 1, l: 1, alpha_hat: 0.0 }.validate().is_err());
        assert!(GroupConfig { ng: 1, l: 1, alpha_hat: 1.0 }.validate().is_ok());
    }
}
