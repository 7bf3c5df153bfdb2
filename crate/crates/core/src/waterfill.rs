//! Water-level solvers.
//!
//! Every power allocation in the crate has the form `P_i = [W - N0Bc/gamma_i]^+`
//! for some level `W`. Two inversions are needed: the level that delivers a
//! bit target over a span of slots, and the level whose powers sum to a
//! budget within one slot. Both functions are monotone and piecewise simple in
//! `W` (log-linear for bits, linear for power) with breakpoints at the
//! activation thresholds `N0Bc/gamma_i`, so they are solved exactly by walking
//! the sorted thresholds instead of iterating.

use crate::error::{Error, Result};
use crate::model::SystemParams;

/// A contiguous run of slots and the bits that must cross it.
#[derive(Debug, Clone)]
pub struct SpanTarget<'a> {
    pub slots: Vec<&'a [f64]>,
    pub target_bits: f64,
}

impl<'a> SpanTarget<'a> {
    pub fn new(slots: Vec<&'a [f64]>, target_bits: f64) -> Self {
        SpanTarget { slots, target_bits }
    }

    pub fn single(gains: &'a [f64], target_bits: f64) -> Self {
        SpanTarget {
            slots: vec![gains],
            target_bits,
        }
    }
}

/// Sorted `log2(N0Bc / gamma)` over every positive gain of a span.
#[derive(Debug, Clone, Default)]
pub(crate) struct Thresholds {
    log2_thr: Vec<f64>,
}

impl Thresholds {
    pub(crate) fn from_rows<'a, I>(rows: I, params: &SystemParams) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let noise = params.noise_power();
        let mut log2_thr: Vec<f64> = rows
            .into_iter()
            .flatten()
            .filter(|g| **g > 0.0)
            .map(|g| (noise / g).log2())
            .collect();
        log2_thr.sort_unstable_by(f64::total_cmp);
        Thresholds { log2_thr }
    }

    /// Adds one slot's gains, keeping the thresholds sorted.
    pub(crate) fn push_row(&mut self, row: &[f64], params: &SystemParams) {
        let noise = params.noise_power();
        let mut fresh: Vec<f64> = row
            .iter()
            .filter(|g| **g > 0.0)
            .map(|g| (noise / g).log2())
            .collect();
        if fresh.is_empty() {
            return;
        }
        fresh.sort_unstable_by(f64::total_cmp);
        let old = std::mem::take(&mut self.log2_thr);
        let mut merged = Vec::with_capacity(old.len() + fresh.len());
        let (mut a, mut b) = (old.into_iter().peekable(), fresh.into_iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => {
                    if x <= y {
                        merged.push(a.next().unwrap());
                    } else {
                        merged.push(b.next().unwrap());
                    }
                }
                (Some(_), None) => merged.extend(a.by_ref()),
                (None, Some(_)) => merged.extend(b.by_ref()),
                (None, None) => break,
            }
        }
        self.log2_thr = merged;
    }

    /// Level at which `sum log2(W / c) = units` over the active thresholds.
    /// `None` when no gain is positive and `units > 0`.
    pub(crate) fn level_for_units(&self, units: f64) -> Option<f64> {
        if units <= 0.0 {
            return Some(0.0);
        }
        let thr = &self.log2_thr;
        let mut sum = 0.0;
        for n in 1..=thr.len() {
            sum += thr[n - 1];
            let log2_w = (units + sum) / n as f64;
            if n == thr.len() || log2_w <= thr[n] {
                return Some(log2_w.exp2());
            }
        }
        None
    }
}

/// Bits one slot delivers when its subchannels are filled to `level`.
pub fn slot_bits_at_level(level: f64, gains: &[f64], params: &SystemParams) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    let noise = params.noise_power();
    let units: f64 = gains
        .iter()
        .filter(|g| **g > 0.0)
        .map(|g| (level * g / noise).log2().max(0.0))
        .sum();
    params.bits_per_log2() * units
}

pub fn bits_at_level<'a, I>(level: f64, rows: I, params: &SystemParams) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter()
        .map(|g| slot_bits_at_level(level, g, params))
        .sum()
}

/// Solves for the common level that delivers `span.target_bits` over the span.
pub fn water_level_for_target(span: &SpanTarget<'_>, params: &SystemParams) -> Result<f64> {
    if span.slots.is_empty() {
        return Err(Error::Domain("water level requested over an empty span".into()));
    }
    if !(span.target_bits >= 0.0) || !span.target_bits.is_finite() {
        return Err(Error::Domain(format!("bit target {} must be finite and >= 0", span.target_bits)));
    }
    let thr = Thresholds::from_rows(span.slots.iter().copied(), params);
    thr.level_for_units(span.target_bits / params.bits_per_log2())
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "{} bits requested over {} slot(s) with no positive gain",
                span.target_bits,
                span.slots.len()
            ))
        })
}

pub fn powers_from_level(level: f64, gains: &[f64], params: &SystemParams) -> Vec<f64> {
    let noise = params.noise_power();
    gains
        .iter()
        .map(|&g| if g > 0.0 { (level - noise / g).max(0.0) } else { 0.0 })
        .collect()
}

/// Level `V` with `sum_i [V - N0Bc/gamma_i]^+ = budget` in a single slot.
///
/// This is the classic sum-power water-filling; `V` stands in for the dual
/// variable of the power constraint.
pub fn level_for_power_budget(gains: &[f64], budget: f64, params: &SystemParams) -> Result<f64> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::Domain(format!("power budget {budget} must be finite and >= 0")));
    }
    let noise = params.noise_power();
    let mut thr: Vec<f64> = gains.iter().filter(|g| **g > 0.0).map(|g| noise / g).collect();
    if thr.is_empty() {
        return Err(Error::Infeasible("power budget over subchannels with zero gain".into()));
    }
    if budget == 0.0 {
        return Ok(0.0);
    }
    thr.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0;
    for n in 1..=thr.len() {
        sum += thr[n - 1];
        let v = (budget + sum) / n as f64;
        if n == thr.len() || v <= thr[n] {
            return Ok(v);
        }
    }
    unreachable!("loop returns at n == len")
}

/// Splits a total power across subchannels to maximize throughput.
pub fn split_power_budget(gains: &[f64], budget: f64, params: &SystemParams) -> Result<Vec<f64>> {
    let v = level_for_power_budget(gains, budget, params)?;
    Ok(powers_from_level(v, gains, params))
}

/// Minimum total power that carries `bits` in one slot.
pub fn min_power_for_bits(gains: &[f64], bits: f64, params: &SystemParams) -> Result<f64> {
    let w = water_level_for_target(&SpanTarget::single(gains, bits), params)?;
    Ok(powers_from_level(w, gains, params).iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(m: usize) -> SystemParams {
        SystemParams::normalized(m, 100.0).unwrap()
    }

    /// Plain bisection on the bit sum, kept independent of the threshold walk.
    fn bisect_level(rows: &[&[f64]], target: f64, p: &SystemParams) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while bits_at_level(hi, rows.iter().copied(), p) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bits_at_level(mid, rows.iter().copied(), p) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn single_channel_closed_form() {
        let p = unit(1);
        let w = water_level_for_target(&SpanTarget::single(&[1.0], 2.0), &p).unwrap();
        assert_relative_eq!(w, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_pair() {
        let p = unit(2);
        let w = water_level_for_target(&SpanTarget::single(&[1.0, 1.0], 2.0), &p).unwrap();
        assert_relative_eq!(w, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn weak_channel_stays_dry() {
        let p = unit(2);
        let g = [1.0, 0.1];
        let w = water_level_for_target(&SpanTarget::single(&g, 2.0), &p).unwrap();
        assert_relative_eq!(w, 4.0, max_relative = 1e-12);
        assert_relative_eq!(w, bisect_level(&[&g], 2.0, &p), max_relative = 1e-9);
        let pw = powers_from_level(w, &g, &p);
        assert_relative_eq!(pw[0], 3.0, max_relative = 1e-12);
        assert_eq!(pw[1], 0.0);
        // brute force: the level reproduces the target bit sum
        assert_relative_eq!(bits_at_level(w, [&g[..]], &p), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_target_is_zero_level() {
        let p = unit(2);
        assert_eq!(water_level_for_target(&SpanTarget::single(&[1.0, 3.0], 0.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn dead_span_is_infeasible() {
        let p = unit(2);
        let r = water_level_for_target(&SpanTarget::single(&[0.0, 0.0], 1.0), &p);
        assert!(matches!(r, Err(Error::Infeasible(_))));
        assert!(matches!(level_for_power_budget(&[0.0, 0.0], 1.0, &p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn powers_from_level_examples() {
        let p = unit(2);
        assert_eq!(powers_from_level(4.0, &[1.0], &p), vec![3.0]);
        assert_eq!(powers_from_level(4.0, &[1.0, 0.1], &p), vec![3.0, 0.0]);
        assert_eq!(powers_from_level(0.0, &[1.0, 5.0, 0.0], &p), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn budget_examples() {
        let p = unit(2);
        assert_relative_eq!(level_for_power_budget(&[1.0], 3.0, &p).unwrap(), 4.0);
        assert_relative_eq!(level_for_power_budget(&[1.0, 1.0], 6.0, &p).unwrap(), 4.0);
        let v = level_for_power_budget(&[1.0, 0.1], 3.0, &p).unwrap();
        assert_relative_eq!(v, 4.0);
        assert_eq!(powers_from_level(v, &[1.0, 0.1], &p)[1], 0.0);
    }

    #[test]
    fn incremental_thresholds_match_batch() {
        let p = unit(3);
        let rows = [vec![0.3, 2.0, 0.0], vec![1.5, 0.01, 4.0], vec![0.7, 0.7, 0.7]];
        let batch = Thresholds::from_rows(rows.iter().map(Vec::as_slice), &p);
        let mut inc = Thresholds::default();
        for r in &rows {
            inc.push_row(r, &p);
        }
        assert_eq!(batch.log2_thr, inc.log2_thr);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn span() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
            (1usize..=8, 1usize..=8).prop_flat_map(|(slots, m)| {
                (
                    prop::collection::vec(prop::collection::vec(1e-3f64..10.0, m), slots),
                    0.0f64..40.0,
                )
            })
        }

        proptest! {
            #[test]
            fn target_round_trip((rows, target) in span()) {
                let p = SystemParams::normalized(rows[0].len(), 100.0).unwrap();
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                let w = water_level_for_target(&SpanTarget::new(refs.clone(), target), &p).unwrap();
                let bits: f64 = refs
                    .iter()
                    .map(|g| crate::model::slot_throughput(&powers_from_level(w, g, &p), g, &p).unwrap())
                    .sum();
                prop_assert!((bits - target).abs() <= p.tol_bits());
                if target > 0.0 {
                    let oracle = bisect_level(&refs, target, &p);
                    prop_assert!((w - oracle).abs() <= 1e-9 * oracle);
                }
            }

            #[test]
            fn bits_monotone_in_level((rows, _t) in span(), a in 0.0f64..50.0, b in 0.0f64..50.0) {
                let p = SystemParams::normalized(rows[0].len(), 100.0).unwrap();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let refs = rows.iter().map(Vec::as_slice);
                prop_assert!(bits_at_level(lo, refs.clone(), &p) <= bits_at_level(hi, refs, &p));
            }

            #[test]
            fn budget_round_trip(g in prop::collection::vec(1e-3f64..10.0, 1..=8), budget in 0.0f64..100.0) {
                let p = SystemParams::normalized(g.len(), 100.0).unwrap();
                let v = level_for_power_budget(&g, budget, &p).unwrap();
                let pw = powers_from_level(v, &g, &p);
                let total: f64 = pw.iter().sum();
                prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1e-12));
                // active set: a subchannel is on iff its threshold is under the level
                for (gi, pi) in g.iter().zip(&pw) {
                    prop_assert_eq!(*pi > 0.0, 1.0 / gi < v);
                }
            }
        }
    }
}
