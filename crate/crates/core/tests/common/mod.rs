//! Worked examples checked through the public API. Shared by the
//! `worked_examples` test target and the acceptance runner.

#![allow(dead_code)]

use num_complex::Complex64;
use vbr_powerctl::channel::{
    gen_gauss_markov, gen_rayleigh_iid, predict_mmse, rng_from_seed, FadingPath, GaussMarkovParams, RayleighParams,
};
use vbr_powerctl::harness::output::aggregate;
use vbr_powerctl::harness::trace::parse_trace;
use vbr_powerctl::harness::{
    emit_results, gen_synthetic_trace, load_trace, run_experiment, ExperimentConfig, Policy, Summary, SweepParam,
    SweepSpec, TraceSource,
};
use vbr_powerctl::model::{cumulative_curves, power_for_rate, simulate_buffer, slot_throughput, verify_schedule};
use vbr_powerctl::offline::{solve_pm, solve_tm};
use vbr_powerctl::online::sarsa::{feasible_power_bounds, feature_vector, reward, sarsa_step, select_action};
use vbr_powerctl::online::{run_sarsa, solve_gwf, GroupConfig, RlConfig, RlState, WeightVector};
use vbr_powerctl::waterfill::{level_for_power_budget, powers_from_level, water_level_for_target, SpanTarget};
use vbr_powerctl::{ChannelGains, Error, PowerSchedule, SystemParams, TraceError, VideoTrace};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn ok<T>(r: vbr_powerctl::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn unit(m: usize, fmax: f64) -> SystemParams {
    SystemParams::normalized(m, fmax).unwrap()
}

fn trace(frames: &[f64]) -> VideoTrace {
    VideoTrace::new(frames.to_vec(), 1.0).unwrap()
}

fn gains(rows: &[&[f64]]) -> ChannelGains {
    ChannelGains::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn throughput() -> Check {
    let p1 = unit(1, 10.0);
    ensure!(ok(slot_throughput(&[0.0], &[1.0], &p1))? == 0.0, "zero power");
    ensure!(close(ok(slot_throughput(&[1.0], &[1.0], &p1))?, 1.0, 1e-12), "one bit");
    let p2 = unit(2, 10.0);
    ensure!(close(ok(slot_throughput(&[3.0, 3.0], &[1.0, 1.0], &p2))?, 4.0, 1e-12), "two channels");
    ensure!(slot_throughput(&[-1.0], &[1.0], &p1).is_err(), "negative power accepted");
    Ok(())
}

fn rate_inversion() -> Check {
    let p = unit(1, 10.0);
    ensure!(ok(power_for_rate(0.0, 1.0, &p))? == 0.0, "zero rate");
    ensure!(close(ok(power_for_rate(1.0, 1.0, &p))?, 1.0, 1e-12), "C=1");
    ensure!(close(ok(power_for_rate(2.0, 0.5, &p))?, 6.0, 1e-12), "C=2, gain 0.5");
    ensure!(power_for_rate(1.0, 0.0, &p).is_err(), "zero gain accepted");
    Ok(())
}

fn curves() -> Check {
    let c = cumulative_curves(&trace(&[1.0, 3.0]), &unit(1, 10.0));
    ensure!(c.overflow == [10.0, 11.0] && c.consumption == [1.0, 4.0], "{c:?}");
    let c = cumulative_curves(&trace(&[5.0]), &unit(1, 2.0));
    ensure!(c.overflow == [2.0] && c.consumption == [5.0], "{c:?}");
    Ok(())
}

fn buffer_recursion() -> Check {
    let p = unit(1, 10.0);
    let tr = trace(&[1.0, 3.0]);
    let g = gains(&[&[1.0], &[1.0]]);
    let s = ok(PowerSchedule::from_powers(vec![vec![3.0], vec![3.0]], &g, &p))?;
    let d = ok(simulate_buffer(&s, &tr, &p))?.remaining;
    ensure!(close(d[0], 2.0, 1e-12) && close(d[1], 3.0, 1e-12), "{d:?}");
    let tr = trace(&[1.0, 3.0, 2.0]);
    let g = gains(&[&[1.0], &[1.0], &[1.0]]);
    let s = ok(PowerSchedule::from_powers(vec![vec![0.0]; 3], &g, &p))?;
    let d = ok(simulate_buffer(&s, &tr, &p))?.remaining;
    ensure!(d == [0.0, -1.0, -4.0], "{d:?}");
    Ok(())
}

fn feasibility_reports() -> Check {
    let p = unit(1, 10.0);
    let tr = trace(&[1.0, 3.0]);
    let g = gains(&[&[1.0], &[1.0]]);
    let pm = ok(solve_pm(&tr, &g, &p))?;
    ensure!(ok(verify_schedule(&pm.schedule, &tr, &p, p.tol_bits()))?.feasible, "PM schedule infeasible");

    let zero = ok(PowerSchedule::from_powers(vec![vec![0.0]; 2], &g, &p))?;
    let r = ok(verify_schedule(&zero, &tr, &p, p.tol_bits()))?;
    ensure!(r.underflow_slots == [1] && !r.feasible, "{r:?}");

    // Fmax + F(1) + 1 = 12 bits in slot 2.
    let burst = ok(PowerSchedule::from_powers(vec![vec![0.0], vec![2f64.powi(12) - 1.0]], &g, &p))?;
    let r = ok(verify_schedule(&burst, &tr, &p, p.tol_bits()))?;
    ensure!(r.overflow_slots == [2], "{r:?}");
    Ok(())
}

fn water_levels() -> Check {
    let p1 = unit(1, 10.0);
    let p2 = unit(2, 10.0);
    let w = ok(water_level_for_target(&SpanTarget::single(&[1.0], 2.0), &p1))?;
    ensure!(close(w, 4.0, 1e-12), "M=1 level {w}");
    let w = ok(water_level_for_target(&SpanTarget::single(&[1.0, 1.0], 2.0), &p2))?;
    ensure!(close(w, 2.0, 1e-12), "symmetric level {w}");
    let w = ok(water_level_for_target(&SpanTarget::single(&[1.0, 0.1], 2.0), &p2))?;
    ensure!(close(w, 4.0, 1e-12), "one inactive channel {w}");
    let w = ok(water_level_for_target(&SpanTarget::single(&[1.0, 0.1], 0.0), &p2))?;
    ensure!(w == 0.0, "zero target {w}");
    ensure!(water_level_for_target(&SpanTarget::single(&[0.0, 0.0], 1.0), &p2).is_err(), "dead span");

    ensure!(powers_from_level(4.0, &[1.0], &p1) == [3.0], "P=[3]");
    ensure!(powers_from_level(4.0, &[1.0, 0.1], &p2) == [3.0, 0.0], "P=[3,0]");
    ensure!(powers_from_level(0.0, &[1.0, 0.1], &p2) == [0.0, 0.0], "W=0");

    ensure!(close(ok(level_for_power_budget(&[1.0], 3.0, &p1))?, 4.0, 1e-12), "budget M=1");
    ensure!(close(ok(level_for_power_budget(&[1.0, 1.0], 6.0, &p2))?, 4.0, 1e-12), "budget symmetric");
    ensure!(close(ok(level_for_power_budget(&[1.0, 0.1], 3.0, &p2))?, 4.0, 1e-12), "budget one off");
    ensure!(level_for_power_budget(&[0.0, 0.0], 3.0, &p2).is_err(), "dead budget");
    Ok(())
}

fn channels() -> Check {
    let rp = RayleighParams { mean_gain: 2.0, seed: 21 };
    let g = ok(gen_rayleigh_iid(1000, 1000, &rp))?;
    let flat: Vec<f64> = g.rows().iter().flatten().copied().collect();
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    ensure!((mean - 2.0).abs() < 0.01, "Rayleigh mean {mean}");
    ensure!(flat.iter().all(|x| *x >= 0.0), "negative gain");
    ensure!(ok(gen_rayleigh_iid(1000, 1000, &rp))? == g, "Rayleigh not reproducible");

    let gp = GaussMarkovParams { alpha: 0.9999, variance: 2.0, seed: 4 };
    let path = ok(gen_gauss_markov(1, 100_000, &gp))?;
    ensure!(ok(gen_gauss_markov(1, 100_000, &gp))? == path, "Gauss-Markov not reproducible");
    let h: Vec<Complex64> = path.coefficients().iter().map(|r| r[0]).collect();
    let num: f64 = h.windows(2).map(|w| (w[1] * w[0].conj()).re).sum();
    let den: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    ensure!((num / den - 0.9999).abs() < 1e-3, "lag-1 correlation {}", num / den);

    let z = Complex64::new(0.4, -0.7);
    ensure!(predict_mmse(z, 0.3, 0) == z, "k=0 identity");
    let f = predict_mmse(Complex64::new(1.0, 0.0), 0.99, 2);
    ensure!(close(f.re, 0.9801, 1e-12) && f.im == 0.0, "{f}");
    Ok(())
}

fn offline_pm() -> Check {
    let p = unit(1, 10.0);
    let g = gains(&[&[1.0], &[1.0]]);
    let s = ok(solve_pm(&trace(&[1.0, 3.0]), &g, &p))?;
    let pw = s.schedule.total_powers();
    ensure!(close(pw[0], 3.0, 1e-9) && close(pw[1], 3.0, 1e-9), "prebuffering powers {pw:?}");
    ensure!(s.profile.levels.iter().all(|w| close(*w, 4.0, 1e-9)), "{:?}", s.profile.levels);

    let s = ok(solve_pm(&trace(&[3.0, 1.0]), &g, &p))?;
    let pw = s.schedule.total_powers();
    ensure!(close(pw[0], 7.0, 1e-9) && close(pw[1], 1.0, 1e-9), "underflow-bound powers {pw:?}");
    let w = &s.profile.levels;
    ensure!(close(w[0], 8.0, 1e-9) && close(w[1], 2.0, 1e-9), "{w:?}");

    let tight = solve_pm(&trace(&[1.0, 3.0]), &g, &unit(1, 1.5));
    ensure!(matches!(tight, Err(Error::BufferTooSmall { .. })), "buffer below the largest frame accepted");

    // Overflow binds: the buffer fills in slot 1 and the level rises after it.
    let g = gains(&[&[4.0], &[0.25]]);
    let s = ok(solve_pm(&trace(&[1.0, 3.0]), &g, &unit(1, 3.2)))?;
    let c = &s.schedule.delivered;
    ensure!(close(c[0], 3.2, 1e-9) && close(c[1], 0.8, 1e-8), "overflow-bound split {c:?}");
    ensure!(s.profile.full_flags[0] && s.profile.levels[0] < s.profile.levels[1], "{:?}", s.profile);
    ensure!(s.profile.rise_violations(s.profile.level_tol()).is_empty(), "rise without a full buffer");
    Ok(())
}

fn offline_tm() -> Check {
    let g = ChannelGains::constant(vec![1.0], 40).unwrap();
    let s = ok(solve_tm(&trace(&[1.0, 3.0]), &g, &ok(unit(1, 10.0).with_power_cap(7.0))?))?;
    let h = &s.schedule.delivered;
    ensure!(close(h[0], 3.0, 1e-9) && close(h[1], 1.0, 1e-9), "{h:?}");
    ensure!(close(s.schedule.total_powers()[1], 1.0, 1e-9) && s.completion_slot == 2, "{s:?}");

    let s = ok(solve_tm(&trace(&[1.0, 1.0]), &g, &ok(unit(1, 1.5).with_power_cap(100.0))?))?;
    let h = &s.schedule.delivered;
    ensure!(close(h[0], 1.5, 1e-9) && close(h[1], 0.5, 1e-9) && s.completion_slot == 2, "{h:?}");

    let s = ok(solve_tm(&trace(&[3.0, 1.0]), &g, &ok(unit(1, 1e3).with_power_cap(1.0))?))?;
    ensure!(s.report.underflow_slots.first() == Some(&1) && !s.report.feasible, "{:?}", s.report);
    Ok(())
}

fn online_gwf() -> Check {
    let tr = gen_synthetic_trace(8, 4, 2.0, 3.0, 9).map_err(|e| e.to_string())?;
    let p = unit(1, 1.5 * tr.max_frame());
    let path = ok(gen_gauss_markov(1, 8, &GaussMarkovParams { alpha: 0.99, variance: 2.0, seed: 3 }))?;
    let cfg = GroupConfig { ng: 2, l: 2, alpha_hat: 0.99 };
    let g = ok(solve_gwf(&tr, &path, &p, &cfg))?;
    ensure!(g.report.feasible, "{:?}", g.report);
    ensure!(close(g.schedule.total_bits(), tr.total_bits(), 1e-9), "total bits");
    let pm = ok(solve_pm(&tr, path.gains(), &p))?;
    ensure!(
        g.schedule.average_power() >= pm.schedule.average_power() * (1.0 - 1e-9),
        "GWF below the offline optimum"
    );
    Ok(())
}

fn rl_state(d_prev: f64, frame_prev: f64, frame_now: f64, frame_next: f64) -> RlState {
    RlState {
        t: 2,
        d_prev,
        frame_prev,
        frame_now,
        frame_next,
        gains_now: vec![1.0],
        gain_mean_est: vec![1.0],
    }
}

fn rl_pieces() -> Check {
    use vbr_powerctl::online::sarsa::wf_reference_power;
    ensure!(reward(0.0, 4.0) == 1.0 && reward(4.0, 4.0) == 0.0 && reward(2.0, 4.0) == 0.5, "reward");

    let p = unit(1, 10.0);
    ensure!(ok(wf_reference_power(&rl_state(5.0, 0.0, 1.0, 1.0), &p, 0.1))? == 0.0, "D_n=0");
    let w = ok(wf_reference_power(&rl_state(0.0, 0.0, 1.0, 1.0), &p, 1e-9))?;
    ensure!(close(w, 1.0, 1e-6), "symmetric reference {w}");
    let w = ok(wf_reference_power(&rl_state(0.0, 0.0, 2.0 * 1.37f64.log2(), 0.0), &p, 0.1))?;
    ensure!(close(w, 0.3, 1e-9), "floored reference {w}");

    let cfg = RlConfig::with_pmax(2000.0);
    let s = rl_state(0.0, 0.0, 1.0, 1.0);
    let f = ok(feature_vector(&s, 0.0, &p, &cfg))?;
    ensure!(f[0] == 1.0 && f[1] == 0.0, "{f:?}");
    ensure!(ok(feature_vector(&s, 2000.0, &p, &cfg))?[0] == 0.0, "huge power keeps f1");

    let (lo, hi) = ok(feasible_power_bounds(&rl_state(1.0, 1.0, 2.0, 0.0), &p))?;
    ensure!(close(lo, 3.0, 1e-12) && close(hi, 1023.0, 1e-12), "bounds ({lo}, {hi})");
    ensure!(ok(feasible_power_bounds(&rl_state(4.0, 1.0, 2.0, 0.0), &p))?.0 == 0.0, "clamped lower bound");

    let w = ok(WeightVector::new([1.0; 3]))?;
    let a = ok(select_action(&rl_state(0.0, 0.0, 3.0, 0.0), &w, &p, &RlConfig::with_pmax(1.0), &mut rng_from_seed(0)))?;
    ensure!(a.stall && a.power == 1.0, "{a:?}");

    let c = RlConfig { discount: 0.9, ..RlConfig::with_pmax(1.0) };
    let w0 = ok(WeightVector::new([0.0; 3]))?;
    ensure!(ok(sarsa_step(&w0, &[1.0, 0.0, 0.0], 1.0, None, &c, 1))?.w == [1.0, 0.0, 0.0], "first update");
    let w1 = ok(WeightVector::new([0.3, -0.2, 0.5]))?;
    ensure!(ok(sarsa_step(&w1, &[0.0; 3], 1.0, None, &c, 1))? == w1, "zero features");
    let f = [1.0, 1.0, 0.0];
    let r = w1.value(&f) - 0.9 * w1.value(&f);
    let w2 = ok(sarsa_step(&w1, &f, r, Some(&f), &c, 3))?;
    ensure!(w2.w.iter().zip(w1.w).all(|(a, b)| (a - b).abs() < 1e-15), "zero TD error");
    Ok(())
}

fn rl_runs() -> Check {
    let tr = VideoTrace::new(vec![1e-3; 6], 1.0).unwrap();
    let p = unit(1, 10.0);
    let path = ok(FadingPath::from_coefficients(vec![vec![Complex64::new(1.0, 0.0)]; 6]))?;
    let mut cfg = RlConfig::with_pmax(1.0);
    cfg.delta_steps = 1;
    cfg.epsilon = 0.0;
    cfg.w_init = [0.0; 3];
    let r = ok(run_sarsa(&tr, &path, &p, &cfg, &mut rng_from_seed(1)))?;
    ensure!(r.schedule.total_powers()[1..].iter().all(|x| *x == 0.0), "degenerate grid");
    ensure!(r.learning_curve[1..].windows(2).all(|w| w[1] > w[0]), "reward 1 after the first slot");

    let frames: Vec<f64> = (0..64).map(|k| if k % 8 == 0 { 3.0 } else { 1.0 }).collect();
    let tr = VideoTrace::new(frames, 1.0).unwrap();
    let p = unit(4, 4.5);
    let path = ok(gen_gauss_markov(4, 64, &GaussMarkovParams { alpha: 0.9, variance: 2.0, seed: 8 }))?;
    let cfg = RlConfig::with_pmax(5.0);
    let a = ok(run_sarsa(&tr, &path, &p, &cfg, &mut rng_from_seed(5)))?;
    let b = ok(run_sarsa(&tr, &path, &p, &cfg, &mut rng_from_seed(5)))?;
    ensure!(a == b, "runs differ under one seed");
    ensure!(a.report.overflow_slots.is_empty(), "overflow");
    Ok(())
}

fn traces() -> Check {
    let t = parse_trace("0,0\n1,8000\n2,24000").map_err(|e| e.to_string())?;
    ensure!(t.frames() == [8000.0, 24000.0], "{:?}", t.frames());
    ensure!(parse_trace("") == Err(TraceError::Empty), "empty file");
    let e = parse_trace("1,10\n2,-5\n");
    ensure!(matches!(e, Err(TraceError::NonPositiveSize { line: 2, .. })), "{e:?}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "1,10\n2,-5\n").map_err(|e| e.to_string())?;
    ensure!(matches!(load_trace(&path), Err(Error::Trace { .. })), "load error kind");

    let a = ok(gen_synthetic_trace(64, 8, 1e4, 4.0, 2))?;
    ensure!(a == ok(gen_synthetic_trace(64, 8, 1e4, 4.0, 2))?, "synthetic not reproducible");
    let (mut first, mut rest) = (0.0, 0.0);
    for seed in 0..2000 {
        let t = ok(gen_synthetic_trace(4, 4, 1e4, 1.0, seed))?;
        first += t.frames()[0];
        rest += t.frames()[1..].iter().sum::<f64>() / 3.0;
    }
    ensure!((first / rest - 1.0).abs() < 0.03, "unit ratio skews frame 1: {}", first / rest);
    Ok(())
}

fn small_experiment(policies: Vec<Policy>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        policies,
        TraceSource::Synthetic { frames: 96, ng: 8, mean_bits: 2000.0, i_frame_ratio: 4.0 },
    );
    c.system.subchannels = 4;
    c.runs = 3;
    c.seed = 11;
    c
}

fn experiments() -> Check {
    let c = small_experiment(vec![Policy::Pm, Policy::Tm]);
    let rs = ok(run_experiment(&c, None))?;
    for r in &rs {
        match r.policy {
            Policy::Pm => ensure!(r.feasible, "PM run {} infeasible", r.run),
            _ => ensure!(r.completion_slot.is_some_and(|s| s <= r.slots), "TM run {} late", r.run),
        }
    }

    let mut c = small_experiment(vec![Policy::Pm]);
    c.sweep = Some(SweepSpec { param: SweepParam::FmaxRatio, values: vec![1.5, 2.0, 2.5] });
    let means: Vec<f64> = aggregate(&ok(run_experiment(&c, None))?).iter().map(|a| a.mean_avg_power).collect();
    ensure!(means.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{means:?}");

    let mut c = small_experiment(vec![Policy::Pm]);
    c.runs = 1;
    let rs = ok(run_experiment(&c, None))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    ok(emit_results(&c, &rs, dir.path()))?;
    let csv = std::fs::read_to_string(dir.path().join("runs/pm-r0/curves.csv")).map_err(|e| e.to_string())?;
    ensure!(csv.lines().count() == 96 + 1, "curves.csv has {} lines", csv.lines().count());
    let json = std::fs::read_to_string(dir.path().join("summary.json")).map_err(|e| e.to_string())?;
    let back: Summary = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    ensure!(back.runs.len() == 1 && back.config == c, "summary round trip");
    Ok(())
}

pub const CASES: &[(&str, fn() -> Check)] = &[
    ("slot throughput", throughput),
    ("power for rate", rate_inversion),
    ("cumulative curves", curves),
    ("buffer recursion", buffer_recursion),
    ("feasibility reports", feasibility_reports),
    ("water levels", water_levels),
    ("channel generators and predictor", channels),
    ("offline minimum power", offline_pm),
    ("offline minimum time", offline_tm),
    ("grouped water-filling", online_gwf),
    ("SARSA building blocks", rl_pieces),
    ("SARSA runs", rl_runs),
    ("trace files and synthesis", traces),
    ("experiments and output files", experiments),
];

/// Runs every case and returns the failures.
pub fn failures() -> Vec<String> {
    CASES
        .iter()
        .filter_map(|(name, f)| f().err().map(|e| format!("{name}: {e}")))
        .collect()
}
