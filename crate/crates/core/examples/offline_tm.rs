//! Minimum-time schedule under the PM peak power, compared with PM.

use vbr_powerctl::channel::{gen_gauss_markov, GaussMarkovParams};
use vbr_powerctl::harness::gen_synthetic_trace;
use vbr_powerctl::offline::tm::PROGRESS_HORIZON_FACTOR;
use vbr_powerctl::offline::{solve_pm, solve_tm};
use vbr_powerctl::SystemParams;

fn main() -> vbr_powerctl::Result<()> {
    let trace = gen_synthetic_trace(512, 16, 8000.0, 5.0, 3)?;
    let params = SystemParams::new(16, 10e3, 1e-7, trace.slot_secs(), 1.5 * trace.max_frame())?;
    // TM may need slots past the end of the clip, so draw a longer channel.
    let gp = GaussMarkovParams { alpha: 0.99, variance: 2.0, seed: 3 };
    let path = gen_gauss_markov(16, PROGRESS_HORIZON_FACTOR * trace.len(), &gp)?;
    let head = vbr_powerctl::ChannelGains::new(path.gains().rows()[..trace.len()].to_vec())?;

    let pm = solve_pm(&trace, &head, &params)?;
    let cap = pm.schedule.peak_power();
    let tm = solve_tm(&trace, path.gains(), &params.with_power_cap(cap)?)?;
    let (p, t) = (pm.schedule.average_power(), tm.average_power());
    println!("power cap {cap:.4e} W");
    println!("PM average {p:.4e} W, TM average {t:.4e} W, PM saves {:.1}%", 100.0 * (t - p) / t);
    println!("TM finishes sending at slot {} of {}", tm.completion_slot, trace.len());
    Ok(())
}
