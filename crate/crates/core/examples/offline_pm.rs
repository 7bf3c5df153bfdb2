//! Minimum-power schedule for a short synthetic clip with full channel
//! knowledge, showing where the water level rises.
//!
//! ```text
//! cargo run --release --example offline_pm
//! ```

use vbr_powerctl::channel::{gen_gauss_markov, GaussMarkovParams};
use vbr_powerctl::harness::gen_synthetic_trace;
use vbr_powerctl::model::verify_schedule;
use vbr_powerctl::offline::solve_pm;
use vbr_powerctl::SystemParams;

fn main() -> vbr_powerctl::Result<()> {
    let trace = gen_synthetic_trace(48, 12, 4000.0, 5.0, 1)?;
    let params = SystemParams::new(4, 10e3, 1e-7, trace.slot_secs(), 1.5 * trace.max_frame())?;
    let path = gen_gauss_markov(4, trace.len(), &GaussMarkovParams { alpha: 0.95, variance: 2.0, seed: 1 })?;

    let pm = solve_pm(&trace, path.gains(), &params)?;
    let report = verify_schedule(&pm.schedule, &trace, &params, params.tol_bits())?;
    println!("average power {:.4e} W, peak {:.4e} W, feasible {}", pm.schedule.average_power(), pm.schedule.peak_power(), report.feasible);
    println!("slot  frame_bits  sent_bits  level  buffer_full");
    for t in 0..trace.len() {
        println!(
            "{:>4}  {:>10.0}  {:>9.0}  {:.3e}  {}",
            t + 1,
            trace.frames()[t],
            pm.schedule.delivered[t],
            pm.profile.levels[t],
            if pm.profile.full_flags[t] { "yes" } else { "" }
        );
    }
    Ok(())
}
