//! Grouped water-filling with forecast channels, against the offline bound,
//! for several forecaster correlations.

use vbr_powerctl::channel::{gen_gauss_markov, GaussMarkovParams};
use vbr_powerctl::harness::gen_synthetic_trace;
use vbr_powerctl::offline::solve_pm;
use vbr_powerctl::online::{solve_gwf, GroupConfig};
use vbr_powerctl::SystemParams;

fn main() -> vbr_powerctl::Result<()> {
    let trace = gen_synthetic_trace(512, 16, 2000.0, 5.0, 8)?;
    let params = SystemParams::new(4, 10e3, 1e-7, trace.slot_secs(), 1.5 * trace.max_frame())?;
    let path = gen_gauss_markov(4, trace.len(), &GaussMarkovParams { alpha: 0.99, variance: 2.0, seed: 8 })?;

    let bound = solve_pm(&trace, path.gains(), &params)?.schedule.average_power();
    println!("offline PM: {bound:.4e} W");
    for alpha_hat in [0.9, 0.95, 0.99] {
        let cfg = GroupConfig { ng: 16, l: 4, alpha_hat };
        let g = solve_gwf(&trace, &path, &params, &cfg)?;
        println!(
            "GWF alpha_hat {alpha_hat}: {:.4e} W, feasible {}",
            g.schedule.average_power(),
            g.report.feasible
        );
    }
    Ok(())
}
