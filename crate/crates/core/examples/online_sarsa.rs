//! One SARSA episode on a Gauss-Markov channel, capped at the GWF peak.

use vbr_powerctl::channel::{gen_gauss_markov, rng_from_seed, GaussMarkovParams};
use vbr_powerctl::harness::gen_synthetic_trace;
use vbr_powerctl::online::{run_sarsa, solve_gwf, GroupConfig, RlConfig};
use vbr_powerctl::SystemParams;

fn main() -> vbr_powerctl::Result<()> {
    let trace = gen_synthetic_trace(512, 16, 2000.0, 5.0, 4)?;
    let params = SystemParams::new(4, 10e3, 1e-7, trace.slot_secs(), 1.5 * trace.max_frame())?;
    let path = gen_gauss_markov(4, trace.len(), &GaussMarkovParams { alpha: 0.9, variance: 2.0, seed: 4 })?;
    let gwf = solve_gwf(&trace, &path, &params, &GroupConfig { alpha_hat: 0.9, ..GroupConfig::default() })?;

    for epsilon in [0.1, 0.01, 0.001] {
        let cfg = RlConfig { epsilon, ..RlConfig::with_pmax(gwf.schedule.peak_power()) };
        let r = run_sarsa(&trace, &path, &params, &cfg, &mut rng_from_seed(4))?;
        println!(
            "epsilon {epsilon}: {:.4e} W (GWF {:.4e} W), underflow {:.2}%, overflow {:.2}%, stalls {}, weights {:.3?}",
            r.schedule.average_power(),
            gwf.schedule.average_power(),
            100.0 * r.underflow_prob(),
            100.0 * r.overflow_prob(),
            r.stalls.len(),
            r.weights.w
        );
    }
    Ok(())
}
