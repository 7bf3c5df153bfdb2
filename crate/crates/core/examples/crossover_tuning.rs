//! Searches SARSA settings for the correlation crossover against GWF.
//!
//! For each (epsilon, discount, delta_steps) on the grid below, 100 paired
//! runs are made at alpha = 0.5 and alpha = 0.99 (forecaster matched to the
//! channel). A setting shows the crossover when SARSA uses less power than
//! GWF at 0.5 and more at 0.99. Of those, the one with the widest smaller
//! margin is written to `tuning/crossover.json`, which the acceptance runner
//! reads.
//!
//! ```text
//! cargo run --release --example crossover_tuning
//! ```

use std::fs;
use std::path::Path;

use serde_json::json;
use vbr_powerctl::harness::output::aggregate;
use vbr_powerctl::harness::{run_experiment, ChannelSpec, ExperimentConfig, Policy, SweepParam, SweepSpec, TraceSource};
use vbr_powerctl::online::GroupConfig;

const EPSILONS: [f64; 7] = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];
const DISCOUNTS: [f64; 2] = [0.9, 0.5];
const DELTA_STEPS: [usize; 2] = [100, 1000];
const ALPHAS: [f64; 2] = [0.5, 0.99];

fn base(alpha: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        vec![Policy::Gwf, Policy::Sarsa],
        TraceSource::Synthetic { frames: 512, ng: 16, mean_bits: 2000.0, i_frame_ratio: 5.0 },
    );
    c.system.subchannels = 4;
    c.channel = ChannelSpec::GaussMarkov { alpha, variance: 2.0 };
    c.group = GroupConfig { alpha_hat: alpha, ..GroupConfig::default() };
    c.runs = 100;
    c.seed = 2024;
    c
}

/// Mean GWF and SARSA power per epsilon, for one (alpha, discount, steps).
fn means(alpha: f64, discount: f64, steps: usize) -> vbr_powerctl::Result<Vec<(f64, f64)>> {
    let mut c = base(alpha);
    c.rl.discount = discount;
    c.rl.delta_steps = steps;
    c.sweep = Some(SweepSpec { param: SweepParam::Epsilon, values: EPSILONS.to_vec() });
    let agg = aggregate(&run_experiment(&c, None)?);
    Ok(EPSILONS
        .iter()
        .map(|e| {
            let at = |p| agg.iter().find(|a| a.policy == p && a.sweep_value == Some(*e)).unwrap().mean_avg_power;
            (at(Policy::Gwf), at(Policy::Sarsa))
        })
        .collect())
}

fn main() -> vbr_powerctl::Result<()> {
    let mut rows = Vec::new();
    let mut best: Option<(f64, serde_json::Value)> = None;
    println!("epsilon\tdiscount\tsteps\tgwf@0.5\tsarsa@0.5\tgwf@0.99\tsarsa@0.99\tcrossover");
    for &discount in &DISCOUNTS {
        for &steps in &DELTA_STEPS {
            let lo = means(ALPHAS[0], discount, steps)?;
            let hi = means(ALPHAS[1], discount, steps)?;
            for (i, &eps) in EPSILONS.iter().enumerate() {
                let ((g_lo, s_lo), (g_hi, s_hi)) = (lo[i], hi[i]);
                let margin = ((g_lo - s_lo) / g_lo).min((s_hi - g_hi) / g_hi);
                let crossover = margin > 0.0;
                println!("{eps}\t{discount}\t{steps}\t{g_lo:.4e}\t{s_lo:.4e}\t{g_hi:.4e}\t{s_hi:.4e}\t{crossover}");
                let cfg = json!({ "epsilon": eps, "discount": discount, "delta_steps": steps });
                rows.push(json!({
                    "config": cfg,
                    "gwf_low": g_lo, "sarsa_low": s_lo, "gwf_high": g_hi, "sarsa_high": s_hi,
                    "margin": margin,
                }));
                if crossover && best.as_ref().is_none_or(|(m, _)| margin > *m) {
                    best = Some((margin, cfg));
                }
            }
        }
    }
    let doc = json!({
        "alphas": ALPHAS,
        "runs": base(0.5).runs,
        "seed": base(0.5).seed,
        "grid": { "epsilon": EPSILONS, "discount": DISCOUNTS, "delta_steps": DELTA_STEPS },
        "selected": best.as_ref().map(|b| b.1.clone()),
        "results": rows,
    });
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tuning");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("crossover.json"), serde_json::to_string_pretty(&doc)?)?;
    match best {
        Some((m, cfg)) => println!("selected {cfg} (margin {m:.3})"),
        None => println!("no setting on the grid shows the crossover"),
    }
    Ok(())
}
