//! Buffer-size sweep through the experiment harness, writing summary.json
//! and per-run curves to `out/buffer_sweep`.

use std::path::Path;

use vbr_powerctl::harness::output::aggregate;
use vbr_powerctl::harness::{emit_results, run_experiment, ExperimentConfig, Policy, SweepParam, SweepSpec, TraceSource};

fn main() -> vbr_powerctl::Result<()> {
    let mut cfg = ExperimentConfig::new(
        vec![Policy::Pm, Policy::Tm],
        TraceSource::Synthetic { frames: 1024, ng: 16, mean_bits: 8000.0, i_frame_ratio: 5.0 },
    );
    cfg.system.subchannels = 16;
    cfg.runs = 5;
    cfg.seed = 7;
    cfg.sweep = Some(SweepSpec { param: SweepParam::FmaxRatio, values: vec![1.5, 2.0, 2.5, 3.0] });

    let results = run_experiment(&cfg, None)?;
    emit_results(&cfg, &results, Path::new("out/buffer_sweep"))?;
    println!("policy  buffer  mean_avg_power_W");
    for a in aggregate(&results) {
        println!("{:<6}  {:>5}x  {:.4e}", a.policy, a.sweep_value.unwrap(), a.mean_avg_power);
    }
    Ok(())
}
