//! `summary.json` and per-run `curves.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::RNG_ALGORITHM;
use crate::error::Result;
use crate::harness::experiment::{ExperimentConfig, ExperimentResult, Policy};

pub const SCHEMA_VERSION: u32 = 1;

pub const CURVES_HEADER: [&str; 7] = ["t", "O", "U", "X", "D", "total_power", "water_level"];

/// Mean metrics of one policy at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: Policy,
    pub sweep_value: Option<f64>,
    pub runs: usize,
    pub mean_avg_power: f64,
    pub mean_peak_power: f64,
    pub mean_underflow_prob: f64,
    pub mean_overflow_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub rng: String,
    pub config: ExperimentConfig,
    pub aggregates: Vec<Aggregate>,
    pub runs: Vec<ExperimentResult>,
}

pub fn aggregate(results: &[ExperimentResult]) -> Vec<Aggregate> {
    let mut keys: Vec<(Policy, Option<f64>)> = Vec::new();
    for r in results {
        if !keys.iter().any(|k| k.0 == r.policy && k.1 == r.sweep_value) {
            keys.push((r.policy, r.sweep_value));
        }
    }
    keys.into_iter()
        .map(|(policy, sweep_value)| {
            let group: Vec<&ExperimentResult> = results
                .iter()
                .filter(|r| r.policy == policy && r.sweep_value == sweep_value)
                .collect();
            let n = group.len() as f64;
            let mean = |f: fn(&ExperimentResult) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            Aggregate {
                policy,
                sweep_value,
                runs: group.len(),
                mean_avg_power: mean(|r| r.avg_power),
                mean_peak_power: mean(|r| r.peak_power),
                mean_underflow_prob: mean(|r| r.underflow_prob),
                mean_overflow_prob: mean(|r| r.overflow_prob),
            }
        })
        .collect()
}

pub fn emit_results(cfg: &ExperimentConfig, results: &[ExperimentResult], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        rng: RNG_ALGORITHM.to_string(),
        config: cfg.clone(),
        aggregates: aggregate(results),
        runs: results.to_vec(),
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    for r in results {
        let dir = out_dir.join("runs").join(r.label());
        fs::create_dir_all(&dir)?;
        write_curves(r, &dir.join("curves.csv"))?;
    }
    Ok(())
}

fn write_curves(r: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    let c = &r.curves;
    w.write_record(CURVES_HEADER).map_err(std::io::Error::from)?;
    for t in 0..c.total_power.len() {
        let level = c.water_level[t].map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            (t + 1).to_string(),
            c.overflow[t].to_string(),
            c.consumption[t].to_string(),
            c.cumulative[t].to_string(),
            c.remaining[t].to_string(),
            c.total_power[t].to_string(),
            level,
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
