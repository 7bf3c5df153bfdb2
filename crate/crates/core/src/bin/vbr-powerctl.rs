use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vbr_powerctl::harness::output::aggregate;
use vbr_powerctl::harness::{
    emit_results, run_experiment, ChannelSpec, ExperimentConfig, Policy, SweepParam, SweepSpec, TraceSource,
};
use vbr_powerctl::online::GroupConfig;
use vbr_powerctl::Result;

#[derive(Parser)]
#[command(name = "vbr-powerctl", version, about = "Power control for VBR video over fading subchannels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline minimum-power schedule.
    Pm(Common),
    /// Offline minimum-time schedule under a power cap.
    Tm(Common),
    /// Online grouped water-filling.
    Gwf(Common),
    /// Online SARSA learner.
    Sarsa(Common),
    /// Sweep one parameter over several values for one or more policies.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Rayleigh,
    Gm,
}

#[derive(Args)]
struct Common {
    /// Frame-size trace, `frame_index,frame_size_bits` per line.
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Synthetic GoP trace: frames,ng,mean_bits,i_frame_ratio.
    #[arg(long, value_parser = parse_synthetic, default_value = "1024,16,40000,5")]
    synthetic: [f64; 4],
    #[arg(long, value_enum, default_value = "gm")]
    channel: Channel,
    /// Gauss-Markov correlation.
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    /// Correlation assumed by the forecaster; defaults to --alpha.
    #[arg(long)]
    alpha_hat: Option<f64>,
    /// Mean channel power gain.
    #[arg(long, default_value_t = 2.0)]
    sigma_h_sq: f64,
    /// Subchannel bandwidth in Hz.
    #[arg(long, default_value_t = 10e3)]
    bc: f64,
    /// Number of subchannels.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Noise power spectral density in W/Hz; defaults to 1e-3 W per subchannel.
    #[arg(long)]
    n0: Option<f64>,
    /// Buffer size over the largest frame.
    #[arg(long, default_value_t = 1.5)]
    fmax_ratio: f64,
    /// Total power cap in W. TM defaults to the PM peak, SARSA to the GWF peak.
    #[arg(long)]
    pmax: Option<f64>,
    #[arg(long, default_value_t = 16)]
    ng: usize,
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    discount: f64,
    /// Action grid steps between zero and the power cap.
    #[arg(long, default_value_t = 100)]
    delta_steps: usize,
    /// Keep SARSA weights from one run to the next.
    #[arg(long)]
    persist_weights: bool,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, env = "VBR_POWERCTL_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter to vary: fmax-ratio, alpha-hat, alpha, ng, l, epsilon,
    /// discount, delta-steps, pmax or m.
    #[arg(long)]
    param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Policies to run on every realization.
    #[arg(long, value_delimiter = ',', default_value = "pm")]
    policy: Vec<Policy>,
}

fn parse_synthetic(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected frames,ng,mean_bits,i_frame_ratio, got {} values", v.len()))
}

fn config(c: &Common, policies: Vec<Policy>) -> ExperimentConfig {
    let trace = match &c.trace {
        Some(path) => TraceSource::File { path: path.clone() },
        None => TraceSource::Synthetic {
            frames: c.synthetic[0] as usize,
            ng: c.synthetic[1] as usize,
            mean_bits: c.synthetic[2],
            i_frame_ratio: c.synthetic[3],
        },
    };
    let mut cfg = ExperimentConfig::new(policies, trace);
    cfg.channel = match c.channel {
        Channel::Rayleigh => ChannelSpec::Rayleigh { mean_gain: c.sigma_h_sq },
        Channel::Gm => ChannelSpec::GaussMarkov {
            alpha: c.alpha,
            variance: c.sigma_h_sq,
        },
    };
    cfg.system.subchannels = c.m;
    cfg.system.subchannel_bw = c.bc;
    cfg.system.noise_density = c.n0.unwrap_or(1e-3 / c.bc);
    cfg.system.buffer_ratio = c.fmax_ratio;
    cfg.group = GroupConfig {
        ng: c.ng,
        l: c.l,
        alpha_hat: c.alpha_hat.unwrap_or(c.alpha),
    };
    cfg.rl.epsilon = c.epsilon;
    cfg.rl.discount = c.discount;
    cfg.rl.delta_steps = c.delta_steps;
    cfg.rl.persist_weights = c.persist_weights;
    cfg.pmax = c.pmax;
    cfg.runs = c.runs;
    cfg.seed = c.seed;
    cfg
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, common) = match &cli.command {
        Command::Pm(c) => (config(c, vec![Policy::Pm]), c),
        Command::Tm(c) => (config(c, vec![Policy::Tm]), c),
        Command::Gwf(c) => (config(c, vec![Policy::Gwf]), c),
        Command::Sarsa(c) => (config(c, vec![Policy::Sarsa]), c),
        Command::Sweep(s) => {
            let mut cfg = config(&s.common, s.policy.clone());
            cfg.sweep = Some(SweepSpec {
                param: s.param,
                values: s.values.clone(),
            });
            (cfg, &s.common)
        }
    };
    let results = run_experiment(&cfg, common.jobs)?;
    emit_results(&cfg, &results, &common.out)?;
    println!("policy\tvalue\truns\tavg_power_W\tpeak_power_W\tunderflow\toverflow");
    for a in aggregate(&results) {
        let value = a.sweep_value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.4}\t{:.4}",
            a.policy, value, a.runs, a.mean_avg_power, a.mean_peak_power, a.mean_underflow_prob, a.mean_overflow_prob
        );
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
