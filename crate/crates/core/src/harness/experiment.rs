//! Experiment configuration, execution and per-run metrics.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gen_gauss_markov, gen_rayleigh_iid, rng_from_seed, FadingPath, GaussMarkovParams, RayleighParams};
use crate::error::{Error, Result};
use crate::harness::trace::{gen_synthetic_trace, load_trace};
use crate::model::{cumulative_curves, PowerSchedule, SystemParams, VideoTrace, DEFAULT_NOISE_POWER_W};
use crate::offline::pm::PmSolution;
use crate::offline::tm::PROGRESS_HORIZON_FACTOR;
use crate::offline::{solve_pm, solve_tm};
use crate::online::sarsa::{run_sarsa_from, BetaSchedule, WeightVector, FEATURES};
use crate::online::{solve_gwf, GroupConfig, GwfResult, RlConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Pm,
    Tm,
    Gwf,
    Sarsa,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Pm, Policy::Tm, Policy::Gwf, Policy::Sarsa];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Pm => "pm",
            Policy::Tm => "tm",
            Policy::Gwf => "gwf",
            Policy::Sarsa => "sarsa",
        }
    }

    fn tag(&self) -> u64 {
        *self as u64 + 1
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("policy", format!("unknown policy `{s}`, expected pm, tm, gwf or sarsa")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TraceSource {
    File { path: PathBuf },
    Synthetic { frames: usize, ng: usize, mean_bits: f64, i_frame_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelSpec {
    Rayleigh { mean_gain: f64 },
    GaussMarkov { alpha: f64, variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub subchannels: usize,
    /// Hz.
    pub subchannel_bw: f64,
    /// W/Hz.
    pub noise_density: f64,
    /// Playout buffer as a multiple of the largest frame.
    pub buffer_ratio: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        let bw = 10e3;
        SystemSpec {
            subchannels: 100,
            subchannel_bw: bw,
            noise_density: DEFAULT_NOISE_POWER_W / bw,
            buffer_ratio: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlSettings {
    pub discount: f64,
    pub epsilon: f64,
    pub delta_steps: usize,
    pub w_init: [f64; FEATURES],
    /// Carry learned weights from run to run instead of restarting each run.
    pub persist_weights: bool,
}

impl Default for RlSettings {
    fn default() -> Self {
        let d = RlConfig::with_pmax(1.0);
        RlSettings {
            discount: d.discount,
            epsilon: d.epsilon,
            delta_steps: d.delta_steps,
            w_init: d.w_init,
            persist_weights: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    FmaxRatio,
    AlphaHat,
    Alpha,
    Ng,
    L,
    Epsilon,
    Discount,
    DeltaSteps,
    Pmax,
    M,
}

impl SweepParam {
    pub const ALL: [SweepParam; 10] = [
        SweepParam::FmaxRatio,
        SweepParam::AlphaHat,
        SweepParam::Alpha,
        SweepParam::Ng,
        SweepParam::L,
        SweepParam::Epsilon,
        SweepParam::Discount,
        SweepParam::DeltaSteps,
        SweepParam::Pmax,
        SweepParam::M,
    ];

    /// True when the parameter only affects the SARSA learner, so PM and
    /// GWF solutions can be shared across sweep values.
    pub fn learner_only(&self) -> bool {
        matches!(self, SweepParam::Epsilon | SweepParam::Discount | SweepParam::DeltaSteps)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::FmaxRatio => "fmax-ratio",
            SweepParam::AlphaHat => "alpha-hat",
            SweepParam::Alpha => "alpha",
            SweepParam::Ng => "ng",
            SweepParam::L => "l",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Discount => "discount",
            SweepParam::DeltaSteps => "delta-steps",
            SweepParam::Pmax => "pmax",
            SweepParam::M => "m",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("param", format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Policies run on every realization, in this order.
    pub policies: Vec<Policy>,
    pub system: SystemSpec,
    pub trace: TraceSource,
    pub channel: ChannelSpec,
    pub group: GroupConfig,
    pub rl: RlSettings,
    /// Total power cap. When absent, TM uses the PM peak and SARSA the GWF
    /// peak on the same realization.
    pub pmax: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub runs: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(policies: Vec<Policy>, trace: TraceSource) -> Self {
        ExperimentConfig {
            policies,
            system: SystemSpec::default(),
            trace,
            channel: ChannelSpec::GaussMarkov {
                alpha: 0.99,
                variance: 2.0,
            },
            group: GroupConfig::default(),
            rl: RlSettings::default(),
            pmax: None,
            sweep: None,
            runs: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::param("policies", "at least one policy is required"));
        }
        if self.runs == 0 {
            return Err(Error::param("runs", "must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::param("values", "sweep needs at least one value"));
            }
            for v in &s.values {
                self.with_value(s.param, *v)?;
            }
        }
        self.check()
    }

    fn check(&self) -> Result<()> {
        let s = &self.system;
        if s.subchannels == 0 {
            return Err(Error::param("m", "must be at least 1"));
        }
        if !(s.buffer_ratio > 1.0) {
            return Err(Error::param("fmax_ratio", format!("must exceed 1, got {}", s.buffer_ratio)));
        }
        match self.channel {
            ChannelSpec::Rayleigh { mean_gain } if !(mean_gain > 0.0) => {
                return Err(Error::param("sigma_h_sq", format!("must be positive, got {mean_gain}")));
            }
            ChannelSpec::GaussMarkov { alpha, variance } => GaussMarkovParams { alpha, variance, seed: 0 }.validate()?,
            _ => {}
        }
        self.group.validate()?;
        if let Some(p) = self.pmax {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::param("pmax", format!("must be positive, got {p}")));
            }
        }
        self.rl_config(1.0).validate()
    }

    fn rl_config(&self, pmax: f64) -> RlConfig {
        RlConfig {
            discount: self.rl.discount,
            epsilon: self.rl.epsilon,
            delta_steps: self.rl.delta_steps,
            pmax,
            w_init: self.rl.w_init,
            beta: BetaSchedule::Harmonic,
        }
    }

    /// Copy with one parameter overridden by a sweep value.
    pub fn with_value(&self, param: SweepParam, v: f64) -> Result<Self> {
        let count = |name: &'static str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::param(name, format!("sweep value {v} is not a positive integer")))
            }
        };
        let mut c = self.clone();
        c.sweep = None;
        match param {
            SweepParam::FmaxRatio => c.system.buffer_ratio = v,
            SweepParam::AlphaHat => c.group.alpha_hat = v,
            SweepParam::Alpha => match &mut c.channel {
                ChannelSpec::GaussMarkov { alpha, .. } => *alpha = v,
                ChannelSpec::Rayleigh { .. } => {
                    return Err(Error::param("alpha", "sweeping alpha needs the gauss-markov channel"))
                }
            },
            SweepParam::Ng => c.group.ng = count("ng")?,
            SweepParam::L => c.group.l = count("l")?,
            SweepParam::Epsilon => c.rl.epsilon = v,
            SweepParam::Discount => c.rl.discount = v,
            SweepParam::DeltaSteps => c.rl.delta_steps = count("delta_steps")?,
            SweepParam::Pmax => c.pmax = Some(v),
            SweepParam::M => c.system.subchannels = count("m")?,
        }
        c.check()?;
        Ok(c)
    }
}

/// Seeds used by one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub trace: u64,
    pub channel: u64,
    pub policy: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(a ^ splitmix(b))
}

impl RunSeeds {
    /// The realization depends only on the master seed and the run index, so
    /// every sweep value and policy sees the same trace and channel.
    pub fn derive(master: u64, run: usize, sweep_value: Option<f64>) -> Self {
        let base = mix(master, run as u64);
        RunSeeds {
            trace: mix(base, 1),
            channel: mix(base, 2),
            policy: mix(mix(base, 3), sweep_value.map_or(0, f64::to_bits)),
        }
    }
}

/// Per-slot series written to `curves.csv`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Curves {
    pub overflow: Vec<f64>,
    pub consumption: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub remaining: Vec<f64>,
    pub total_power: Vec<f64>,
    pub water_level: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub policy: Policy,
    pub sweep_index: Option<usize>,
    pub sweep_value: Option<f64>,
    pub run: usize,
    pub seeds: RunSeeds,
    pub slots: usize,
    /// Watts, averaged over the trace length.
    pub avg_power: f64,
    pub peak_power: f64,
    /// 1-based slot of the last delivered bit, if everything was delivered.
    pub completion_slot: Option<usize>,
    pub underflow_prob: f64,
    pub overflow_prob: f64,
    pub total_bits_error: f64,
    pub feasible: bool,
    pub pmax: Option<f64>,
    #[serde(skip)]
    pub curves: Curves,
}

impl ExperimentResult {
    /// Directory name under `runs/`.
    pub fn label(&self) -> String {
        match self.sweep_index {
            Some(i) => format!("{}-v{}-r{}", self.policy, i, self.run),
            None => format!("{}-r{}", self.policy, self.run),
        }
    }
}

struct Outcome<'a> {
    schedule: &'a PowerSchedule,
    levels: Option<&'a [f64]>,
    /// Buffer content, when it differs from `X(t) - U(t-1)`.
    remaining: Option<&'a [f64]>,
    total_bits_error: f64,
    feasible: bool,
    pmax: Option<f64>,
}

fn measure(policy: Policy, trace: &VideoTrace, params: &SystemParams, out: Outcome<'_>) -> ExperimentResult {
    let n = trace.len();
    let s = out.schedule;
    let len = s.slots();
    let tol = params.tol_bits();
    let curves = cumulative_curves(trace, params);
    let total = trace.total_bits();
    let overflow: Vec<f64> = (0..len)
        .map(|t| curves.overflow.get(t).copied().unwrap_or(total + params.buffer))
        .collect();
    let consumption: Vec<f64> = (0..len)
        .map(|t| curves.consumption.get(t).copied().unwrap_or(total))
        .collect();
    let remaining: Vec<f64> = match out.remaining {
        Some(d) => d.to_vec(),
        None => (0..len)
            .map(|t| s.cumulative[t] - if t == 0 { 0.0 } else { consumption[t - 1] })
            .collect(),
    };
    let frames = trace.frames();
    let under = (0..n).filter(|&t| remaining[t] < frames[t] - tol).count();
    let over = (0..n).filter(|&t| remaining[t] > params.buffer + tol).count();
    let powers = s.total_powers();
    let completion_slot = s.cumulative.iter().position(|x| *x >= total - tol).map(|t| t + 1);
    ExperimentResult {
        policy,
        sweep_index: None,
        sweep_value: None,
        run: 0,
        seeds: RunSeeds { trace: 0, channel: 0, policy: 0 },
        slots: n,
        avg_power: powers.iter().sum::<f64>() / n as f64,
        peak_power: s.peak_power(),
        completion_slot,
        underflow_prob: under as f64 / n as f64,
        overflow_prob: over as f64 / n as f64,
        total_bits_error: out.total_bits_error,
        feasible: out.feasible,
        pmax: out.pmax,
        curves: Curves {
            overflow,
            consumption,
            cumulative: s.cumulative.clone(),
            remaining,
            total_power: powers,
            water_level: match out.levels {
                Some(l) => l.iter().map(|w| Some(*w)).collect(),
                None => vec![None; len],
            },
        },
    }
}

fn realize_trace(cfg: &ExperimentConfig, loaded: Option<&VideoTrace>, seed: u64) -> Result<VideoTrace> {
    match (&cfg.trace, loaded) {
        (_, Some(t)) => Ok(t.clone()),
        (TraceSource::Synthetic { frames, ng, mean_bits, i_frame_ratio }, None) => {
            gen_synthetic_trace(*frames, *ng, *mean_bits, *i_frame_ratio, seed)
        }
        (TraceSource::File { path }, None) => load_trace(path),
    }
}

fn realize_channel(cfg: &ExperimentConfig, slots: usize, seed: u64) -> Result<FadingPath> {
    let m = cfg.system.subchannels;
    match cfg.channel {
        ChannelSpec::Rayleigh { mean_gain } => {
            Ok(FadingPath::from_gains(gen_rayleigh_iid(m, slots, &RayleighParams { mean_gain, seed })?))
        }
        ChannelSpec::GaussMarkov { alpha, variance } => {
            gen_gauss_markov(m, slots, &GaussMarkovParams { alpha, variance, seed })
        }
    }
}

/// PM and GWF solutions of one realization.
#[derive(Default)]
struct Baselines {
    pm: Option<PmSolution>,
    gwf: Option<GwfResult>,
}

/// Runs every policy of `cfg` on one realization. `weights` carries SARSA
/// weights between runs when they persist; `cache` holds baselines already
/// solved on the same realization.
fn run_once(
    cfg: &ExperimentConfig,
    loaded: Option<&VideoTrace>,
    seeds: RunSeeds,
    weights: &mut WeightVector,
    cache: &mut Baselines,
) -> Result<Vec<ExperimentResult>> {
    let trace = realize_trace(cfg, loaded, seeds.trace)?;
    let n = trace.len();
    let sys = &cfg.system;
    let params = SystemParams::new(
        sys.subchannels,
        sys.subchannel_bw,
        sys.noise_density,
        trace.slot_secs(),
        sys.buffer_ratio * trace.max_frame(),
    )?;
    let horizon = if cfg.policies.contains(&Policy::Tm) {
        PROGRESS_HORIZON_FACTOR * n
    } else {
        n
    };
    let path = realize_channel(cfg, horizon, seeds.channel)?;
    let head = if horizon == n {
        path.clone()
    } else {
        FadingPath::from_coefficients(path.coefficients()[..n].to_vec())?
    };

    let needs_pm = cfg.policies.contains(&Policy::Pm) || (cfg.policies.contains(&Policy::Tm) && cfg.pmax.is_none());
    let needs_gwf =
        cfg.policies.contains(&Policy::Gwf) || (cfg.policies.contains(&Policy::Sarsa) && cfg.pmax.is_none());
    if needs_pm && cache.pm.is_none() {
        cache.pm = Some(solve_pm(&trace, head.gains(), &params)?);
    }
    if needs_gwf && cache.gwf.is_none() {
        cache.gwf = Some(solve_gwf(&trace, &head, &params, &cfg.group)?);
    }
    let (pm, gwf) = (&cache.pm, &cache.gwf);

    let mut out = Vec::with_capacity(cfg.policies.len());
    for policy in &cfg.policies {
        let r = match policy {
            Policy::Pm => {
                let sol = pm.as_ref().expect("solved above");
                let report = crate::model::verify_schedule(&sol.schedule, &trace, &params, params.tol_bits())?;
                measure(
                    *policy,
                    &trace,
                    &params,
                    Outcome {
                        schedule: &sol.schedule,
                        levels: Some(&sol.profile.levels),
                        remaining: None,
                        total_bits_error: report.total_bits_error,
                        feasible: report.feasible,
                        pmax: None,
                    },
                )
            }
            Policy::Tm => {
                let cap = cfg
                    .pmax
                    .unwrap_or_else(|| pm.as_ref().expect("solved above").schedule.peak_power());
                let tm = solve_tm(&trace, path.gains(), &params.with_power_cap(cap)?)?;
                measure(
                    *policy,
                    &trace,
                    &params,
                    Outcome {
                        schedule: &tm.schedule,
                        levels: Some(&tm.levels),
                        remaining: None,
                        total_bits_error: tm.report.total_bits_error,
                        feasible: tm.report.feasible,
                        pmax: Some(cap),
                    },
                )
            }
            Policy::Gwf => {
                let g = gwf.as_ref().expect("solved above");
                measure(
                    *policy,
                    &trace,
                    &params,
                    Outcome {
                        schedule: &g.schedule,
                        levels: Some(&g.levels),
                        remaining: None,
                        total_bits_error: g.report.total_bits_error,
                        feasible: g.report.feasible,
                        pmax: None,
                    },
                )
            }
            Policy::Sarsa => {
                let cap = cfg
                    .pmax
                    .unwrap_or_else(|| gwf.as_ref().expect("solved above").schedule.peak_power());
                let rl = cfg.rl_config(cap);
                let start = if cfg.rl.persist_weights { *weights } else { WeightVector::new(rl.w_init)? };
                let mut rng = rng_from_seed(mix(seeds.policy, policy.tag()));
                let s = run_sarsa_from(&trace, &head, &params, &rl, start, &mut rng)?;
                *weights = s.weights;
                measure(
                    *policy,
                    &trace,
                    &params,
                    Outcome {
                        schedule: &s.schedule,
                        levels: None,
                        remaining: Some(&s.remaining),
                        total_bits_error: s.report.total_bits_error,
                        feasible: s.report.feasible,
                        pmax: Some(cap),
                    },
                )
            }
        };
        out.push(r);
    }
    Ok(out)
}

/// Runs the sweep-by-run grid in parallel. Results come back ordered by
/// sweep value, run and policy. Pass `jobs` to bound the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let loaded = match &cfg.trace {
        TraceSource::File { path } => Some(load_trace(path)?),
        TraceSource::Synthetic { .. } => None,
    };
    let points: Vec<(Option<usize>, Option<f64>, ExperimentConfig)> = match &cfg.sweep {
        None => vec![(None, None, cfg.clone())],
        Some(s) => s
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| Ok((Some(i), Some(*v), cfg.with_value(s.param, *v)?)))
            .collect::<Result<_>>()?,
    };
    let sweep_name = cfg.sweep.as_ref().map(|s| s.param.name());

    type Point = (Option<usize>, Option<f64>, ExperimentConfig);
    let run_point = |(idx, value, c): &Point, runs: &[usize], cache: Option<&mut Baselines>| {
        let mut weights = WeightVector::new(c.rl.w_init)?;
        let mut all = Vec::new();
        let mut own = Baselines::default();
        let cache = cache.unwrap_or(&mut own);
        for &run in runs {
            if runs.len() > 1 {
                *cache = Baselines::default();
            }
            let seeds = RunSeeds::derive(c.seed, run, *value);
            let rs = run_once(c, loaded.as_ref(), seeds, &mut weights, cache).map_err(|e| {
                let at = match (sweep_name, value) {
                    (Some(p), Some(v)) => format!("{p}={v}, run {run}"),
                    _ => format!("run {run}"),
                };
                e.context(at)
            })?;
            all.extend(rs.into_iter().map(|mut r| {
                r.sweep_index = *idx;
                r.sweep_value = *value;
                r.run = run;
                r.seeds = seeds;
                r
            }));
        }
        Ok::<_, Error>(all)
    };

    let exec = || -> Result<Vec<ExperimentResult>> {
        let shared = cfg.sweep.as_ref().is_some_and(|s| s.param.learner_only());
        let chunks: Vec<Vec<ExperimentResult>> = if cfg.rl.persist_weights {
            let runs: Vec<usize> = (0..cfg.runs).collect();
            points.par_iter().map(|p| run_point(p, &runs, None)).collect::<Result<_>>()?
        } else if shared {
            let per_run: Vec<Vec<Vec<ExperimentResult>>> = (0..cfg.runs)
                .into_par_iter()
                .map(|r| {
                    let mut cache = Baselines::default();
                    points.iter().map(|p| run_point(p, &[r], Some(&mut cache))).collect()
                })
                .collect::<Result<_>>()?;
            let mut by_point: Vec<Vec<ExperimentResult>> = vec![Vec::new(); points.len()];
            for run in per_run {
                for (i, rs) in run.into_iter().enumerate() {
                    by_point[i].extend(rs);
                }
            }
            by_point
        } else {
            points
                .par_iter()
                .flat_map(|p| (0..cfg.runs).into_par_iter().map(move |r| (p, r)))
                .map(|(p, r)| run_point(p, &[r], None))
                .collect::<Result<_>>()?
        };
        Ok(chunks.into_iter().flatten().collect())
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::param("jobs", e.to_string()))?
            .install(exec),
        None => exec(),
    }
}
