//! Fading generators and the one-step-ahead channel predictor.
//!
//! All generators draw from an explicitly seeded [`SimRng`]; nothing touches a
//! global RNG, so a `(params, seed)` pair always reproduces the same matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelGains;

/// Generator used for every random stream in the crate.
pub type SimRng = ChaCha8Rng;

/// Name of the pinned generator, recorded in experiment output.
pub const RNG_ALGORITHM: &str = "ChaCha8";

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighParams {
    /// Mean power gain per subchannel.
    pub mean_gain: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussMarkovParams {
    /// Slot-to-slot correlation of the fading coefficient, in (0, 1).
    pub alpha: f64,
    /// Stationary variance of the coefficient, which is also `E[|h|^2]`.
    pub variance: f64,
    pub seed: u64,
}

impl GaussMarkovParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::param("variance", format!("must be positive, got {}", self.variance)));
        }
        Ok(())
    }
}

/// Complex coefficients `h_i(t)` together with their power gains `|h_i(t)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingPath {
    coeffs: Vec<Vec<Complex64>>,
    gains: ChannelGains,
}

impl FadingPath {
    pub fn from_coefficients(coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        let rows = coeffs
            .iter()
            .map(|r| r.iter().map(|h| h.norm_sqr()).collect())
            .collect();
        let gains = ChannelGains::new(rows)?;
        Ok(FadingPath { coeffs, gains })
    }

    /// Path with real coefficients `sqrt(gain)`, for channels known only by
    /// their power gains.
    pub fn from_gains(gains: ChannelGains) -> Self {
        let coeffs = gains
            .rows()
            .iter()
            .map(|r| r.iter().map(|g| Complex64::new(g.sqrt(), 0.0)).collect())
            .collect();
        FadingPath { coeffs, gains }
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn slot(&self, t: usize) -> &[Complex64] {
        &self.coeffs[t]
    }

    pub fn gains(&self) -> &ChannelGains {
        &self.gains
    }

    pub fn slots(&self) -> usize {
        self.coeffs.len()
    }

    pub fn subchannels(&self) -> usize {
        self.gains.subchannels()
    }

    /// Copy of the path with slots `from..` replaced by `replacement`.
    pub fn with_suffix(&self, from: usize, replacement: &[Vec<Complex64>]) -> Result<Self> {
        let mut coeffs = self.coeffs[..from].to_vec();
        coeffs.extend_from_slice(replacement);
        FadingPath::from_coefficients(coeffs)
    }
}

/// I.i.d. Rayleigh fading: exponential power gains with the given mean.
pub fn gen_rayleigh_iid(subchannels: usize, slots: usize, params: &RayleighParams) -> Result<ChannelGains> {
    if subchannels == 0 || slots == 0 {
        return Err(Error::Dimension("need at least one slot and one subchannel".into()));
    }
    if !(params.mean_gain > 0.0 && params.mean_gain.is_finite()) {
        return Err(Error::param("mean_gain", format!("must be positive, got {}", params.mean_gain)));
    }
    let exp = Exp::new(1.0 / params.mean_gain).expect("rate is positive and finite");
    let mut rng = rng_from_seed(params.seed);
    let rows = (0..slots)
        .map(|_| (0..subchannels).map(|_| rng.sample(exp)).collect())
        .collect();
    ChannelGains::new(rows)
}

fn complex_normal(rng: &mut SimRng, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// First-order Gauss-Markov fading, `h(t+1) = alpha h(t) + n(t+1)`, started in
/// its stationary distribution so every slot has variance `params.variance`.
pub fn gen_gauss_markov(subchannels: usize, slots: usize, params: &GaussMarkovParams) -> Result<FadingPath> {
    if subchannels == 0 || slots == 0 {
        return Err(Error::Dimension("need at least one slot and one subchannel".into()));
    }
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);
    let drive = (1.0 - params.alpha * params.alpha) * params.variance;
    let mut coeffs: Vec<Vec<Complex64>> = Vec::with_capacity(slots);
    coeffs.push(
        (0..subchannels)
            .map(|_| complex_normal(&mut rng, params.variance))
            .collect(),
    );
    for t in 1..slots {
        let row = coeffs[t - 1]
            .iter()
            .map(|h| h * params.alpha + complex_normal(&mut rng, drive))
            .collect();
        coeffs.push(row);
    }
    FadingPath::from_coefficients(coeffs)
}

/// MMSE forecast `alpha_hat^k * h` of the coefficient `k` slots ahead.
pub fn predict_mmse(h_now: Complex64, alpha_hat: f64, k: u32) -> Complex64 {
    h_now * alpha_hat.powi(k as i32)
}

/// Power gain of the forecast: `alpha_hat^(2k) * |h|^2`.
pub fn predicted_gain(gain_now: f64, alpha_hat: f64, k: u32) -> f64 {
    gain_now * alpha_hat.powi(2 * k as i32)
}
