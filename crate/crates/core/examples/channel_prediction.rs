//! Gauss-Markov fading and how far the MMSE forecast drifts from the truth.

use vbr_powerctl::channel::{gen_gauss_markov, predict_mmse, GaussMarkovParams};

fn main() -> vbr_powerctl::Result<()> {
    let steps = [1u32, 4, 16, 64];
    println!("alpha  mean |h - h_hat|^2 at k = {steps:?}");
    for alpha in [0.5, 0.9, 0.99] {
        let path = gen_gauss_markov(64, 4096, &GaussMarkovParams { alpha, variance: 2.0, seed: 5 })?;
        let h = path.coefficients();
        let errs: Vec<f64> = steps
            .iter()
            .map(|&k| {
                let n = h.len() - k as usize;
                let mut sum = 0.0;
                for t in 0..n {
                    for (now, later) in h[t].iter().zip(&h[t + k as usize]) {
                        sum += (later - predict_mmse(*now, alpha, k)).norm_sqr();
                    }
                }
                sum / (n * h[0].len()) as f64
            })
            .collect();
        // Theory: variance * (1 - alpha^(2k)).
        println!("{alpha:<5}  {errs:.3?}");
    }
    Ok(())
}
