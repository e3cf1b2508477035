//! Negative mean achievable rate and its exact gradient with respect to θ.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::array::{achievable_rate, inner};
use crate::error::{dim_err, Error, Result};
use crate::scenario::TrainingSample;
use crate::weights::BeamWeights;

/// `−(1/Q) Σ_q rate_q`, each rate computed by [`achievable_rate`].
pub fn rate_loss(samples: &[&TrainingSample], weights: &[BeamWeights]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("loss of an empty batch".into()));
    }
    if samples.len() != weights.len() {
        return Err(dim_err(samples.len(), weights.len()));
    }
    let mut total = 0.0;
    for (s, w) in samples.iter().zip(weights) {
        total += achievable_rate(w, &s.target_channel, &s.interferer_channels, &s.noise)?;
    }
    Ok(-total / samples.len() as f64)
}

/// Loss and `∂loss/∂θ` for θ row-major `Q×N`, with `w_n = e^{jπθ_n}`.
pub fn rate_loss_and_grad(samples: &[&TrainingSample], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let q = samples.len();
    if q == 0 {
        return Err(Error::Config("loss of an empty batch".into()));
    }
    let n = theta.len() / q;
    if n * q != theta.len() {
        return Err(dim_err(format!("{q}×N"), theta.len()));
    }
    let weights: Vec<BeamWeights> = theta.chunks_exact(n).map(BeamWeights::from_phases).collect();
    let loss = rate_loss(samples, &weights)?;

    let mut grad = vec![0.0; theta.len()];
    for (qi, (s, w)) in samples.iter().zip(&weights).enumerate() {
        let w = w.as_slice();
        let g = &mut grad[qi * n..(qi + 1) * n];
        let gain = s.noise.tx_power;
        let h = &s.target_channel.coefficients;
        let a = inner(w, h);
        let signal = gain * a.norm_sqr();
        let mut interference = 0.0;
        let mut d_int = vec![0.0; n];
        for hi in &s.interferer_channels {
            let b = inner(w, &hi.coefficients);
            interference += b.norm_sqr();
            accumulate_power_grad(b, w, &hi.coefficients, 1.0, &mut d_int);
        }
        let mut d_sig = vec![0.0; n];
        accumulate_power_grad(a, w, h, gain, &mut d_sig);
        let denom = interference + s.noise.sigma2;
        let total = signal + denom;
        let scale = -1.0 / (q as f64 * LN_2);
        for k in 0..n {
            let dr = (d_sig[k] + d_int[k]) / total - d_int[k] / denom;
            g[k] = scale * dr;
        }
    }
    Ok((loss, grad))
}

/// `∂|a|²/∂θ_n = 2 Re(conj(a) · (−jπ) conj(w_n) h_n)`, scaled and added into `out`.
fn accumulate_power_grad(a: Complex64, w: &[Complex64], h: &[Complex64], scale: f64, out: &mut [f64]) {
    let minus_j_pi = Complex64::new(0.0, -PI);
    for ((o, wn), hn) in out.iter_mut().zip(w).zip(h) {
        *o += scale * 2.0 * (a.conj() * minus_j_pi * wn.conj() * hn).re;
    }
}
