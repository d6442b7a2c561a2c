//! Exponential bit-error-probability model `P_e = alpha * exp(beta * snr)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerModelParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BerModelParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::BerFit(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta < 0.0) {
            return Err(Error::BerFit(format!("beta must be negative, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Published fits for the rate-1/2 `[6 7]` and rate-2/3 convolutional
    /// codes. Returns `None` for combinations without a published fit.
    pub fn published(modulation_order: u32, rate_num: u32, rate_den: u32) -> Option<Self> {
        let (alpha, beta) = match (modulation_order, rate_num, rate_den) {
            (2, 1, 2) => (0.6559, -2.5484),
            (4, 1, 2) => (0.5914, -1.1788),
            (8, 1, 2) => (0.5271, -0.4368),
            (16, 1, 2) => (0.5123, -0.2862),
            (2, 2, 3) => (0.9774, -5.0670),
            (4, 2, 3) => (0.7302, -2.1711),
            (8, 2, 3) => (0.6256, -0.8691),
            (16, 2, 3) => (0.5699, -0.5604),
            _ => return None,
        };
        Some(Self { alpha, beta })
    }
}

impl Default for BerModelParams {
    /// 16-QAM with the rate-1/2 code.
    fn default() -> Self {
        Self {
            alpha: 0.5123,
            beta: -0.2862,
        }
    }
}

/// `alpha * exp(beta * snr)` for linear `snr`.
#[inline]
pub fn ber(params: BerModelParams, snr: f64) -> f64 {
    params.alpha * (params.beta * snr).exp()
}

/// `p |h|^2 / sigma^2`.
#[inline]
pub fn snr(power: f64, gain: Complex64, noise_variance: f64) -> f64 {
    power * gain.norm_sqr() / noise_variance
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Least-squares fit of `ln(ber) = ln(alpha) + beta * snr` over samples of
/// `(linear snr, measured ber)`. Samples with zero BER carry no information
/// on the log scale and are skipped.
pub fn fit_ber(samples: &[(f64, f64)]) -> Result<BerModelParams> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(s, b)| s.is_finite() && *b > 0.0 && b.is_finite())
        .map(|&(s, b)| (s, b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::BerFit(format!(
            "need at least 2 samples with positive BER, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= f64::EPSILON * mean_x.abs().max(1.0) {
        return Err(Error::BerFit("all samples share one SNR".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let beta = sxy / sxx;
    let alpha = (mean_y - beta * mean_x).exp();
    if beta >= 0.0 {
        return Err(Error::BerFit(format!("fitted beta {beta} is not negative")));
    }
    BerModelParams::new(alpha, beta)
}

/// [`fit_ber`] for samples whose SNR is given in dB.
pub fn fit_ber_db(samples_db: &[(f64, f64)]) -> Result<BerModelParams> {
    let linear: Vec<(f64, f64)> = samples_db.iter().map(|&(db, b)| (db_to_linear(db), b)).collect();
    fit_ber(&linear)
}
