//! Block-fading channel draws and the analytic bit-flip channel.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One block-fading draw: a complex gain per stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub noise_variance: f64,
    pub channel_variance: f64,
}

impl ChannelRealization {
    /// Unit gains on every stream (AWGN).
    pub fn awgn(streams: usize, noise_variance: f64) -> Self {
        Self {
            gains: vec![Complex64::new(1.0, 0.0); streams],
            noise_variance,
            channel_variance: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn gain_sq(&self) -> Vec<f64> {
        self.gains.iter().map(|h| h.norm_sqr()).collect()
    }
}

/// Draws `streams` i.i.d. `CN(0, sigma_c^2)` gains from `seed`.
pub fn sample_rayleigh(channel_variance: f64, streams: usize, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_rayleigh_with(channel_variance, streams, 1.0, &mut rng)
}

pub fn sample_rayleigh_with<R: Rng + ?Sized>(
    channel_variance: f64,
    streams: usize,
    noise_variance: f64,
    rng: &mut R,
) -> ChannelRealization {
    assert!(channel_variance > 0.0, "channel variance must be positive");
    let sd = (channel_variance / 2.0).sqrt();
    let gains = (0..streams)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect();
    ChannelRealization {
        gains,
        noise_variance,
        channel_variance,
    }
}

/// Flips every bit independently with probability `p_error`.
///
/// Gaps between flips are drawn from the geometric distribution, so the
/// cost is proportional to the number of flips rather than the number of
/// bits.
pub fn analytic_channel<R: Rng + ?Sized>(bits: &mut [u8], p_error: f64, rng: &mut R) {
    assert!(
        (0.0..=1.0).contains(&p_error),
        "flip probability {p_error} outside [0, 1]"
    );
    if p_error == 0.0 {
        return;
    }
    if p_error == 1.0 {
        bits.iter_mut().for_each(|b| *b ^= 1);
        return;
    }
    let log_keep = (-p_error).ln_1p();
    let n = bits.len();
    let mut pos = 0usize;
    loop {
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_keep).floor();
        if skip >= (n - pos) as f64 {
            break;
        }
        pos += skip as usize;
        bits[pos] ^= 1;
        pos += 1;
        if pos >= n {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_power_matches_variance() {
        for var in [1.0, 2.5] {
            let ch = sample_rayleigh(var, 100_000, 11);
            let mean: f64 = ch.gain_sq().iter().sum::<f64>() / 100_000.0;
            assert!((mean / var - 1.0).abs() < 0.02, "mean {mean} for variance {var}");
            let mean_re: f64 = ch.gains.iter().map(|h| h.re).sum::<f64>() / 100_000.0;
            assert!(mean_re.abs() < 0.02 * var.sqrt());
        }
    }

    #[test]
    fn rayleigh_is_deterministic() {
        assert_eq!(sample_rayleigh(1.0, 24, 5), sample_rayleigh(1.0, 24, 5));
        assert_ne!(sample_rayleigh(1.0, 24, 5), sample_rayleigh(1.0, 24, 6));
    }

    #[test]
    fn analytic_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let orig: Vec<u8> = (0..1000).map(|i| (i % 3 == 0) as u8).collect();
        let mut bits = orig.clone();
        analytic_channel(&mut bits, 0.0, &mut rng);
        assert_eq!(bits, orig);
        analytic_channel(&mut bits, 1.0, &mut rng);
        assert!(bits.iter().zip(&orig).all(|(a, b)| a != b));
    }

    #[test]
    fn analytic_flip_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut bits = vec![0u8; 1_000_000];
        analytic_channel(&mut bits, 0.1, &mut rng);
        let frac = bits.iter().map(|&b| f64::from(b)).sum::<f64>() / 1e6;
        assert!((frac - 0.1).abs() < 0.001, "flip fraction {frac}");
    }

    #[test]
    fn analytic_flips_are_uniform_over_positions() {
        // Chi-square over 10 position bins.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0f64; 10];
        for _ in 0..200 {
            let mut bits = vec![0u8; 1000];
            analytic_channel(&mut bits, 0.05, &mut rng);
            for (i, b) in bits.iter().enumerate() {
                counts[i / 100] += f64::from(*b);
            }
        }
        let expected = 200.0 * 100.0 * 0.05;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }
}
