//! Transmission chain: BER model, fading, coding, modulation and the two
//! channel back-ends.

pub mod ber;
pub mod channel;
pub mod conv;
pub mod interleave;
pub mod qam;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::partitioner::Framing;

pub use ber::{ber, db_to_linear, fit_ber, fit_ber_db, linear_to_db, snr, BerModelParams};
pub use channel::{analytic_channel, sample_rayleigh, sample_rayleigh_with, ChannelRealization};
pub use conv::{conv_encode, viterbi_decode, CodeSpec};
pub use interleave::{deinterleave, interleave};
pub use qam::{qam_demap, qam_map, Constellation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Independent bit flips at the model's predicted BER.
    #[default]
    Analytic,
    /// Interleaver, convolutional code, Gray QAM, fading and AWGN, Viterbi.
    FullChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyConfig {
    pub modulation_order: u32,
    pub code: CodeSpec,
    pub interleave: bool,
    pub backend: Backend,
    pub ber: BerModelParams,
}

impl Default for PhyConfig {
    /// 16-QAM with the rate-1/2 `[6 7]` code and its fitted BER model.
    fn default() -> Self {
        Self {
            modulation_order: 16,
            code: CodeSpec::rate_half(),
            interleave: true,
            backend: Backend::Analytic,
            ber: BerModelParams::default(),
        }
    }
}

impl PhyConfig {
    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::new(self.modulation_order)
    }

    /// Bits-to-symbols bookkeeping used for the stream lengths `L_k`.
    pub fn framing(&self) -> Result<Framing> {
        let (num, den) = self.code.rate();
        let bps = self.constellation()?.bits_per_symbol() as u32;
        Framing::new(num, den, bps)
    }
}

/// Sends one sub-stream at per-symbol power `power` over gain `gain` and
/// returns the hard decisions on its payload bits.
///
/// `interleaver_seed` is only used by the full chain when interleaving is
/// enabled. All channel randomness comes from `rng`.
pub fn transmit_substream<R: Rng + ?Sized>(
    bits: &[u8],
    power: f64,
    gain: Complex64,
    noise_variance: f64,
    config: &PhyConfig,
    interleaver_seed: u64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    match config.backend {
        Backend::Analytic => {
            let p_err = ber(config.ber, snr(power, gain, noise_variance)).min(1.0);
            let mut out = bits.to_vec();
            analytic_channel(&mut out, p_err, rng);
            Ok(out)
        }
        Backend::FullChain => full_chain(bits, power, gain, noise_variance, config, interleaver_seed, rng),
    }
}

fn full_chain<R: Rng + ?Sized>(
    bits: &[u8],
    power: f64,
    gain: Complex64,
    noise_variance: f64,
    config: &PhyConfig,
    interleaver_seed: u64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let constellation = config.constellation()?;
    let bps = constellation.bits_per_symbol();

    let payload = if config.interleave {
        interleave(bits, interleaver_seed)
    } else {
        bits.to_vec()
    };
    let mut coded = conv_encode(&payload, &config.code);
    let coded_len = coded.len();
    coded.resize(coded_len.div_ceil(bps) * bps, 0);
    let symbols = qam_map(&coded, &constellation)?;

    let amp = gain * power.sqrt();
    let sd = (noise_variance / 2.0).sqrt();
    let equalized: Vec<Complex64> = symbols
        .iter()
        .map(|&x| {
            let noise = Complex64::new(
                sd * rng.sample::<f64, _>(StandardNormal),
                sd * rng.sample::<f64, _>(StandardNormal),
            );
            let y = amp * x + noise;
            if amp.norm_sqr() > 0.0 {
                y / amp
            } else {
                y
            }
        })
        .collect();

    let mut hard = qam_demap(&equalized, &constellation);
    hard.truncate(coded_len);
    let decoded = viterbi_decode(&hard, &config.code, payload.len())?;
    Ok(if config.interleave {
        deinterleave(&decoded, interleaver_seed)
    } else {
        decoded
    })
}

/// Measured payload BER of the full chain over a unit-gain AWGN channel,
/// one point per entry of `snr_db`. Each point sends `blocks` independently
/// terminated blocks of `block_len` random bits.
pub fn full_chain_ber_sweep(
    config: &PhyConfig,
    snr_db: &[f64],
    block_len: usize,
    blocks: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let cfg = PhyConfig {
        backend: Backend::FullChain,
        ..config.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(snr_db.len());
    for &db in snr_db {
        let power = db_to_linear(db);
        let mut errors = 0usize;
        for block in 0..blocks {
            let sent: Vec<u8> = (0..block_len).map(|_| rng.random::<bool>() as u8).collect();
            let got = transmit_substream(&sent, power, one, 1.0, &cfg, block as u64, &mut rng)?;
            errors += sent.iter().zip(&got).filter(|(a, b)| a != b).count();
        }
        out.push((db, errors as f64 / (block_len * blocks) as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest, ProptestConfig};

    fn full(interleave: bool, code: CodeSpec, m: u32) -> PhyConfig {
        PhyConfig {
            modulation_order: m,
            code,
            interleave,
            backend: Backend::FullChain,
            ber: BerModelParams::default(),
        }
    }

    #[test]
    fn default_framing_is_two_info_bits_per_symbol() {
        let f = PhyConfig::default().framing().unwrap();
        assert_eq!(f.info_bits_per_symbol(), 2.0);
    }

    #[test]
    fn analytic_high_power_is_clean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits: Vec<u8> = (0..10_000).map(|i| (i % 7 == 0) as u8).collect();
        let cfg = PhyConfig::default();
        let got = transmit_substream(&bits, 1e4, Complex64::new(1.0, 0.0), 1.0, &cfg, 0, &mut rng).unwrap();
        assert_eq!(got, bits);
    }

    #[test]
    fn analytic_zero_power_flips_at_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bits = vec![0u8; 200_000];
        let cfg = PhyConfig::default();
        let got = transmit_substream(&bits, 0.0, Complex64::new(0.3, 0.1), 1.0, &cfg, 0, &mut rng).unwrap();
        let frac = got.iter().map(|&b| f64::from(b)).sum::<f64>() / 200_000.0;
        assert!((frac - 0.5123).abs() < 0.005, "{frac}");
    }

    #[test]
    fn full_chain_high_power_is_clean() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bits: Vec<u8> = (0..5_001).map(|_| rng.random::<bool>() as u8).collect();
        for cfg in [
            full(true, CodeSpec::rate_half(), 16),
            full(false, CodeSpec::rate_two_thirds_punctured(), 4),
            full(true, CodeSpec::rate_third(), 64),
        ] {
            let got = transmit_substream(&bits, 1e6, Complex64::new(0.2, -0.7), 1.0, &cfg, 9, &mut rng).unwrap();
            assert_eq!(got, bits);
        }
    }

    #[test]
    fn full_chain_ber_near_model_at_10db() {
        let cfg = PhyConfig::default();
        let pts = full_chain_ber_sweep(&cfg, &[10.0], 20_000, 10, 77).unwrap();
        let predicted = ber(cfg.ber, 10.0);
        let rel = (pts[0].1 - predicted).abs() / predicted;
        assert!(rel < 0.5, "measured {} vs model {predicted}", pts[0].1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn noiseless_full_chain_identity(
            bits in proptest::collection::vec(0u8..2, 1..400),
            seed in any::<u64>(),
            interleave in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = full(interleave, CodeSpec::rate_half(), 16);
            let got = transmit_substream(&bits, 1e9, Complex64::new(1.0, 0.5), 1.0, &cfg, seed, &mut rng).unwrap();
            prop_assert_eq!(got, bits);
        }
    }
}
