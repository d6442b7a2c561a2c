//! Reconstruction quality from actual bit differences.
//!
//! Colour images are scored channel by channel and averaged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitioner::ImportanceModel;
use crate::pixel_source::{PixelMatrix, SegmentMap};

fn check_pair(original: &PixelMatrix, recon: &PixelMatrix) -> Result<()> {
    if original.dims() != recon.dims() {
        return Err(Error::DimensionMismatch {
            expected: original.dims(),
            found: recon.dims(),
        });
    }
    if original.channels() != recon.channels() || original.bit_depth() != recon.bit_depth() {
        return Err(Error::Metric(format!(
            "layout mismatch: {} channels x {} bits vs {} channels x {} bits",
            original.channels(),
            original.bit_depth(),
            recon.channels(),
            recon.bit_depth()
        )));
    }
    Ok(())
}

/// Mean squared pixel error over all pixels and channels.
pub fn mse(original: &PixelMatrix, recon: &PixelMatrix) -> Result<f64> {
    check_pair(original, recon)?;
    let sum: f64 = original
        .data()
        .iter()
        .zip(recon.data())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum();
    Ok(sum / original.data().len() as f64)
}

/// Bit error rate of every (plane, segment) block of one channel,
/// indexed `[b - 1][s]`.
pub fn error_grid(
    original: &PixelMatrix,
    recon: &PixelMatrix,
    channel: usize,
    segmap: &SegmentMap,
) -> Result<Vec<Vec<f64>>> {
    check_pair(original, recon)?;
    segmap.check_dims(original.dims())?;
    if channel >= original.channels() {
        return Err(Error::Metric(format!("channel {channel} out of range")));
    }
    let depth = usize::from(original.bit_depth());
    let segs = segmap.segment_count();
    let mut counts = vec![vec![0usize; segs]; depth];
    for pixel in 0..original.pixel_count() {
        let diff = original.get_linear(pixel, channel) ^ recon.get_linear(pixel, channel);
        if diff == 0 {
            continue;
        }
        let s = segmap.label(pixel);
        let mut d = diff;
        while d != 0 {
            let b = d.trailing_zeros() as usize;
            counts[b][s] += 1;
            d &= d - 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(segmap.pixel_counts())
                .map(|(c, &n)| c as f64 / n as f64)
                .collect()
        })
        .collect())
}

/// Fraction of differing bits in plane `b` restricted to segment `s`.
pub fn sub_error(
    original: &PixelMatrix,
    recon: &PixelMatrix,
    channel: usize,
    b: usize,
    s: usize,
    segmap: &SegmentMap,
) -> Result<f64> {
    if b == 0 || b > usize::from(original.bit_depth()) {
        return Err(Error::PlaneOutOfRange {
            plane: b,
            bit_depth: original.bit_depth(),
        });
    }
    if s >= segmap.segment_count() {
        return Err(Error::Metric(format!(
            "segment {s} out of range for {} segments",
            segmap.segment_count()
        )));
    }
    Ok(error_grid(original, recon, channel, segmap)?[b - 1][s])
}

fn check_model(model: &ImportanceModel, original: &PixelMatrix, segmap: &SegmentMap) -> Result<()> {
    if model.bit_depth() != original.bit_depth() {
        return Err(Error::Importance(format!(
            "model has {} bit weights, image has {} bits",
            model.bit_depth(),
            original.bit_depth()
        )));
    }
    if model.segment_weights().len() != segmap.segment_count() {
        return Err(Error::Importance(format!(
            "model has {} segment weights, map has {} segments",
            model.segment_weights().len(),
            segmap.segment_count()
        )));
    }
    let total: f64 = model.segment_weights().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Importance(format!("segment weights sum to {total}, not 1")));
    }
    Ok(())
}

fn weighted(grid: &[Vec<f64>], model: &ImportanceModel) -> f64 {
    grid.iter()
        .zip(model.bit_weights())
        .map(|(row, gb)| {
            gb * row
                .iter()
                .zip(model.segment_weights())
                .map(|(e, gs)| gs * e)
                .sum::<f64>()
        })
        .sum()
}

/// Importance-weighted MSE of one channel.
pub fn imse(
    original: &PixelMatrix,
    recon: &PixelMatrix,
    channel: usize,
    model: &ImportanceModel,
    segmap: &SegmentMap,
) -> Result<f64> {
    check_model(model, original, segmap)?;
    Ok(weighted(&error_grid(original, recon, channel, segmap)?, model))
}

/// `||I||^2 / I`, averaged over channels.
pub fn signal_power(original: &PixelMatrix) -> f64 {
    (0..original.channels()).map(|c| original.mean_square(c)).sum::<f64>() / original.channels() as f64
}

/// `10 log10(imse / (||I||^2 / I))`.
pub fn normalized_imse_db(imse_value: f64, original: &PixelMatrix) -> Result<f64> {
    let power = signal_power(original);
    if power == 0.0 {
        return Err(Error::Metric("cannot normalise against an all-zero image".into()));
    }
    Ok(10.0 * (imse_value / power).log10())
}

/// Fraction of pixel samples with two or more wrong bits.
pub fn multi_bit_error_rate(original: &PixelMatrix, recon: &PixelMatrix) -> Result<f64> {
    check_pair(original, recon)?;
    let bad = original
        .data()
        .iter()
        .zip(recon.data())
        .filter(|(&a, &b)| (a ^ b).count_ones() >= 2)
        .count();
    Ok(bad as f64 / original.data().len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImseReport {
    pub imse: f64,
    pub normalized_imse_db: f64,
    pub mse: f64,
    /// Channel-averaged bit error rates indexed `[b - 1][s]`.
    pub per_stream_errors: Vec<Vec<f64>>,
    pub multi_bit_error_rate: f64,
}

/// Scores a reconstruction; every quantity is averaged over channels.
pub fn imse_report(
    original: &PixelMatrix,
    recon: &PixelMatrix,
    model: &ImportanceModel,
    segmap: &SegmentMap,
) -> Result<ImseReport> {
    check_pair(original, recon)?;
    check_model(model, original, segmap)?;
    let channels = original.channels();
    let mut grid = vec![vec![0.0; segmap.segment_count()]; usize::from(original.bit_depth())];
    for c in 0..channels {
        for (acc, row) in grid.iter_mut().zip(error_grid(original, recon, c, segmap)?) {
            for (a, e) in acc.iter_mut().zip(row) {
                *a += e / channels as f64;
            }
        }
    }
    let imse = weighted(&grid, model);
    Ok(ImseReport {
        imse,
        normalized_imse_db: normalized_imse_db(imse, original)?,
        mse: mse(original, recon)?,
        per_stream_errors: grid,
        multi_bit_error_rate: multi_bit_error_rate(original, recon)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::analytic_channel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gray(h: usize, w: usize, data: Vec<u16>) -> PixelMatrix {
        PixelMatrix::new(h, w, 1, 8, data).unwrap()
    }

    #[test]
    fn mse_values() {
        let a = gray(2, 2, vec![10, 20, 30, 40]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = gray(2, 2, vec![138, 20, 30, 40]);
        assert_eq!(mse(&a, &b).unwrap(), 4096.0);
        for plane in 1..=8u32 {
            let flipped = gray(2, 2, a.data().iter().map(|v| v ^ (1 << (plane - 1))).collect());
            assert_eq!(mse(&a, &flipped).unwrap(), 4f64.powi(plane as i32 - 1));
        }
        assert!(mse(&a, &gray(1, 4, vec![0; 4])).is_err());
    }

    #[test]
    fn sub_error_counts() {
        let orig = gray(2, 5, vec![0; 10]);
        let map = SegmentMap::uniform(2, 5);
        assert_eq!(sub_error(&orig, &orig, 0, 3, 0, &map).unwrap(), 0.0);
        let mut r = orig.clone();
        for p in [0, 4, 7] {
            r.set_linear(p, 0, 1 << 2);
        }
        assert_eq!(sub_error(&orig, &r, 0, 3, 0, &map).unwrap(), 0.3);
        let all = gray(2, 5, vec![1 << 2; 10]);
        assert_eq!(sub_error(&orig, &all, 0, 3, 0, &map).unwrap(), 1.0);
        assert!(sub_error(&orig, &r, 0, 9, 0, &map).is_err());
        assert!(sub_error(&orig, &r, 0, 1, 1, &map).is_err());
    }

    #[test]
    fn single_msb_flip() {
        let orig = gray(4, 4, vec![0; 16]);
        let mut r = orig.clone();
        r.set_linear(5, 0, 128);
        let model = ImportanceModel::single_segment(8);
        let map = SegmentMap::uniform(4, 4);
        assert_eq!(imse(&orig, &r, 0, &model, &map).unwrap(), 16384.0 / 16.0);
    }

    #[test]
    fn normalization() {
        let img = gray(1, 2, vec![10, 10]);
        assert_eq!(normalized_imse_db(100.0, &img).unwrap(), 0.0);
        assert!((normalized_imse_db(10.0, &img).unwrap() + 10.0).abs() < 1e-12);
        assert!(normalized_imse_db(1.0, &gray(1, 1, vec![0])).is_err());
    }

    #[test]
    fn multi_bit_error_counts() {
        let orig = gray(1, 4, vec![0; 4]);
        assert_eq!(multi_bit_error_rate(&orig, &orig).unwrap(), 0.0);
        let two = gray(1, 4, vec![3, 5, 0b1000_0001, 0b0110_0000]);
        assert_eq!(multi_bit_error_rate(&orig, &two).unwrap(), 1.0);
        let mixed = gray(1, 4, vec![1, 0, 7, 0]);
        assert_eq!(multi_bit_error_rate(&orig, &mixed).unwrap(), 0.25);
    }

    #[test]
    fn uniform_flips_track_weight_sum() {
        let q = 0.02;
        let (h, w) = (200, 250);
        let orig = gray(h, w, (0..h * w).map(|i| (i * 37 % 256) as u16).collect());
        let map = SegmentMap::from_raw_labels(h, w, &(0..h * w).map(|i| (i % 3) as u32).collect::<Vec<_>>()).unwrap();
        let model = ImportanceModel::squared_error(8, vec![0.5, 0.3, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut recon = orig.clone();
        for b in 0..8 {
            let mut bits = vec![0u8; h * w];
            analytic_channel(&mut bits, q, &mut rng);
            for (p, &f) in bits.iter().enumerate() {
                if f == 1 {
                    let v = recon.get_linear(p, 0) ^ (1 << b);
                    recon.set_linear(p, 0, v);
                }
            }
        }
        let got = imse(&orig, &recon, 0, &model, &map).unwrap();
        let expected = q * model.bit_weight_sum();
        assert!((got / expected - 1.0).abs() < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn colour_report_averages_channels() {
        let r = gray(1, 2, vec![0, 0]);
        let g = gray(1, 2, vec![0, 0]);
        let orig = PixelMatrix::from_channels(&[r.clone(), g.clone()]).unwrap();
        let recon = PixelMatrix::from_channels(&[gray(1, 2, vec![1, 0]), g]).unwrap();
        let model = ImportanceModel::single_segment(8);
        let rep = imse_report(&orig, &recon, &model, &SegmentMap::uniform(1, 2));
        // All-zero original cannot be normalised.
        assert!(rep.is_err());
        let orig = PixelMatrix::from_channels(&[gray(1, 2, vec![2, 2]), gray(1, 2, vec![2, 2])]).unwrap();
        let recon = PixelMatrix::from_channels(&[gray(1, 2, vec![3, 2]), gray(1, 2, vec![2, 2])]).unwrap();
        let rep = imse_report(&orig, &recon, &model, &SegmentMap::uniform(1, 2)).unwrap();
        assert_eq!(rep.imse, 0.25);
        assert_eq!(rep.mse, 0.25);
        assert_eq!(rep.per_stream_errors[0][0], 0.25);
    }

    fn arb_pair() -> impl Strategy<Value = (PixelMatrix, PixelMatrix, SegmentMap)> {
        (1usize..8, 1usize..8, 1u32..4).prop_flat_map(|(h, w, s)| {
            (
                proptest::collection::vec(0u16..256, h * w),
                proptest::collection::vec(0u16..256, h * w),
                proptest::collection::vec(0u32..s, h * w),
            )
                .prop_map(move |(a, b, l)| {
                    (
                        gray(h, w, a),
                        gray(h, w, b),
                        SegmentMap::from_raw_labels(h, w, &l).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn imse_decomposes_into_sub_errors((orig, recon, map) in arb_pair()) {
            let s = map.segment_count();
            let model = ImportanceModel::squared_error(8, vec![1.0 / s as f64; s]).unwrap();
            let direct = imse(&orig, &recon, 0, &model, &map).unwrap();
            let mut sum = 0.0;
            for b in 1..=8 {
                for seg in 0..s {
                    sum += model.bit_weights()[b - 1] * model.segment_weights()[seg]
                        * sub_error(&orig, &recon, 0, b, seg, &map).unwrap();
                }
            }
            prop_assert!((direct - sum).abs() <= 1e-9 * direct.max(1.0));
        }

        #[test]
        fn imse_equals_mse_under_single_bit_errors(
            data in proptest::collection::vec((0u16..256, proptest::option::of(0u32..8)), 1..64)
        ) {
            let n = data.len();
            let orig = gray(1, n, data.iter().map(|d| d.0).collect());
            let recon = gray(1, n, data.iter().map(|(v, f)| f.map_or(*v, |b| v ^ (1 << b))).collect());
            prop_assert_eq!(multi_bit_error_rate(&orig, &recon).unwrap(), 0.0);
            let model = ImportanceModel::single_segment(8);
            let got = imse(&orig, &recon, 0, &model, &SegmentMap::uniform(1, n)).unwrap();
            prop_assert!((got - mse(&orig, &recon).unwrap()).abs() <= 1e-9 * got.max(1.0));
        }

        #[test]
        fn rates_are_fractions((orig, recon, map) in arb_pair()) {
            for row in error_grid(&orig, &recon, 0, &map).unwrap() {
                for e in row {
                    prop_assert!((0.0..=1.0).contains(&e));
                }
            }
            let a = multi_bit_error_rate(&orig, &recon).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
