//! Importance-aware partitioning of a pixel channel into sub-streams.
//!
//! Three criteria are supported:
//!
//! * SP-I groups bits by position within the pixel (`K = B` streams),
//! * SS-I groups all bits of a semantic segment (`K = S` streams),
//! * SP-SS-I groups by both (`K = S * B` streams, ordered segment-major).
//!
//! Within a stream bits follow a row-major pixel scan; for SS-I each pixel
//! contributes its planes from `1` to `B` in turn.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixel_source::{PixelMatrix, SegmentMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "sp-i")]
    SpI,
    #[serde(rename = "ss-i")]
    SsI,
    #[serde(rename = "sp-ss-i")]
    SpSsI,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::SpI, Criterion::SsI, Criterion::SpSsI];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::SpI => "sp-i",
            Criterion::SsI => "ss-i",
            Criterion::SpSsI => "sp-ss-i",
        }
    }

    /// Whether the criterion uses the semantic segment map.
    pub fn uses_segments(self) -> bool {
        !matches!(self, Criterion::SpI)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp-i" | "spi" => Ok(Criterion::SpI),
            "ss-i" | "ssi" => Ok(Criterion::SsI),
            "sp-ss-i" | "spssi" => Ok(Criterion::SpSsI),
            _ => Err(Error::Config(format!("unknown criterion {s:?}"))),
        }
    }
}

/// Bit-position weights `gamma_b` and segment weights `gamma_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceModel {
    bit_weights: Vec<f64>,
    segment_weights: Vec<f64>,
}

impl ImportanceModel {
    /// Tolerance on `sum_s gamma_s = 1`.
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    pub fn new(bit_weights: Vec<f64>, segment_weights: Vec<f64>) -> Result<Self> {
        if bit_weights.is_empty() || bit_weights.len() > 16 {
            return Err(Error::Importance(format!(
                "{} bit weights, expected 1..=16",
                bit_weights.len()
            )));
        }
        if bit_weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Importance("bit weights must be positive".into()));
        }
        if segment_weights.is_empty() {
            return Err(Error::Importance("no segment weights".into()));
        }
        if segment_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Importance("segment weights must be nonnegative".into()));
        }
        let sum: f64 = segment_weights.iter().sum();
        if (sum - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(Error::Importance(format!("segment weights sum to {sum}, expected 1")));
        }
        Ok(Self {
            bit_weights,
            segment_weights,
        })
    }

    /// `gamma_b = 4^(b-1)` with the given segment weights.
    pub fn squared_error(bit_depth: u8, segment_weights: Vec<f64>) -> Result<Self> {
        Self::new(squared_error_weights(bit_depth), segment_weights)
    }

    /// `gamma_b = 4^(b-1)` and a single segment.
    pub fn single_segment(bit_depth: u8) -> Self {
        Self::squared_error(bit_depth, vec![1.0]).expect("valid default model")
    }

    pub fn bit_weights(&self) -> &[f64] {
        &self.bit_weights
    }

    pub fn segment_weights(&self) -> &[f64] {
        &self.segment_weights
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_weights.len() as u8
    }

    /// `sum_b gamma_b`, which is `(4^B - 1) / 3` for the squared-error model.
    pub fn bit_weight_sum(&self) -> f64 {
        self.bit_weights.iter().sum()
    }
}

/// `4^(b-1)` for `b = 1..=B`.
pub fn squared_error_weights(bit_depth: u8) -> Vec<f64> {
    (0..i32::from(bit_depth)).map(|b| 4f64.powi(b)).collect()
}

/// Code rate and modulation order that turn bits into symbols.
///
/// The rate is kept as a fraction so that padding is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Framing {
    pub rate_num: u32,
    pub rate_den: u32,
    pub bits_per_symbol: u32,
}

impl Framing {
    pub fn new(rate_num: u32, rate_den: u32, bits_per_symbol: u32) -> Result<Self> {
        if rate_num == 0 || rate_den < rate_num || bits_per_symbol == 0 {
            return Err(Error::Config(format!(
                "invalid framing: rate {rate_num}/{rate_den}, {bits_per_symbol} bits/symbol"
            )));
        }
        let g = gcd(rate_num, rate_den);
        Ok(Self {
            rate_num: rate_num / g,
            rate_den: rate_den / g,
            bits_per_symbol,
        })
    }

    pub fn rate(&self) -> f64 {
        f64::from(self.rate_num) / f64::from(self.rate_den)
    }

    /// Information bits carried per modulated symbol, `R log2 M`.
    pub fn info_bits_per_symbol(&self) -> f64 {
        self.rate() * f64::from(self.bits_per_symbol)
    }

    /// Smallest information block that maps onto a whole number of symbols.
    pub fn padding_unit(&self) -> usize {
        (self.rate_num * self.bits_per_symbol / gcd(self.rate_den, self.bits_per_symbol)) as usize
    }

    pub fn padded_length(&self, bits: usize) -> usize {
        bits.div_ceil(self.padding_unit()) * self.padding_unit()
    }

    /// `L = padded_bits / (R log2 M)`.
    pub fn symbol_length(&self, bits: usize) -> usize {
        let padded = self.padded_length(bits) as u64;
        (padded * u64::from(self.rate_den) / (u64::from(self.rate_num) * u64::from(self.bits_per_symbol))) as usize
    }
}

impl Default for Framing {
    /// Rate 1/2 with 16-QAM.
    fn default() -> Self {
        Self {
            rate_num: 1,
            rate_den: 2,
            bits_per_symbol: 4,
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamId {
    Plane { plane: u8 },
    Segment { segment: u32 },
    PlaneSegment { plane: u8, segment: u32 },
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamId::Plane { plane } => write!(f, "b{plane}"),
            StreamId::Segment { segment } => write!(f, "s{segment}"),
            StreamId::PlaneSegment { plane, segment } => write!(f, "b{plane}s{segment}"),
        }
    }
}

/// Ordered bit addresses of a stream: every listed pixel contributes each
/// listed plane, pixel-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub pixels: Vec<u32>,
    pub planes: Vec<u8>,
}

impl Extraction {
    pub fn len(&self) -> usize {
        self.pixels.len() * self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(row, col, plane)` triples in stream order.
    pub fn addresses(&self, width: usize) -> impl Iterator<Item = (usize, usize, u8)> + '_ {
        self.pixels.iter().flat_map(move |&p| {
            let p = p as usize;
            self.planes.iter().map(move |&b| (p / width, p % width, b))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubStream {
    pub id: StreamId,
    /// Importance weight `omega_k`.
    pub weight: f64,
    pub bit_length: usize,
    /// Bit length after zero padding to whole symbols.
    pub padded_length: usize,
    /// `L_k`.
    pub symbol_length: usize,
    pub extraction: Extraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub criterion: Criterion,
    pub streams: Vec<SubStream>,
    pub height: usize,
    pub width: usize,
    pub bit_depth: u8,
    pub importance: ImportanceModel,
    pub framing: Framing,
}

fn check_depth(pixels: &PixelMatrix, model: &ImportanceModel) -> Result<()> {
    if pixels.bit_depth() != model.bit_depth() {
        return Err(Error::Importance(format!(
            "{} bit weights for a {}-bit image",
            model.bit_depth(),
            pixels.bit_depth()
        )));
    }
    Ok(())
}

fn check_segments(segmap: &SegmentMap, model: &ImportanceModel) -> Result<()> {
    if segmap.segment_count() != model.segment_weights().len() {
        return Err(Error::Importance(format!(
            "{} segment weights for {} segments",
            model.segment_weights().len(),
            segmap.segment_count()
        )));
    }
    Ok(())
}

fn make_stream(id: StreamId, weight: f64, extraction: Extraction, framing: &Framing) -> SubStream {
    let bit_length = extraction.len();
    SubStream {
        id,
        weight,
        bit_length,
        padded_length: framing.padded_length(bit_length),
        symbol_length: framing.symbol_length(bit_length),
        extraction,
    }
}

/// One stream per bit position, `omega_b = gamma_b`.
pub fn sp_i_partition(pixels: &PixelMatrix, model: &ImportanceModel, framing: Framing) -> Result<PartitionPlan> {
    check_depth(pixels, model)?;
    let all: Vec<u32> = (0..pixels.pixel_count() as u32).collect();
    let streams = (1..=pixels.bit_depth())
        .map(|b| {
            make_stream(
                StreamId::Plane { plane: b },
                model.bit_weights()[usize::from(b) - 1],
                Extraction {
                    pixels: all.clone(),
                    planes: vec![b],
                },
                &framing,
            )
        })
        .collect();
    Ok(PartitionPlan {
        criterion: Criterion::SpI,
        streams,
        height: pixels.height(),
        width: pixels.width(),
        bit_depth: pixels.bit_depth(),
        importance: model.clone(),
        framing,
    })
}

/// One stream per segment, `omega_s = gamma_s * sum_b gamma_b`.
pub fn ss_i_partition(
    pixels: &PixelMatrix,
    segmap: &SegmentMap,
    model: &ImportanceModel,
    framing: Framing,
) -> Result<PartitionPlan> {
    check_depth(pixels, model)?;
    segmap.check_dims(pixels.dims())?;
    check_segments(segmap, model)?;
    let planes: Vec<u8> = (1..=pixels.bit_depth()).collect();
    let scale = model.bit_weight_sum();
    let streams = segmap
        .segment_pixels()
        .into_iter()
        .enumerate()
        .map(|(s, px)| {
            make_stream(
                StreamId::Segment { segment: s as u32 },
                model.segment_weights()[s] * scale,
                Extraction {
                    pixels: px,
                    planes: planes.clone(),
                },
                &framing,
            )
        })
        .collect();
    Ok(PartitionPlan {
        criterion: Criterion::SsI,
        streams,
        height: pixels.height(),
        width: pixels.width(),
        bit_depth: pixels.bit_depth(),
        importance: model.clone(),
        framing,
    })
}

/// One stream per (segment, plane) pair, `omega_{b,s} = gamma_b gamma_s`.
pub fn sp_ss_i_partition(
    pixels: &PixelMatrix,
    segmap: &SegmentMap,
    model: &ImportanceModel,
    framing: Framing,
) -> Result<PartitionPlan> {
    check_depth(pixels, model)?;
    segmap.check_dims(pixels.dims())?;
    check_segments(segmap, model)?;
    let mut streams = Vec::with_capacity(segmap.segment_count() * usize::from(pixels.bit_depth()));
    for (s, px) in segmap.segment_pixels().into_iter().enumerate() {
        for b in 1..=pixels.bit_depth() {
            streams.push(make_stream(
                StreamId::PlaneSegment {
                    plane: b,
                    segment: s as u32,
                },
                model.bit_weights()[usize::from(b) - 1] * model.segment_weights()[s],
                Extraction {
                    pixels: px.clone(),
                    planes: vec![b],
                },
                &framing,
            ));
        }
    }
    Ok(PartitionPlan {
        criterion: Criterion::SpSsI,
        streams,
        height: pixels.height(),
        width: pixels.width(),
        bit_depth: pixels.bit_depth(),
        importance: model.clone(),
        framing,
    })
}

/// Builds the plan for `criterion`. SP-I ignores the segment map.
pub fn partition(
    criterion: Criterion,
    pixels: &PixelMatrix,
    segmap: &SegmentMap,
    model: &ImportanceModel,
    framing: Framing,
) -> Result<PartitionPlan> {
    match criterion {
        Criterion::SpI => sp_i_partition(pixels, model, framing),
        Criterion::SsI => ss_i_partition(pixels, segmap, model, framing),
        Criterion::SpSsI => sp_ss_i_partition(pixels, segmap, model, framing),
    }
}

/// How bits of untransmitted streams are filled at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    /// All missing bits are zero.
    #[default]
    Zeros,
    /// Missing bits take the corresponding bit of this pixel value.
    Constant(u16),
}

impl FillPolicy {
    fn bit(self, plane: u8) -> u16 {
        match self {
            FillPolicy::Zeros => 0,
            FillPolicy::Constant(v) => (v >> (plane - 1)) & 1,
        }
    }
}

impl PartitionPlan {
    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.streams.iter().map(|s| s.weight).collect()
    }

    pub fn symbol_lengths(&self) -> Vec<usize> {
        self.streams.iter().map(|s| s.symbol_length).collect()
    }

    pub fn total_symbols(&self) -> usize {
        self.streams.iter().map(|s| s.symbol_length).sum()
    }

    fn check_source(&self, pixels: &PixelMatrix, channel: usize) -> Result<()> {
        if pixels.dims() != (self.height, self.width) {
            return Err(Error::DimensionMismatch {
                expected: (self.height, self.width),
                found: pixels.dims(),
            });
        }
        if pixels.bit_depth() != self.bit_depth || channel >= pixels.channels() {
            return Err(Error::UnsupportedImage(format!(
                "plan expects {} bits per sample, image has {} bits and {} channels",
                self.bit_depth,
                pixels.bit_depth(),
                pixels.channels()
            )));
        }
        Ok(())
    }

    /// The bits of every stream of one channel, in plan order, unpadded.
    pub fn extract_bits(&self, pixels: &PixelMatrix, channel: usize) -> Result<Vec<Vec<u8>>> {
        self.check_source(pixels, channel)?;
        Ok(self
            .streams
            .iter()
            .map(|s| {
                let mut bits = Vec::with_capacity(s.bit_length);
                for &p in &s.extraction.pixels {
                    let v = pixels.get_linear(p as usize, channel);
                    bits.extend(s.extraction.planes.iter().map(|&b| ((v >> (b - 1)) & 1) as u8));
                }
                bits
            })
            .collect())
    }

    /// Rebuilds one channel from received streams. `None` marks a stream
    /// that was not transmitted; its bits are filled per `fill`.
    pub fn reassemble(&self, received: &[Option<Vec<u8>>], fill: FillPolicy) -> Result<PixelMatrix> {
        if received.len() != self.streams.len() {
            return Err(Error::LengthMismatch {
                stream: received.len(),
                expected: self.streams.len(),
                found: received.len(),
            });
        }
        let mut data = vec![0u16; self.height * self.width];
        for (k, (stream, rx)) in self.streams.iter().zip(received).enumerate() {
            let ex = &stream.extraction;
            match rx {
                Some(bits) => {
                    if bits.len() != stream.bit_length {
                        return Err(Error::LengthMismatch {
                            stream: k,
                            expected: stream.bit_length,
                            found: bits.len(),
                        });
                    }
                    let mut it = bits.iter();
                    for &p in &ex.pixels {
                        for &b in &ex.planes {
                            let bit = u16::from(*it.next().expect("length checked") & 1);
                            data[p as usize] |= bit << (b - 1);
                        }
                    }
                }
                None => {
                    for &p in &ex.pixels {
                        for &b in &ex.planes {
                            data[p as usize] |= fill.bit(b) << (b - 1);
                        }
                    }
                }
            }
        }
        PixelMatrix::new(self.height, self.width, 1, self.bit_depth, data)
    }

    pub fn manifest(&self) -> PlanManifest {
        PlanManifest {
            criterion: self.criterion,
            height: self.height,
            width: self.width,
            bit_depth: self.bit_depth,
            code_rate: format!("{}/{}", self.framing.rate_num, self.framing.rate_den),
            bits_per_symbol: self.framing.bits_per_symbol,
            bit_weights: self.importance.bit_weights().to_vec(),
            segment_weights: self.importance.segment_weights().to_vec(),
            gini: gini(&self.weights()).ok(),
            streams: self
                .streams
                .iter()
                .enumerate()
                .map(|(index, s)| StreamManifest {
                    index,
                    id: s.id.to_string(),
                    weight: s.weight,
                    bit_length: s.bit_length,
                    padded_length: s.padded_length,
                    symbol_length: s.symbol_length,
                })
                .collect(),
        }
    }
}

/// Audit record of a plan, without the per-bit addresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanManifest {
    pub criterion: Criterion,
    pub height: usize,
    pub width: usize,
    pub bit_depth: u8,
    pub code_rate: String,
    pub bits_per_symbol: u32,
    pub bit_weights: Vec<f64>,
    pub segment_weights: Vec<f64>,
    pub gini: Option<f64>,
    pub streams: Vec<StreamManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    pub index: usize,
    pub id: String,
    pub weight: f64,
    pub bit_length: usize,
    pub padded_length: usize,
    pub symbol_length: usize,
}

/// Gini coefficient `sum_i sum_j |w_i - w_j| / (2 K sum_k w_k)`.
pub fn gini(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Importance("gini of an empty weight list".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Importance("gini needs nonnegative weights".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Importance("gini of all-zero weights".into()));
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    // sum_{i,j} |w_i - w_j| = 2 sum_i (2i - K + 1) w_(i) over ascending order.
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, w)| (2.0 * i as f64 - k + 1.0) * w)
        .sum::<f64>()
        * 2.0;
    Ok(pair_sum / (2.0 * k * total))
}
