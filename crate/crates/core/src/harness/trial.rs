//! One Monte Carlo trial: draw channels, allocate, transmit, reconstruct
//! and score, for every criterion, SNR point and allocator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ChannelModel, ExperimentConfig};
use super::seed;
use crate::allocator::{gain_db, predicted_imse, AllocationInput, Allocator, PowerAllocation, StreamParams};
use crate::error::{Error, Result};
use crate::metrics::{imse_report, signal_power, ImseReport};
use crate::partitioner::{partition, Criterion, ImportanceModel, PartitionPlan};
use crate::phy::{db_to_linear, sample_rayleigh_with, transmit_substream, ChannelRealization, PhyConfig};
use crate::pixel_source::{load_image, load_segment_map, resize_image, PixelMatrix, SegmentMap};
use crate::scene::synthetic_scene;

/// Everything a criterion needs that does not change between trials.
#[derive(Debug, Clone)]
pub struct CriterionCase {
    pub criterion: Criterion,
    pub plan: PartitionPlan,
    /// Model and map used for scoring; SP-I scores the image as one segment.
    pub metric_model: ImportanceModel,
    pub metric_segmap: SegmentMap,
    /// Payload bits indexed `[colour channel][stream]`.
    pub bits: Vec<Vec<Vec<u8>>>,
}

/// A validated configuration with its source loaded and partitioned.
#[derive(Debug, Clone)]
pub struct Workload {
    pub config: ExperimentConfig,
    pub pixels: PixelMatrix,
    pub segmap: SegmentMap,
    pub phy: PhyConfig,
    pub cases: Vec<CriterionCase>,
    pub snrs: Vec<f64>,
    pub signal_power: f64,
}

/// Loads the configured image and segment map, or renders the synthetic
/// scene, at the configured size.
pub fn load_source(config: &ExperimentConfig) -> Result<(PixelMatrix, SegmentMap)> {
    let size = config.source.size;
    match &config.source.image {
        None => {
            let [w, h] = size.unwrap_or([160, 128]);
            let scene = synthetic_scene(w, h);
            Ok((scene.pixels, scene.segmap))
        }
        Some(path) => {
            let mut pixels = load_image(path)?;
            let mut segmap = match &config.source.segment_map {
                Some(p) => load_segment_map(p, pixels.dims())?,
                None => SegmentMap::uniform(pixels.height(), pixels.width()),
            };
            if let Some([w, h]) = size {
                pixels = resize_image(&pixels, w, h)?;
                segmap = segmap.resized(w, h)?;
            }
            Ok((pixels, segmap))
        }
    }
}

impl Workload {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (pixels, segmap) = load_source(config)?;
        Self::from_source(config, pixels, segmap)
    }

    pub fn from_source(config: &ExperimentConfig, pixels: PixelMatrix, segmap: SegmentMap) -> Result<Self> {
        config.validate()?;
        let phy = config.phy.to_phy()?;
        let framing = phy.framing()?;
        let depth = pixels.bit_depth();
        let uniform = SegmentMap::uniform(pixels.height(), pixels.width());
        let single = ImportanceModel::new(config.importance_model(depth)?.bit_weights().to_vec(), vec![1.0])?;
        let mut cases = Vec::with_capacity(config.experiment.criteria.len());
        for &criterion in &config.experiment.criteria {
            let (model, map) = if criterion.uses_segments() {
                (config.importance_model(depth)?, segmap.clone())
            } else {
                (single.clone(), uniform.clone())
            };
            let plan = partition(criterion, &pixels, &map, &model, framing)?;
            let bits = (0..pixels.channels())
                .map(|c| plan.extract_bits(&pixels, c))
                .collect::<Result<_>>()?;
            cases.push(CriterionCase {
                criterion,
                plan,
                metric_model: model,
                metric_segmap: map,
                bits,
            });
        }
        let power = signal_power(&pixels);
        if power == 0.0 {
            return Err(Error::Config("source image is all zero".into()));
        }
        Ok(Self {
            snrs: config.experiment.evaluated_snrs(),
            config: config.clone(),
            pixels,
            segmap,
            phy,
            cases,
            signal_power: power,
        })
    }

    /// `P = snr * noise_variance * sum L / channel_variance`, per colour channel.
    pub fn budget(&self, case: usize, snr_db: f64) -> f64 {
        let ch = &self.config.channel;
        db_to_linear(snr_db) * ch.noise_variance * self.cases[case].plan.total_symbols() as f64 / ch.channel_variance
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::mix(self.config.experiment.seed, trial as u64)
    }

    /// Fading of every colour channel of one criterion in one trial.
    pub fn channels(&self, case: usize, trial: usize) -> Vec<ChannelRealization> {
        let ch = &self.config.channel;
        let k = self.cases[case].plan.len();
        (0..self.pixels.channels())
            .map(|c| match ch.model {
                ChannelModel::Awgn => ChannelRealization::awgn(k, ch.noise_variance),
                ChannelModel::Rayleigh => {
                    let s = seed::derive(self.trial_seed(trial), &[seed::CHANNEL, case as u64, c as u64]);
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    sample_rayleigh_with(ch.channel_variance, k, ch.noise_variance, &mut rng)
                }
            })
            .collect()
    }

    pub fn allocation_input(&self, case: usize, channel: &ChannelRealization) -> Result<AllocationInput> {
        let plan = &self.cases[case].plan;
        AllocationInput::new(
            plan.streams
                .iter()
                .zip(channel.gain_sq())
                .map(|(s, g)| StreamParams {
                    weight: s.weight,
                    symbol_length: s.symbol_length,
                    gain_sq: g,
                })
                .collect(),
            channel.noise_variance,
            self.phy.ber,
        )
    }

    /// Allocates with `allocator`, sends every stream and rebuilds the
    /// image. Streams with zero power are not sent.
    pub fn transmit(
        &self,
        case: usize,
        snr_index: usize,
        trial: usize,
        channels: &[ChannelRealization],
        allocator: Allocator,
    ) -> Result<(Vec<AllocationInput>, Vec<PowerAllocation>, PixelMatrix)> {
        let cc = &self.cases[case];
        let budget = self.budget(case, self.snrs[snr_index]);
        let fill = self.config.experiment.fill_policy();
        let trial_seed = self.trial_seed(trial);
        let mut inputs = Vec::with_capacity(channels.len());
        let mut allocs = Vec::with_capacity(channels.len());
        let mut planes = Vec::with_capacity(channels.len());
        for (c, channel) in channels.iter().enumerate() {
            let input = self.allocation_input(case, channel)?;
            let alloc = allocator.allocate(&input, budget)?;
            let received = cc.bits[c]
                .iter()
                .enumerate()
                .map(|(k, bits)| {
                    let p = alloc.powers[k];
                    if p <= 0.0 {
                        return Ok(None);
                    }
                    let noise_seed = seed::derive(
                        trial_seed,
                        &[seed::NOISE, case as u64, snr_index as u64, c as u64, k as u64],
                    );
                    let il_seed = seed::derive(
                        self.config.experiment.seed,
                        &[seed::INTERLEAVER, case as u64, c as u64, k as u64],
                    );
                    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
                    transmit_substream(
                        bits,
                        p,
                        channel.gains[k],
                        channel.noise_variance,
                        &self.phy,
                        il_seed,
                        &mut rng,
                    )
                    .map(Some)
                })
                .collect::<Result<Vec<_>>>()?;
            planes.push(cc.plan.reassemble(&received, fill)?);
            inputs.push(input);
            allocs.push(alloc);
        }
        Ok((inputs, allocs, PixelMatrix::from_channels(&planes)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocatorOutcome {
    pub allocator: Allocator,
    /// Per-symbol powers indexed `[colour channel][stream]`.
    pub powers: Vec<Vec<f64>>,
    /// Largest `sum L p / P` over colour channels.
    pub budget_ratio: f64,
    pub zero_power_streams: usize,
    /// Model IMSE averaged over colour channels.
    pub predicted_imse: f64,
    pub predicted_norm_imse_db: f64,
    pub report: ImseReport,
    /// Measured gain of the proposed allocator over this one.
    pub gain_db: Option<f64>,
    /// Model gain of the proposed allocator over this one.
    pub predicted_gain_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub criterion: Criterion,
    pub snr_db: f64,
    /// Budget per colour channel.
    pub budget: f64,
    pub mean_gain_sq: f64,
    pub outcomes: Vec<AllocatorOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub points: Vec<PointReport>,
}

impl TrialReport {
    pub fn outcome(&self, criterion: Criterion, snr_db: f64, allocator: Allocator) -> Option<&AllocatorOutcome> {
        self.points
            .iter()
            .find(|p| p.criterion == criterion && (p.snr_db - snr_db).abs() < 1e-9)?
            .outcomes
            .iter()
            .find(|o| o.allocator == allocator)
    }
}

/// Gain in dB with the conventions used in the tables: two perfect
/// reconstructions give 0 and a perfect proposed one gives `+inf`.
pub fn measured_gain_db(imse_proposed: f64, imse_baseline: f64) -> f64 {
    match (imse_proposed == 0.0, imse_baseline == 0.0) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => gain_db(imse_proposed, imse_baseline).expect("positive values"),
    }
}

/// Runs trial `trial`; a pure function of the workload and the index.
pub fn run_trial(work: &Workload, trial: usize) -> Result<TrialReport> {
    run_trial_inner(work, trial).map_err(|e| Error::Trial {
        trial,
        source: Box::new(e),
    })
}

fn run_trial_inner(work: &Workload, trial: usize) -> Result<TrialReport> {
    let tol = work.config.experiment.tolerance;
    let mut points = Vec::new();
    for (case, cc) in work.cases.iter().enumerate() {
        let channels = work.channels(case, trial);
        let mean_gain_sq =
            channels.iter().flat_map(|c| c.gain_sq()).sum::<f64>() / (channels.len() * cc.plan.len()) as f64;
        for (si, &snr_db) in work.snrs.iter().enumerate() {
            let budget = work.budget(case, snr_db);
            let mut outcomes = Vec::with_capacity(work.config.experiment.allocators.len());
            for &allocator in &work.config.experiment.allocators {
                let (inputs, allocs, recon) = work.transmit(case, si, trial, &channels, allocator)?;
                let mut predicted = 0.0;
                let mut ratio: f64 = 0.0;
                for (input, alloc) in inputs.iter().zip(&allocs) {
                    predicted += predicted_imse(input, &alloc.powers)? / inputs.len() as f64;
                    ratio = ratio.max(alloc.total_power_used / budget);
                }
                if ratio > 1.0 + tol {
                    return Err(Error::Allocation(format!(
                        "{allocator} spent {ratio} of the budget at {snr_db} dB"
                    )));
                }
                let report = imse_report(&work.pixels, &recon, &cc.metric_model, &cc.metric_segmap)?;
                outcomes.push(AllocatorOutcome {
                    allocator,
                    zero_power_streams: allocs.iter().flat_map(|a| &a.powers).filter(|&&p| p == 0.0).count(),
                    powers: allocs.into_iter().map(|a| a.powers).collect(),
                    budget_ratio: ratio,
                    predicted_norm_imse_db: 10.0 * (predicted / work.signal_power).log10(),
                    predicted_imse: predicted,
                    report,
                    gain_db: None,
                    predicted_gain_db: None,
                });
            }
            if let Some(prop) = outcomes.iter().find(|o| o.allocator == Allocator::Proposed).cloned() {
                for o in &mut outcomes {
                    o.gain_db = Some(measured_gain_db(prop.report.imse, o.report.imse));
                    o.predicted_gain_db = Some(measured_gain_db(prop.predicted_imse, o.predicted_imse));
                }
            }
            points.push(PointReport {
                criterion: cc.criterion,
                snr_db,
                budget,
                mean_gain_sq,
                outcomes,
            });
        }
    }
    Ok(TrialReport {
        trial,
        seed: work.trial_seed(trial),
        points,
    })
}
