//! Experiment configuration (TOML).
//!
//! Every key has a default, so an empty file is a valid configuration for
//! the desk-scale synthetic-scene experiment. Relative paths are resolved
//! against the directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocator::{Allocator, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::partitioner::{Criterion, FillPolicy, ImportanceModel};
use crate::phy::{Backend, BerModelParams, CodeSpec, PhyConfig};
use crate::scene::SCENE_SEGMENT_WEIGHTS;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub importance: ImportanceConfig,
    pub phy: PhySection,
    pub channel: ChannelConfig,
    pub experiment: RunConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// 8-bit PNG; the synthetic scene is used when absent.
    pub image: Option<PathBuf>,
    /// Label raster or CSV; required with `image` unless only SP-I runs.
    pub segment_map: Option<PathBuf>,
    /// `[width, height]` of the working image. Loaded images are resampled
    /// to this size; the synthetic scene is rendered at it.
    pub size: Option<[usize; 2]>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            image: None,
            segment_map: None,
            size: Some([160, 128]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    /// One weight per segment in ascending label order, summing to 1.
    pub segment_weights: Vec<f64>,
    /// Per-plane weights from least to most significant; `4^(b-1)` when absent.
    pub bit_weights: Option<Vec<f64>>,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            segment_weights: SCENE_SEGMENT_WEIGHTS.to_vec(),
            bit_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhySection {
    pub modulation_order: u32,
    pub constraint_length: u8,
    /// Octal generator polynomials.
    pub generators: Vec<String>,
    /// Optional puncturing rows, one per generator, e.g. `["11", "10"]`.
    pub puncture: Option<Vec<String>>,
    pub interleave: bool,
    pub backend: Backend,
    /// BER model; the published fit for the modulation and rate is used
    /// when both are absent.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Default for PhySection {
    fn default() -> Self {
        Self {
            modulation_order: 16,
            constraint_length: 3,
            generators: vec!["6".into(), "7".into()],
            puncture: None,
            interleave: true,
            backend: Backend::Analytic,
            alpha: None,
            beta: None,
        }
    }
}

impl PhySection {
    pub fn to_phy(&self) -> Result<PhyConfig> {
        let code = CodeSpec::from_octal(self.constraint_length, &self.generators, self.puncture.as_deref())?;
        let (num, den) = code.rate();
        let ber = match (self.alpha, self.beta) {
            (Some(a), Some(b)) => BerModelParams::new(a, b)?,
            (None, None) => BerModelParams::published(self.modulation_order, num, den).ok_or_else(|| {
                Error::Config(format!(
                    "no published BER fit for M={} at rate {num}/{den}; set phy.alpha and phy.beta",
                    self.modulation_order
                ))
            })?,
            _ => return Err(Error::Config("set both phy.alpha and phy.beta or neither".into())),
        };
        let phy = PhyConfig {
            modulation_order: self.modulation_order,
            code,
            interleave: self.interleave,
            backend: self.backend,
            ber,
        };
        phy.framing()?;
        Ok(phy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// Unit gain on every stream.
    Awgn,
    #[default]
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub channel_variance: f64,
    pub noise_variance: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Rayleigh,
            channel_variance: 1.0,
            noise_variance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub criteria: Vec<Criterion>,
    pub allocators: Vec<Allocator>,
    /// Average per-symbol SNR under equal allocation,
    /// `P * channel_variance / (noise_variance * sum L)`, in dB.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Pixel value whose bits replace untransmitted streams; 0 means black.
    pub fill: u16,
    /// SNR at which per-trial gains are recorded; added to the grid if
    /// missing. `None` disables the gain tables.
    pub gain_snr_db: Option<f64>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            criteria: Criterion::ALL.to_vec(),
            allocators: Allocator::ALL.to_vec(),
            snr_db: (0..=10).map(|i| f64::from(i * 2)).collect(),
            trials: 100,
            seed: 2024,
            tolerance: DEFAULT_TOLERANCE,
            fill: 0,
            gain_snr_db: Some(16.0),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn fill_policy(&self) -> FillPolicy {
        if self.fill == 0 {
            FillPolicy::Zeros
        } else {
            FillPolicy::Constant(self.fill)
        }
    }

    /// The SNR grid plus the gain SNR if it is not already on it.
    pub fn evaluated_snrs(&self) -> Vec<f64> {
        let mut grid = self.snr_db.clone();
        if let Some(g) = self.gain_snr_db {
            if !grid.iter().any(|&s| (s - g).abs() < 1e-9) {
                grid.push(g);
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a file and resolves its relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.source.image.as_mut().map(fix);
        self.source.segment_map.as_mut().map(fix);
        fix(&mut self.output.directory);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    /// Applies `section.key=value` overrides; values are parsed as TOML and
    /// fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
            let value = parse_value(raw.trim());
            let parts: Vec<&str> = key.trim().split('.').collect();
            let (last, sections) = parts.split_last().expect("split yields one part");
            let mut table = &mut doc;
            for s in sections {
                table = table
                    .entry(s.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("{s} in {key} is not a section")))?;
            }
            table.insert(last.to_string(), value);
        }
        let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn importance_model(&self, bit_depth: u8) -> Result<ImportanceModel> {
        let bits = match &self.importance.bit_weights {
            Some(w) => w.clone(),
            None => crate::partitioner::squared_error_weights(bit_depth),
        };
        if bits.len() != usize::from(bit_depth) {
            return Err(Error::Config(format!(
                "{} bit weights for {bit_depth}-bit pixels",
                bits.len()
            )));
        }
        ImportanceModel::new(bits, self.importance.segment_weights.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.experiment;
        if run.trials == 0 {
            return Err(Error::Config("experiment.trials must be at least 1".into()));
        }
        if run.snr_db.is_empty() {
            return Err(Error::Config("experiment.snr_db is empty".into()));
        }
        if run.snr_db.iter().chain(&run.gain_snr_db).any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if run.criteria.is_empty() || run.allocators.is_empty() {
            return Err(Error::Config("need at least one criterion and one allocator".into()));
        }
        if !(run.tolerance > 0.0 && run.tolerance < 1.0) {
            return Err(Error::Config("experiment.tolerance must lie in (0, 1)".into()));
        }
        if run.gain_snr_db.is_some()
            && !(run.allocators.contains(&Allocator::Proposed) && run.allocators.contains(&Allocator::Ma))
        {
            return Err(Error::Config(
                "gain tables need both the proposed and the ma allocator".into(),
            ));
        }
        let ch = &self.channel;
        if !(ch.channel_variance > 0.0 && ch.noise_variance > 0.0) {
            return Err(Error::Config("channel and noise variances must be positive".into()));
        }
        if let Some([w, h]) = self.source.size {
            if w == 0 || h == 0 {
                return Err(Error::Config("source.size must be nonzero".into()));
            }
        }
        if self.source.image.is_some()
            && self.source.segment_map.is_none()
            && run.criteria.iter().any(|c| c.uses_segments())
        {
            return Err(Error::Config(
                "source.segment_map is required for segment-based criteria".into(),
            ));
        }
        self.phy.to_phy()?;
        ImportanceModel::new(vec![1.0], self.importance.segment_weights.clone())?;
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.phy.to_phy().unwrap(), PhyConfig::default());
        assert_eq!(cfg.experiment.trials, 100);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn parses_sections() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [experiment]
            criteria = ["sp-ss-i"]
            allocators = ["proposed", "ma"]
            snr_db = [6.0, 16.0]
            trials = 3
            [channel]
            model = "awgn"
            [phy]
            backend = "full-chain"
            puncture = ["11", "10"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.experiment.criteria, vec![Criterion::SpSsI]);
        assert_eq!(cfg.channel.model, ChannelModel::Awgn);
        let phy = cfg.phy.to_phy().unwrap();
        assert_eq!(phy.backend, Backend::FullChain);
        assert_eq!(phy.code.rate(), (2, 3));
        assert_eq!(phy.ber, BerModelParams::published(16, 2, 3).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[experiment]\ntrails = 3").is_err());
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[
                "experiment.trials=7".into(),
                "experiment.snr_db=[1.0, 2.0]".into(),
                "channel.model=awgn".into(),
                "output.directory=/tmp/x".into(),
            ])
            .unwrap();
        assert_eq!(cfg.experiment.trials, 7);
        assert_eq!(cfg.experiment.snr_db, vec![1.0, 2.0]);
        assert_eq!(cfg.channel.model, ChannelModel::Awgn);
        assert_eq!(cfg.output.directory, PathBuf::from("/tmp/x"));
        assert!(ExperimentConfig::default().with_overrides(&["nokey".into()]).is_err());
    }

    #[test]
    fn validation_failures() {
        let bad = |o: &str| {
            ExperimentConfig::default()
                .with_overrides(&[o.into()])
                .and_then(|c| c.validate())
                .is_err()
        };
        assert!(bad("experiment.trials=0"));
        assert!(bad("experiment.snr_db=[]"));
        assert!(bad("importance.segment_weights=[0.5, 0.2]"));
        assert!(bad("phy.modulation_order=64"));
        assert!(bad("phy.alpha=0.5"));
        assert!(bad("experiment.allocators=[\"equal\"]"));
        assert!(bad("source.image=\"x.png\""));
    }

    #[test]
    fn gain_snr_is_added_to_grid() {
        let mut run = RunConfig {
            snr_db: vec![0.0, 10.0],
            ..RunConfig::default()
        };
        assert_eq!(run.evaluated_snrs(), vec![0.0, 10.0, 16.0]);
        run.gain_snr_db = Some(10.0);
        assert_eq!(run.evaluated_snrs(), vec![0.0, 10.0]);
    }
}
