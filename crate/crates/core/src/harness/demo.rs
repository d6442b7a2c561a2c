//! Reconstructed-image grids: one PNG per (criterion, allocator, SNR).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::Workload;
use crate::allocator::Allocator;
use crate::error::Result;
use crate::partitioner::Criterion;
use crate::pixel_source::save_image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEntry {
    pub file: String,
    pub criterion: Criterion,
    pub allocator: Allocator,
    pub snr_db: f64,
    /// Bits that differ from the original.
    pub bit_errors: u64,
    pub zero_power_streams: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoManifest {
    pub original: String,
    /// Ordered by criterion, then allocator, then SNR.
    pub entries: Vec<DemoEntry>,
}

fn snr_tag(snr_db: f64) -> String {
    format!("{snr_db}").replace('-', "m").replace('.', "p")
}

/// Transmits the source once per (criterion, allocator, SNR) using the
/// channel of trial 0 and writes the reconstructions into `dir`, together
/// with `original.png` and `manifest.json`.
pub fn reconstruct_demo(config: &ExperimentConfig, dir: &Path) -> Result<DemoManifest> {
    let work = Workload::new(config)?;
    fs::create_dir_all(dir)?;
    save_image(&work.pixels, dir.join("original.png"))?;
    let mut entries = Vec::new();
    for (case, cc) in work.cases.iter().enumerate() {
        let channels = work.channels(case, 0);
        for &allocator in &config.experiment.allocators {
            for (si, &snr_db) in work.snrs.iter().enumerate() {
                let (_, allocs, recon) = work.transmit(case, si, 0, &channels, allocator)?;
                let file = format!("{}_{}_{}dB.png", cc.criterion, allocator, snr_tag(snr_db));
                save_image(&recon, dir.join(&file))?;
                let bit_errors = work
                    .pixels
                    .data()
                    .iter()
                    .zip(recon.data())
                    .map(|(a, b)| u64::from((a ^ b).count_ones()))
                    .sum();
                entries.push(DemoEntry {
                    file,
                    criterion: cc.criterion,
                    allocator,
                    snr_db,
                    bit_errors,
                    zero_power_streams: allocs.iter().flat_map(|a| &a.powers).filter(|&&p| p == 0.0).count(),
                });
            }
        }
    }
    let manifest = DemoManifest {
        original: "original.png".into(),
        entries,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
