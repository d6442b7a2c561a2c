//! Monte Carlo driver and the CSV tables it writes.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::{run_trial, TrialReport, Workload};
use crate::allocator::Allocator;
use crate::error::{Error, Result};
use crate::partitioner::Criterion;

/// One row of `curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub snr_db: f64,
    pub criterion: Criterion,
    pub allocator: Allocator,
    /// `10 log10` of the trial-mean IMSE over `||I||^2 / I`.
    pub mean_norm_imse_db: f64,
    /// Half-width of the 95% interval of the mean, in dB.
    pub ci95: f64,
}

/// One row of `gains.csv` or `gains_predicted.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub trial: usize,
    pub criterion: Criterion,
    pub gain_db: f64,
}

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub criterion: Criterion,
    pub allocator: Allocator,
    pub budget: f64,
    pub budget_ratio: f64,
    pub mean_gain_sq: f64,
    pub zero_power_streams: usize,
    pub predicted_imse: f64,
    pub predicted_norm_imse_db: f64,
    pub imse: f64,
    pub norm_imse_db: f64,
    pub mse: f64,
    pub multi_bit_error_rate: f64,
    pub gain_db: Option<f64>,
    pub predicted_gain_db: Option<f64>,
    /// Powers per stream, `;`-separated, colour channels split by `|`.
    pub powers: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub curves: Vec<CurveRow>,
    pub gains: Vec<GainRow>,
    pub gains_predicted: Vec<GainRow>,
    pub trials: Vec<TrialReport>,
}

/// Runs every trial (in parallel, reduced in trial order) and aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let work = Workload::new(config)?;
    run_workload(&work)
}

pub fn run_workload(work: &Workload) -> Result<ExperimentSummary> {
    let n = work.config.experiment.trials;
    let run = || {
        (0..n)
            .into_par_iter()
            .map(|t| run_trial(work, t))
            .collect::<Result<Vec<_>>>()
    };
    let trials = match work.config.experiment.threads {
        0 => run()?,
        t => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {t} worker threads: {e}")))?
            .install(run)?,
    };
    log::info!("{n} trials finished");
    Ok(summarize(work, trials))
}

fn summarize(work: &Workload, trials: Vec<TrialReport>) -> ExperimentSummary {
    let run = &work.config.experiment;
    let mut snrs = work.snrs.clone();
    snrs.sort_by(f64::total_cmp);
    let mut curves = Vec::new();
    for &criterion in &run.criteria {
        for &snr in &snrs {
            for &allocator in &run.allocators {
                let imse: Vec<f64> = trials
                    .iter()
                    .filter_map(|t| t.outcome(criterion, snr, allocator))
                    .map(|o| o.report.imse)
                    .collect();
                let (mean_db, ci) = mean_db_with_ci(&imse, work.signal_power);
                curves.push(CurveRow {
                    snr_db: snr,
                    criterion,
                    allocator,
                    mean_norm_imse_db: mean_db,
                    ci95: ci,
                });
            }
        }
    }
    let mut gains = Vec::new();
    let mut gains_predicted = Vec::new();
    if let Some(g) = run.gain_snr_db {
        for t in &trials {
            for &criterion in &run.criteria {
                if let Some(ma) = t.outcome(criterion, g, Allocator::Ma) {
                    gains.push(GainRow {
                        trial: t.trial,
                        criterion,
                        gain_db: ma.gain_db.unwrap_or(f64::NAN),
                    });
                    gains_predicted.push(GainRow {
                        trial: t.trial,
                        criterion,
                        gain_db: ma.predicted_gain_db.unwrap_or(f64::NAN),
                    });
                }
            }
        }
    }
    ExperimentSummary {
        curves,
        gains,
        gains_predicted,
        trials,
    }
}

/// Mean of linear values expressed in dB relative to `reference`, with the
/// 95% normal interval half-width mapped to dB around the mean.
pub fn mean_db_with_ci(values: &[f64], reference: f64) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let mean_db = 10.0 * (mean / reference).log10();
    if values.len() < 2 || mean == 0.0 {
        return (mean_db, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean_db, 10.0 / std::f64::consts::LN_10 * half / mean)
}

pub fn trial_rows(trials: &[TrialReport]) -> Vec<TrialRow> {
    let mut rows = Vec::new();
    for t in trials {
        for p in &t.points {
            for o in &p.outcomes {
                rows.push(TrialRow {
                    trial: t.trial,
                    seed: t.seed,
                    snr_db: p.snr_db,
                    criterion: p.criterion,
                    allocator: o.allocator,
                    budget: p.budget,
                    budget_ratio: o.budget_ratio,
                    mean_gain_sq: p.mean_gain_sq,
                    zero_power_streams: o.zero_power_streams,
                    predicted_imse: o.predicted_imse,
                    predicted_norm_imse_db: o.predicted_norm_imse_db,
                    imse: o.report.imse,
                    norm_imse_db: o.report.normalized_imse_db,
                    mse: o.report.mse,
                    multi_bit_error_rate: o.report.multi_bit_error_rate,
                    gain_db: o.gain_db,
                    predicted_gain_db: o.predicted_gain_db,
                    powers: o
                        .powers
                        .iter()
                        .map(|ch| ch.iter().map(|p| format!("{p:e}")).collect::<Vec<_>>().join(";"))
                        .collect::<Vec<_>>()
                        .join("|"),
                });
            }
        }
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `curves.csv`, `gains.csv`, `gains_predicted.csv`, `trials.csv`
/// and the effective `config.toml` into `dir`.
pub fn write_outputs(summary: &ExperimentSummary, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("curves.csv"), &summary.curves)?;
    if config.experiment.gain_snr_db.is_some() {
        write_csv(&dir.join("gains.csv"), &summary.gains)?;
        write_csv(&dir.join("gains_predicted.csv"), &summary.gains_predicted)?;
    }
    write_csv(&dir.join("trials.csv"), &trial_rows(&summary.trials))?;
    fs::write(dir.join("config.toml"), config.to_toml_string())?;
    Ok(())
}
