//! Importance-aware waterfilling and the baseline allocators.
//!
//! Every stream `k` has an importance weight `w_k`, a symbol count `L_k`
//! and a channel power gain `g_k = |h_k|^2`. The allocators minimise
//! `sum_k w_k * alpha * exp(beta * p_k * g_k / sigma^2)` under
//! `sum_k L_k p_k <= P`. The optimum has the waterfilling form
//! `p_k = W_k (level - base_k)^+` with base width `W_k = -sigma^2 / (beta g_k)`
//! and base height `base_k = ln(L_k sigma^2 / (w_k g_k))`.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::BerModelParams;

/// Default relative tolerance on the power budget.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamParams {
    pub weight: f64,
    pub symbol_length: usize,
    pub gain_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationInput {
    pub streams: Vec<StreamParams>,
    pub noise_variance: f64,
    pub ber: BerModelParams,
}

impl AllocationInput {
    pub fn new(streams: Vec<StreamParams>, noise_variance: f64, ber: BerModelParams) -> Result<Self> {
        let input = Self {
            streams,
            noise_variance,
            ber,
        };
        input.validate()?;
        Ok(input)
    }

    /// Zero weights are accepted: such streams never receive power.
    pub fn validate(&self) -> Result<()> {
        if self.streams.is_empty() {
            return Err(Error::Allocation("no streams".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::Allocation(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        BerModelParams::new(self.ber.alpha, self.ber.beta)?;
        for (k, s) in self.streams.iter().enumerate() {
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(Error::Allocation(format!("stream {k}: bad weight {}", s.weight)));
            }
            if s.symbol_length == 0 {
                return Err(Error::Allocation(format!("stream {k}: zero symbol length")));
            }
            if !(s.gain_sq.is_finite() && s.gain_sq > 0.0) {
                return Err(Error::Allocation(format!("stream {k}: bad channel gain {}", s.gain_sq)));
            }
        }
        if self.streams.iter().all(|s| s.weight == 0.0) {
            return Err(Error::Allocation("all weights are zero".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn total_symbols(&self) -> usize {
        self.streams.iter().map(|s| s.symbol_length).sum()
    }

    /// Same streams with every weight set to one.
    pub fn unit_weights(&self) -> Self {
        Self {
            streams: self
                .streams
                .iter()
                .map(|s| StreamParams { weight: 1.0, ..*s })
                .collect(),
            ..self.clone()
        }
    }

    pub fn base_widths(&self) -> Vec<f64> {
        self.streams
            .iter()
            .map(|s| -self.noise_variance / (self.ber.beta * s.gain_sq))
            .collect()
    }

    /// `+inf` for zero-weight streams.
    pub fn base_heights(&self) -> Vec<f64> {
        self.streams
            .iter()
            .map(|s| {
                if s.weight == 0.0 {
                    f64::INFINITY
                } else {
                    (s.symbol_length as f64 * self.noise_variance / (s.weight * s.gain_sq)).ln()
                }
            })
            .collect()
    }

    pub fn snr(&self, k: usize, power: f64) -> f64 {
        power * self.streams[k].gain_sq / self.noise_variance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// Power per modulated symbol.
    pub powers: Vec<f64>,
    pub water_level: Option<f64>,
    pub lagrange_multiplier: Option<f64>,
    pub base_heights: Vec<f64>,
    pub base_widths: Vec<f64>,
    /// Water-level evaluations (iterative solver) or candidate active sets
    /// examined (exact solver).
    pub iterations: usize,
    pub total_power_used: f64,
    pub nothing_transmitted: bool,
    /// The iterative solver hit its cap and finished by bisection.
    pub fallback: bool,
}

impl PowerAllocation {
    fn from_level(input: &AllocationInput, powers: Vec<f64>, level: f64, iterations: usize, fallback: bool) -> Self {
        let total = used_power(input, &powers);
        Self {
            nothing_transmitted: powers.iter().all(|&p| p == 0.0),
            lagrange_multiplier: Some(-input.ber.alpha * input.ber.beta * (-level).exp()),
            water_level: Some(level),
            base_heights: input.base_heights(),
            base_widths: input.base_widths(),
            powers,
            iterations,
            total_power_used: total,
            fallback,
        }
    }
}

fn used_power(input: &AllocationInput, powers: &[f64]) -> f64 {
    input
        .streams
        .iter()
        .zip(powers)
        .map(|(s, p)| s.symbol_length as f64 * p)
        .sum()
}

fn check_budget(budget: f64) -> Result<()> {
    if budget.is_finite() && budget > 0.0 {
        Ok(())
    } else {
        Err(Error::Allocation(format!("budget must be positive, got {budget}")))
    }
}

/// Exact waterfilling by sorting base heights.
///
/// Heights are handled relative to the lowest one and widths relative to
/// the widest, so equal streams produce exactly `P / sum L` each.
pub fn waterfill_exact(input: &AllocationInput, budget: f64) -> Result<PowerAllocation> {
    input.validate()?;
    check_budget(budget)?;
    let heights = input.base_heights();
    let widths = input.base_widths();

    let mut order: Vec<usize> = (0..input.len()).filter(|&k| heights[k].is_finite()).collect();
    order.sort_by(|&a, &b| heights[a].total_cmp(&heights[b]));
    let h_min = heights[order[0]];
    let scale = order.iter().map(|&k| widths[k]).fold(0.0, f64::max);
    let rel_width = |k: usize| widths[k] / scale;
    let offset = |k: usize| heights[k] - h_min;
    let len = |k: usize| input.streams[k].symbol_length as f64;

    // Water depth above the lowest base, in units of the widest base.
    let mut den = 0.0;
    let mut num = budget;
    let mut depth = 0.0;
    let mut examined = 0;
    for (n, &k) in order.iter().enumerate() {
        examined += 1;
        den += len(k) * rel_width(k);
        num += len(k) * rel_width(k) * scale * offset(k);
        depth = num / den;
        match order.get(n + 1) {
            Some(&next) if depth > scale * offset(next) => continue,
            _ => break,
        }
    }

    let powers: Vec<f64> = (0..input.len())
        .map(|k| {
            if heights[k].is_finite() {
                (rel_width(k) * (depth - scale * offset(k))).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let level = h_min + depth / scale;
    Ok(PowerAllocation::from_level(input, powers, level, examined, false))
}

fn powers_at(level: f64, heights: &[f64], widths: &[f64]) -> Vec<f64> {
    heights
        .iter()
        .zip(widths)
        .map(|(&h, &w)| if h < level { w * (level - h) } else { 0.0 })
        .collect()
}

/// Iteration cap of the fixed-point solver: `10 * ceil(log2(1 / tol))`.
pub fn iteration_cap(tol: f64) -> usize {
    10 * ((1.0 / tol).log2().ceil().max(1.0) as usize)
}

/// The classical fixed-point water-level iteration.
///
/// Starts from the level that would spend the budget if every stream were
/// active and lowers it by `(sum L p - P) / sum L W` (summed over all
/// streams) until the relative budget error drops below `tol`. Falls back
/// to bisection on the level if the iteration cap is reached.
pub fn waterfill_iterative(input: &AllocationInput, budget: f64, tol: f64) -> Result<PowerAllocation> {
    input.validate()?;
    check_budget(budget)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Allocation(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let heights = input.base_heights();
    let widths = input.base_widths();
    let lw: Vec<f64> = input
        .streams
        .iter()
        .zip(&widths)
        .zip(&heights)
        .map(|((s, w), h)| if h.is_finite() { s.symbol_length as f64 * w } else { 0.0 })
        .collect();
    let sum_lw: f64 = lw.iter().sum();
    let sum_lwh: f64 = lw
        .iter()
        .zip(&heights)
        .filter(|(_, h)| h.is_finite())
        .map(|(a, h)| a * h)
        .sum();

    let spend = |level: f64| used_power(input, &powers_at(level, &heights, &widths));
    let cap = iteration_cap(tol);

    let mut level = (budget + sum_lwh) / sum_lw;
    for it in 1..=cap {
        let f = spend(level);
        if (f - budget).abs() / budget < tol {
            let powers = powers_at(level, &heights, &widths);
            return Ok(PowerAllocation::from_level(input, powers, level, it, false));
        }
        level -= (f - budget) / sum_lw;
    }

    // Bisection between the lowest base (nothing spent) and a level that
    // overspends.
    let mut lo = heights
        .iter()
        .copied()
        .filter(|h| h.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut hi = level.max(lo + 1.0);
    while spend(hi) < budget {
        hi = lo + 2.0 * (hi - lo);
    }
    let mut iterations = cap;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f = spend(mid);
        if (f - budget).abs() / budget < tol || mid <= lo || mid >= hi {
            let powers = powers_at(mid, &heights, &widths);
            return Ok(PowerAllocation::from_level(input, powers, mid, iterations, true));
        }
        if f > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if iterations > cap + 2000 {
            return Err(Error::NotConverged {
                iterations,
                residual: (f - budget).abs() / budget,
            });
        }
    }
}

/// Margin-adaptive waterfilling: minimises the plain sum of bit error
/// probabilities, ignoring importance.
pub fn waterfill_ma(input: &AllocationInput, budget: f64) -> Result<PowerAllocation> {
    let mut alloc = waterfill_exact(&input.unit_weights(), budget)?;
    alloc.base_heights = input.unit_weights().base_heights();
    Ok(alloc)
}

/// The same power on every modulated symbol.
pub fn equal_allocation(input: &AllocationInput, budget: f64) -> Result<PowerAllocation> {
    input.validate()?;
    check_budget(budget)?;
    let p = budget / input.total_symbols() as f64;
    let powers = vec![p; input.len()];
    Ok(PowerAllocation {
        total_power_used: used_power(input, &powers),
        powers,
        water_level: None,
        lagrange_multiplier: None,
        base_heights: input.base_heights(),
        base_widths: input.base_widths(),
        iterations: 0,
        nothing_transmitted: false,
        fallback: false,
    })
}

/// Model bit error probability of each stream under `powers`.
pub fn predicted_ber(input: &AllocationInput, powers: &[f64]) -> Vec<f64> {
    powers
        .iter()
        .enumerate()
        .map(|(k, &p)| crate::phy::ber(input.ber, input.snr(k, p)))
        .collect()
}

/// `sum_k w_k * alpha * exp(beta * snr_k)`.
pub fn predicted_imse(input: &AllocationInput, powers: &[f64]) -> Result<f64> {
    if powers.len() != input.len() {
        return Err(Error::LengthMismatch {
            stream: 0,
            expected: input.len(),
            found: powers.len(),
        });
    }
    Ok(input
        .streams
        .iter()
        .zip(predicted_ber(input, powers))
        .map(|(s, b)| s.weight * b)
        .sum())
}

/// `-10 log10(optimised / baseline)`.
pub fn gain_db(imse_opt: f64, imse_baseline: f64) -> Result<f64> {
    if !(imse_opt > 0.0 && imse_baseline > 0.0) {
        return Err(Error::Metric(format!(
            "gain needs positive IMSE values, got {imse_opt} and {imse_baseline}"
        )));
    }
    Ok(-10.0 * (imse_opt / imse_baseline).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocator {
    Proposed,
    Ma,
    Equal,
}

impl Allocator {
    pub const ALL: [Allocator; 3] = [Allocator::Proposed, Allocator::Ma, Allocator::Equal];

    pub fn name(self) -> &'static str {
        match self {
            Allocator::Proposed => "proposed",
            Allocator::Ma => "ma",
            Allocator::Equal => "equal",
        }
    }

    pub fn allocate(self, input: &AllocationInput, budget: f64) -> Result<PowerAllocation> {
        match self {
            Allocator::Proposed => waterfill_exact(input, budget),
            Allocator::Ma => waterfill_ma(input, budget),
            Allocator::Equal => equal_allocation(input, budget),
        }
    }
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Allocator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Allocator::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown allocator {s:?} (expected proposed, ma or equal)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub stream_id: String,
    pub omega: f64,
    #[serde(rename = "L")]
    pub symbol_length: usize,
    pub gain_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub stream_id: String,
    pub omega: f64,
    #[serde(rename = "L")]
    pub symbol_length: usize,
    pub gain_sq: f64,
    pub p: f64,
    pub snr: f64,
    pub predicted_ber: f64,
}

/// Reads a `stream_id,omega,L,gain_sq` table.
pub fn read_streams_csv(reader: impl Read) -> Result<Vec<StreamRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn allocation_records(ids: &[String], input: &AllocationInput, alloc: &PowerAllocation) -> Vec<AllocationRecord> {
    let bers = predicted_ber(input, &alloc.powers);
    input
        .streams
        .iter()
        .enumerate()
        .map(|(k, s)| AllocationRecord {
            stream_id: ids.get(k).cloned().unwrap_or_else(|| k.to_string()),
            omega: s.weight,
            symbol_length: s.symbol_length,
            gain_sq: s.gain_sq,
            p: alloc.powers[k],
            snr: input.snr(k, alloc.powers[k]),
            predicted_ber: bers[k],
        })
        .collect()
}

pub fn write_allocation_csv(
    writer: impl Write,
    ids: &[String],
    input: &AllocationInput,
    alloc: &PowerAllocation,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for rec in allocation_records(ids, input, alloc) {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}
