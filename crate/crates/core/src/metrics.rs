//! Figures of merit: delay, jitter, throughput, packet loss and switch
//! capacity, plus the linear fit used for runtime scaling.
//!
//! Jitter is not a primitive quantity; two definitions are supported:
//!
//! * [`JitterMode::FromMinimum`] (default): each packet's delay minus the
//!   smallest delay observed on the VL. `max(jitter)` is then the delay spread
//!   and `min(jitter)` is 0.
//! * [`JitterMode::Consecutive`]: absolute difference between consecutive
//!   delays.

use thiserror::Error;

use crate::netmodel::VlId;
use crate::time::SimTime;

pub const DEFAULT_THROUGHPUT_WINDOW: SimTime = SimTime::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JitterMode {
    #[default]
    FromMinimum,
    Consecutive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryOptions {
    pub jitter: JitterMode,
    pub throughput_window: SimTime,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            jitter: JitterMode::default(),
            throughput_window: DEFAULT_THROUGHPUT_WINDOW,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{vl}: accepted at {accepted_at} before generation at {generated_at}")]
    NegativeDelay {
        vl: VlId,
        generated_at: SimTime,
        accepted_at: SimTime,
    },
}

/// Samples gathered for one virtual link during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct VlCollector {
    pub vl: VlId,
    pub destinations: u64,
    /// Logical frames generated.
    pub sent: u64,
    /// Expected deliveries still in flight when the run ended; excluded
    /// from the loss computation.
    pub unresolved: u64,
    pub delays: Vec<SimTime>,
    /// `(acceptance time, frame bytes)` of every accepted delivery.
    pub deliveries: Vec<(SimTime, u32)>,
}

impl VlCollector {
    pub fn new(vl: VlId, destinations: usize) -> Self {
        VlCollector {
            vl,
            destinations: destinations as u64,
            sent: 0,
            unresolved: 0,
            delays: Vec::new(),
            deliveries: Vec::new(),
        }
    }

    /// Records the first valid copy of a logical frame reaching a destination.
    pub fn record_delivery(
        &mut self,
        generated_at: SimTime,
        accepted_at: SimTime,
        bytes: u32,
    ) -> Result<SimTime, MetricsError> {
        let delay = accepted_at
            .checked_sub(generated_at)
            .ok_or(MetricsError::NegativeDelay {
                vl: self.vl,
                generated_at,
                accepted_at,
            })?;
        self.delays.push(delay);
        self.deliveries.push((accepted_at, bytes));
        Ok(delay)
    }

    pub fn accepted(&self) -> u64 {
        self.delays.len() as u64
    }

    pub fn expected(&self) -> u64 {
        self.sent * self.destinations
    }
}

/// Maximum, minimum, mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    /// `None` for an empty sample. The standard deviation uses the `n - 1`
    /// estimator and is 0 for a single sample.
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        // keep min <= mean <= max despite rounding in the sum
        Some(Stats {
            max,
            min,
            mean: mean.clamp(min, max),
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomStats {
    pub vl: VlId,
    /// Nanoseconds; `None` when nothing was delivered.
    pub delay: Option<Stats>,
    pub jitter: Option<Stats>,
    /// Bits per second over tumbling windows.
    pub throughput: Stats,
    pub loss_percent: f64,
    pub sent: u64,
    pub accepted: u64,
}

/// Jitter samples (ns) under the chosen definition.
pub fn jitter_samples(delays: &[SimTime], mode: JitterMode) -> Vec<f64> {
    match mode {
        JitterMode::FromMinimum => {
            let Some(min) = delays.iter().min() else {
                return Vec::new();
            };
            delays.iter().map(|d| (*d - *min).as_nanos() as f64).collect()
        }
        JitterMode::Consecutive => delays
            .windows(2)
            .map(|w| w[0].as_nanos().abs_diff(w[1].as_nanos()) as f64)
            .collect(),
    }
}

/// Accepted bits per second in each tumbling window of `[0, duration)`. The
/// last window may be shorter and is normalized by its own length.
pub fn throughput_windows(deliveries: &[(SimTime, u32)], duration: SimTime, window: SimTime) -> Vec<f64> {
    let d = duration.as_nanos().max(1);
    let w = window.as_nanos().clamp(1, d);
    let count = d.div_ceil(w) as usize;
    let mut bits = vec![0u64; count];
    for &(t, bytes) in deliveries {
        let idx = ((t.as_nanos() / w) as usize).min(count - 1);
        bits[idx] += u64::from(bytes) * 8;
    }
    bits.iter()
        .enumerate()
        .map(|(i, &b)| {
            let start = i as u64 * w;
            let len = (start + w).min(d) - start;
            b as f64 * 1e9 / len as f64
        })
        .collect()
}

/// Figures of merit of one virtual link.
pub fn summarize(collector: &VlCollector, sim_duration: SimTime, opts: &SummaryOptions) -> FomStats {
    let delays: Vec<f64> = collector.delays.iter().map(|d| d.as_nanos() as f64).collect();
    let jitter = jitter_samples(&collector.delays, opts.jitter);
    let throughput = throughput_windows(&collector.deliveries, sim_duration, opts.throughput_window);
    let settled = collector.expected().saturating_sub(collector.unresolved);
    let lost = settled.saturating_sub(collector.accepted());
    let loss_percent = if settled == 0 {
        0.0
    } else {
        100.0 * lost as f64 / settled as f64
    };
    FomStats {
        vl: collector.vl,
        delay: Stats::of(&delays),
        jitter: Stats::of(&jitter),
        throughput: Stats::of(&throughput).expect("at least one window"),
        loss_percent,
        sent: collector.sent,
        accepted: collector.accepted(),
    }
}

/// What caused a capacity sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityChange {
    Enqueue { port: usize },
    Release { port: usize },
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitySample {
    pub time: SimTime,
    pub used_bytes: u64,
    pub used_percent: f64,
    pub change: CapacityChange,
}

/// Memory occupancy of one switch as a step function. Several samples may
/// share a timestamp when frames move at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySeries {
    pub switch: String,
    pub total_capacity_bytes: u64,
    pub samples: Vec<CapacitySample>,
}

impl CapacitySeries {
    pub fn new(switch: String, total_capacity_bytes: u64) -> Self {
        CapacitySeries {
            switch,
            total_capacity_bytes,
            samples: Vec::new(),
        }
    }

    pub fn peak_bytes(&self) -> u64 {
        self.samples.iter().map(|s| s.used_bytes).max().unwrap_or(0)
    }

    /// One sample per distinct timestamp, keeping the state after the last
    /// change at that instant.
    pub fn collapsed(&self) -> Vec<CapacitySample> {
        let mut out: Vec<CapacitySample> = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            match out.last_mut() {
                Some(last) if last.time == s.time => *last = *s,
                _ => out.push(*s),
            }
        }
        out
    }
}

/// A runtime measurement: logical frames simulated vs wall-clock minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimePoint {
    pub n_packets: u64,
    pub runtime_minutes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FitError {
    #[error("a linear fit needs at least 3 points with distinct packet counts, got {0}")]
    DegenerateInput(usize),
}

/// Ordinary least squares of runtime against packet count.
pub fn fit_linear(points: &[RuntimePoint]) -> Result<LinearFit, FitError> {
    let mut distinct: Vec<u64> = points.iter().map(|p| p.n_packets).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(FitError::DegenerateInput(distinct.len()));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.n_packets as f64).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.runtime_minutes).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.n_packets as f64 - mean_x;
        let dy = p.runtime_minutes - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.runtime_minutes - (slope * p.n_packets as f64 + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
