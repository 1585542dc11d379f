//! Runtime-scaling benchmark: wall-clock time of A350-style runs against
//! the number of frames simulated, and a linear fit over configurations.

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run, ModelError, StartOffsets};
use crate::metrics::{fit_linear, FitError, LinearFit, RuntimePoint};
use crate::netmodel::{validate_network, ValidationError};
use crate::scenarios::{a350_network, A350Params, ScenarioError};
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub periodicities: Vec<SimTime>,
    pub reps: usize,
    /// Runs executed concurrently. Timings grow with contention, so the
    /// degree is reported with the results.
    pub jobs: usize,
    pub base: A350Params,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("no periodicities given")]
    NoPeriodicities,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub periodicity: SimTime,
    pub n_packets: u64,
    pub runtimes_s: Vec<f64>,
    pub mean_runtime_s: f64,
    pub std_runtime_s: f64,
}

impl BenchPoint {
    pub fn runtime_point(&self) -> RuntimePoint {
        RuntimePoint {
            n_packets: self.n_packets,
            runtime_minutes: self.mean_runtime_s / 60.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub points: Vec<BenchPoint>,
    pub jobs: usize,
    /// Fit of mean runtime (minutes) against packets.
    pub fit: Result<LinearFit, FitError>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    if cfg.reps == 0 {
        return Err(BenchError::NoRepetitions);
    }
    if cfg.periodicities.is_empty() {
        return Err(BenchError::NoPeriodicities);
    }
    let nets = cfg
        .periodicities
        .iter()
        .map(|&p| {
            let params = A350Params {
                periodicity: p,
                ..cfg.base.clone()
            };
            Ok(validate_network(a350_network(&params)?)?)
        })
        .collect::<Result<Vec<_>, BenchError>>()?;

    let tasks: Vec<(usize, usize)> = (0..nets.len())
        .flat_map(|i| (0..cfg.reps).map(move |r| (i, r)))
        .collect();
    let jobs = cfg.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let offsets = StartOffsets::new();
    let measured: Vec<Result<(usize, u64, f64), ModelError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, _)| {
                let result = run(&nets[i], &offsets, cfg.base.seed)?;
                Ok((
                    i,
                    result.report.counters.logical_frames,
                    result.wall_clock.as_secs_f64(),
                ))
            })
            .collect()
    });

    let mut points: Vec<BenchPoint> = cfg
        .periodicities
        .iter()
        .map(|&p| BenchPoint {
            periodicity: p,
            n_packets: 0,
            runtimes_s: Vec::with_capacity(cfg.reps),
            mean_runtime_s: 0.0,
            std_runtime_s: 0.0,
        })
        .collect();
    for m in measured {
        let (i, packets, secs) = m?;
        points[i].n_packets = packets;
        points[i].runtimes_s.push(secs);
    }
    for p in &mut points {
        (p.mean_runtime_s, p.std_runtime_s) = mean_std(&p.runtimes_s);
    }
    let runtime_points: Vec<RuntimePoint> = points.iter().map(BenchPoint::runtime_point).collect();
    Ok(BenchResult {
        fit: fit_linear(&runtime_points),
        points,
        jobs,
    })
}

/// One row per configuration, readable by gnuplot
/// (`set datafile separator ","`) or any spreadsheet.
pub fn bench_csv(result: &BenchResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "periodicity_ms",
        "n_packets",
        "mean_runtime_s",
        "std_runtime_s",
        "mean_runtime_min",
        "reps",
        "jobs",
    ])
    .expect("in-memory write");
    for p in &result.points {
        w.write_record([
            format!("{}", p.periodicity.as_millis_f64()),
            p.n_packets.to_string(),
            format!("{:.6}", p.mean_runtime_s),
            format!("{:.6}", p.std_runtime_s),
            format!("{:.8}", p.mean_runtime_s / 60.0),
            p.runtimes_s.len().to_string(),
            result.jobs.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Fit summary as `key,value` lines, or the reason it was skipped.
pub fn fit_csv(result: &BenchResult) -> String {
    match &result.fit {
        Ok(f) => format!(
            "key,value\nslope_min_per_packet,{:e}\nintercept_min,{:e}\nr_squared,{:.6}\njobs,{}\n",
            f.slope, f.intercept, f.r_squared, result.jobs
        ),
        Err(e) => format!("key,value\nskipped,\"{e}\"\njobs,{}\n", result.jobs),
    }
}
