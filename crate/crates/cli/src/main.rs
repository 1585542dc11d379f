use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use avionet::config_io::{read_config, write_run_dir, ConfigFileError, ReportFormat};
use avionet::engine::{run_with, RunOptions, SimulationResult, StartOffsets};
use avionet::metrics::{JitterMode, SummaryOptions};
use avionet::netmodel::{validate_network, NetworkConfig, ValidatedNetwork};
use avionet::scaling::{bench_csv, fit_csv, run_bench, BenchConfig};
use avionet::scenarios::{a350_network, xu2019_network, xu2019_worst_case, A350Params, WorstCaseRow};
use avionet::SimTime;

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "avionet", version, about = "Event-driven AFDX / avionics Ethernet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Jitter {
    FromMinimum,
    Consecutive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Name {
    Xu2019,
    A350,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write trace.csv (one row per frame copy per hop event).
    #[arg(long)]
    trace: bool,
    /// Jitter definition.
    #[arg(long, value_enum, default_value = "from-minimum")]
    jitter: Jitter,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a configuration file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration's rng_seed.
        #[arg(long, env = "AVIONET_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in scenario.
    Scenario {
        #[arg(long, value_enum)]
        name: Name,
        /// Worst-case start offsets of the xu2019 scenario (V1..V5).
        #[arg(long)]
        row: Option<String>,
        /// Message periodicity of the a350 scenario, in ms.
        #[arg(long, default_value_t = 0.5)]
        periodicity: f64,
        #[arg(long, env = "AVIONET_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Measure runtime against simulated frames and fit a line.
    Bench {
        #[arg(long, value_enum, default_value = "a350")]
        name: BenchName,
        /// Periodicities in ms.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,4,5,6,7,8")]
        periodicities: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Simulated time per run, in seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, env = "AVIONET_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchName {
    A350,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            config,
            seed,
            out,
            output,
        } => {
            let cfg = load(&config)?;
            let seed = seed.unwrap_or(cfg.rng_seed);
            let net = validated(cfg)?;
            let result = simulate(&net, &StartOffsets::new(), seed, &output)?;
            write_outputs(&out, &result, &output)?;
            summary(&result);
            Ok(())
        }
        Command::Validate { config } => {
            let net = validated(load(&config)?)?;
            println!(
                "ok: {} nodes, {} links, {} VLs",
                net.nodes.len(),
                net.links.len(),
                net.vls.len()
            );
            Ok(())
        }
        Command::Scenario {
            name,
            row,
            periodicity,
            seed,
            out,
            output,
        } => scenario(name, row.as_deref(), periodicity, seed, out.as_deref(), &output),
        Command::Bench {
            name: BenchName::A350,
            periodicities,
            reps,
            jobs,
            duration,
            seed,
            out,
        } => bench(&periodicities, reps, jobs, duration, seed, &out),
    }
}

fn load(path: &Path) -> Result<NetworkConfig, Failure> {
    read_config(path).map_err(|e| match e {
        ConfigFileError::Io { .. } => Failure::io(e.to_string()),
        ConfigFileError::Parse { .. } => Failure::invalid(e.to_string()),
    })
}

fn validated(cfg: NetworkConfig) -> Result<ValidatedNetwork, Failure> {
    validate_network(cfg).map_err(|e| Failure::invalid(format!("invalid network:\n{e}")))
}

fn simulate(
    net: &ValidatedNetwork,
    offsets: &StartOffsets,
    seed: u64,
    output: &OutputArgs,
) -> Result<SimulationResult, Failure> {
    let opts = RunOptions {
        trace: output.trace,
        summary: SummaryOptions {
            jitter: match output.jitter {
                Jitter::FromMinimum => JitterMode::FromMinimum,
                Jitter::Consecutive => JitterMode::Consecutive,
            },
            ..SummaryOptions::default()
        },
        sample_interval: None,
    };
    run_with(net, offsets, seed, &opts).map_err(|e| Failure::invalid(format!("simulation aborted: {e}")))
}

fn write_outputs(out: &Path, result: &SimulationResult, output: &OutputArgs) -> Result<(), Failure> {
    write_run_dir(out, result, output.format.into())
        .map_err(|e| Failure::io(format!("cannot write to {}: {e}", out.display())))
}

fn summary(result: &SimulationResult) {
    let c = &result.report.counters;
    println!(
        "simulated {} us: {} events, {} frames sent, {} accepted, {} VLs, {:.3} s wall clock",
        result.final_time.fmt_micros(),
        result.event_count,
        c.logical_frames,
        c.accepted,
        result.report.vls.len(),
        result.wall_clock.as_secs_f64()
    );
}

/// Microseconds rounded to 0.01 us, shown with 3 decimals.
fn rounded_micros(t: SimTime) -> String {
    format!("{:.3}", (t.as_nanos() as f64 / 10.0).round() / 100.0)
}

fn scenario(
    name: Name,
    row: Option<&str>,
    periodicity_ms: f64,
    seed: Option<u64>,
    out: Option<&Path>,
    output: &OutputArgs,
) -> Result<(), Failure> {
    let (cfg, offsets, row) = match name {
        Name::Xu2019 => {
            let row = row
                .map(|r| r.parse::<WorstCaseRow>())
                .transpose()
                .map_err(|e| Failure::invalid(e.to_string()))?;
            let offsets = row.map(xu2019_worst_case).unwrap_or_default();
            (xu2019_network(), offsets, row)
        }
        Name::A350 => {
            if row.is_some() {
                return Err(Failure::invalid("--row applies to the xu2019 scenario only"));
            }
            let periodicity = SimTime::from_millis_f64(periodicity_ms)
                .filter(|p| *p > SimTime::ZERO)
                .ok_or_else(|| Failure::invalid(format!("invalid periodicity {periodicity_ms} ms")))?;
            let params = A350Params {
                periodicity,
                seed: seed.unwrap_or(A350Params::default().seed),
                ..A350Params::default()
            };
            let cfg = a350_network(&params).map_err(|e| Failure::invalid(e.to_string()))?;
            (cfg, StartOffsets::new(), None)
        }
    };
    let seed = seed.unwrap_or(cfg.rng_seed);
    let net = validated(cfg)?;
    let result = simulate(&net, &offsets, seed, output)?;
    if let Some(out) = out {
        write_outputs(out, &result, output)?;
    }
    summary(&result);
    if let Some(row) = row {
        let worst = result
            .worst_delay(row.target())
            .ok_or_else(|| Failure::invalid(format!("{} delivered no frame", row.target())))?;
        println!(
            "{} worst delay: {} µs ({} ns)",
            row.target(),
            rounded_micros(worst),
            worst.as_nanos()
        );
    }
    Ok(())
}

fn bench(
    periodicities: &[f64],
    reps: usize,
    jobs: usize,
    duration_s: f64,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    if reps == 0 {
        return Err(Failure::invalid("--reps must be at least 1"));
    }
    let periodicities = periodicities
        .iter()
        .map(|&ms| {
            SimTime::from_millis_f64(ms)
                .filter(|p| *p > SimTime::ZERO)
                .ok_or_else(|| Failure::invalid(format!("invalid periodicity {ms} ms")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sim_duration = SimTime::from_secs_f64(duration_s)
        .filter(|d| *d > SimTime::ZERO)
        .ok_or_else(|| Failure::invalid(format!("invalid duration {duration_s} s")))?;
    let cfg = BenchConfig {
        periodicities,
        reps,
        jobs,
        base: A350Params {
            sim_duration,
            seed,
            ..A350Params::default()
        },
    };
    let result = run_bench(&cfg).map_err(|e| Failure::invalid(e.to_string()))?;
    fs::create_dir_all(out)
        .and_then(|()| fs::write(out.join("bench.csv"), bench_csv(&result)))
        .and_then(|()| fs::write(out.join("fit.csv"), fit_csv(&result)))
        .map_err(|e| Failure::io(format!("cannot write to {}: {e}", out.display())))?;
    for p in &result.points {
        println!(
            "periodicity {} ms: {} packets, {:.4} s mean over {} reps",
            p.periodicity.as_millis_f64(),
            p.n_packets,
            p.mean_runtime_s,
            p.runtimes_s.len()
        );
    }
    match &result.fit {
        Ok(f) => println!(
            "fit: runtime_min = {:e} * packets + {:e}, R^2 = {:.5} ({} jobs)",
            f.slope, f.intercept, f.r_squared, result.jobs
        ),
        Err(e) => println!("fit skipped: {e}"),
    }
    Ok(())
}
