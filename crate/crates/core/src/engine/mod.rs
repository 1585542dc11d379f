//! Discrete-event simulation kernel.

mod queue;
mod run;

pub use queue::{Event, EventKind, EventQueue, QueueError, TieKey};
pub use run::{
    run, run_with, FomReport, ModelError, RunCounters, RunOptions, SimulationResult, StartOffsets, SwitchSummary,
    TraceEvent, TraceRecord,
};
