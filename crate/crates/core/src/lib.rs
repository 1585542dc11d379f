//! Event-driven simulator for switched avionics networks (AFDX and plain
//! Ethernet): end systems, store-and-forward switches with per-VL policing,
//! redundant A/B networks and figure-of-merit collection.

pub mod config_io;
pub mod endsystem;
pub mod engine;
pub mod metrics;
pub mod netmodel;
pub mod rng;
pub mod scaling;
pub mod scenarios;
pub mod switchfabric;
pub mod time;

pub use engine::{run, run_with, RunOptions, SimulationResult, StartOffsets};
pub use netmodel::{validate_network, NetworkConfig, ValidatedNetwork, VlId};
pub use time::SimTime;
