//! Simulated time.
//!
//! All simulated instants and durations are integer nanoseconds so that
//! equal-time situations (frames that are ready at exactly the same instant)
//! compare exactly.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// A simulated instant or duration in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Converts fractional seconds, rounding to the nearest nanosecond.
    /// Negative and non-finite inputs yield `None`.
    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        Self::from_scaled(secs, 1e9)
    }

    pub fn from_millis_f64(ms: f64) -> Option<Self> {
        Self::from_scaled(ms, 1e6)
    }

    pub fn from_micros_f64(us: f64) -> Option<Self> {
        Self::from_scaled(us, 1e3)
    }

    fn from_scaled(value: f64, scale: f64) -> Option<Self> {
        let ns = (value * scale).round();
        if !ns.is_finite() || ns < 0.0 || ns > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(ns as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Exact microsecond rendering with three decimals (nanosecond resolution).
    pub fn fmt_micros(self) -> String {
        format!("{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("simulated time overflow"))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative simulated duration"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} us", self.fmt_micros())
    }
}
