use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::rational::{ExactRational, Interval};

/// One emitted solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionRecord {
    /// 1-based position in the emitting session's output.
    pub index: u64,
    pub solution: BitString,
    /// The solution's interval under the session's shift function.
    pub interval: Interval,
    /// Seeds drawn for this emission, including the accepted one.
    pub attempts: u64,
    /// Clock reading at emission.
    pub tick: u64,
    /// Ticks since the previous emission (or session start).
    pub delay: u64,
}

impl EmissionRecord {
    pub fn width(&self) -> ExactRational {
        self.interval.width()
    }
}

/// Time source injected into enumeration sessions. Sessions call
/// [`Clock::on_attempt`] once per drawn seed and read [`Clock::now`] at each
/// emission; they never read a system clock themselves.
pub trait Clock: Send {
    fn on_attempt(&mut self);
    fn now(&self) -> u64;
}

/// Deterministic clock: every attempt costs a fixed number of ticks.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    tick: u64,
    cost_per_attempt: u64,
}

impl VirtualClock {
    pub fn new(cost_per_attempt: u64) -> Self {
        Self {
            tick: 0,
            cost_per_attempt,
        }
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Clock for VirtualClock {
    fn on_attempt(&mut self) {
        self.tick += self.cost_per_attempt;
    }

    fn now(&self) -> u64 {
        self.tick
    }
}

/// Nanoseconds since construction.
#[derive(Debug, Clone)]
pub struct WallClock {
    start: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Clock for WallClock {
    fn on_attempt(&mut self) {}

    fn now(&self) -> u64 {
        self.start.elapsed().as_nanos() as u64
    }
}
