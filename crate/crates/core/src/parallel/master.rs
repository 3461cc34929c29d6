//! The master's second phase: per-slave queues and the weighted pick.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rational::ExactRational;
use crate::record::EmissionRecord;
use crate::sampling::weighted_index;

/// Records buffered per queue before output starts:
/// `⌈(2m/α²) · ln((2m² + mα²) / (α² δ*))⌉`.
pub fn prefill_target(m: usize, alpha: f64, delta_star: f64) -> Result<u64> {
    if m == 0 || !(0.0 < alpha && alpha < 1.0) || !(0.0 < delta_star && delta_star < 1.0) {
        return Err(Error::Invalid(format!(
            "prefill needs m >= 1 and α, δ* in (0, 1); got m = {m}, α = {alpha}, δ* = {delta_star}"
        )));
    }
    let m = m as f64;
    let a2 = alpha * alpha;
    let q = (2.0 * m / a2) * ((2.0 * m * m + m * a2) / (a2 * delta_star)).ln();
    Ok(q.ceil().max(0.0) as u64)
}

/// Output pacing `Δ = (1 + α) · (3/2) · (t / m)`.
pub fn pacing_interval(alpha: &ExactRational, t: u64, m: usize) -> ExactRational {
    let one = ExactRational::one();
    &(&(&one + alpha) * &ExactRational::ratio(3, 2)) * &ExactRational::ratio(t as i64, m as i64)
}

/// Per-slave queues and the remaining lengths `L_i`.
#[derive(Debug, Clone)]
pub struct MasterQueues {
    queues: Vec<VecDeque<EmissionRecord>>,
    remaining: Vec<ExactRational>,
    done: Vec<bool>,
    received: Vec<u64>,
    output: u64,
}

impl MasterQueues {
    /// One queue per range, `L_i` starting at the range lengths.
    pub fn new(lengths: Vec<ExactRational>) -> Self {
        let m = lengths.len();
        Self {
            queues: vec![VecDeque::new(); m],
            remaining: lengths,
            done: vec![false; m],
            received: vec![0; m],
            output: 0,
        }
    }

    pub fn slaves(&self) -> usize {
        self.queues.len()
    }

    fn index(&self, slave: usize) -> Result<usize> {
        if slave == 0 || slave > self.queues.len() {
            return Err(Error::Transport(format!("message from unknown slave {slave}")));
        }
        Ok(slave - 1)
    }

    /// Enqueues a record from 1-based `slave`.
    pub fn push(&mut self, slave: usize, record: EmissionRecord) -> Result<()> {
        let i = self.index(slave)?;
        if self.done[i] {
            return Err(Error::Transport(format!("slave {slave} sent after Done")));
        }
        self.queues[i].push_back(record);
        self.received[i] += 1;
        Ok(())
    }

    /// Marks `slave` finished; `discarded` is range width it banned without
    /// emitting.
    pub fn finish(&mut self, slave: usize, discarded: &ExactRational) -> Result<()> {
        let i = self.index(slave)?;
        self.done[i] = true;
        self.remaining[i] -= discarded;
        Ok(())
    }

    pub fn is_done(&self, slave: usize) -> bool {
        self.done[slave - 1]
    }

    pub fn depth(&self, slave: usize) -> usize {
        self.queues[slave - 1].len()
    }

    pub fn depths(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }

    pub fn remaining(&self) -> &[ExactRational] {
        &self.remaining
    }

    pub fn total_remaining(&self) -> ExactRational {
        self.remaining.iter().fold(ExactRational::zero(), |a, b| &a + b)
    }

    pub fn is_finished(&self) -> bool {
        self.remaining.iter().all(|l| !l.is_positive())
    }

    pub fn output_count(&self) -> u64 {
        self.output
    }

    /// Every queue holds `target` records or its slave is done.
    pub fn is_prefilled(&self, target: u64) -> bool {
        self.queues
            .iter()
            .zip(&self.done)
            .all(|(q, &d)| d || q.len() as u64 >= target)
    }

    /// 1-based slave drawn with probability `L_i / Σ L_j`; slaves with
    /// `L_i = 0` are never drawn.
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        weighted_index(rng, &self.remaining).map(|i| i + 1)
    }

    /// Dequeues from `slave` and charges its width against `L_i`. `Ok(None)`
    /// means the queue is empty but more may arrive; an empty queue of a
    /// finished slave with `L_i > 0` is an accounting error.
    pub fn pop(&mut self, slave: usize) -> Result<Option<EmissionRecord>> {
        let i = self.index(slave)?;
        match self.queues[i].pop_front() {
            Some(rec) => {
                self.remaining[i] -= &rec.width();
                self.output += 1;
                Ok(Some(rec))
            }
            None if self.done[i] => Err(Error::Deadlock {
                slave,
                remaining: self.remaining[i].to_string(),
            }),
            None => Ok(None),
        }
    }
}
