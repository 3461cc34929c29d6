//! Deterministic replay of the master/slave pipeline on a virtual clock.
//!
//! Slaves run to completion in-process; their emissions are then stamped
//! with virtual emission times, delivered to the master after a fixed delay
//! `t`, and consumed by the master's weighted pick. All times are exact
//! rationals measured in ticks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::master::{pacing_interval, prefill_target};
use super::{master_phase1, run_slaves, worker_seed, Partition, SlaveOutput};
use crate::access::{EpsilonMode, SessionOptions};
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::RandomizedCounter;
use crate::rational::ExactRational;
use crate::record::EmissionRecord;
use crate::sampling::weighted_index;

/// When a slave's `j`-th emission happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionTiming {
    /// Every `s` ticks.
    Fixed { s: u64 },
    /// After the slave's cumulative attempts times `cost` ticks.
    PerAttempt { cost: u64 },
}

impl EmissionTiming {
    /// Emission times of `records`, in order.
    pub fn stamp(self, records: &[EmissionRecord]) -> Vec<u64> {
        match self {
            Self::Fixed { s } => (1..=records.len() as u64).map(|j| j * s).collect(),
            Self::PerAttempt { cost } => records
                .iter()
                .scan(0u64, |acc, r| {
                    *acc += r.attempts * cost;
                    Some(*acc)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Outputs are spaced exactly `Δ = (1 + α)(3/2)(t/m)` apart unless the
    /// picked queue is empty.
    Paced,
    /// Outputs go out as soon as the picked record has arrived, each costing
    /// the master `master_cost` ticks.
    Greedy { master_cost: u64 },
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub slaves: usize,
    pub delta: ExactRational,
    pub alpha: ExactRational,
    pub delta_star: ExactRational,
    pub timing: EmissionTiming,
    /// Delivery delay from slave to master.
    pub t: u64,
    pub pacing: Pacing,
    /// Overrides the computed prefill target.
    pub prefill: Option<u64>,
    pub seed: u64,
    pub epsilon_mode: EpsilonMode,
}

impl HarnessConfig {
    pub fn new(slaves: usize) -> Self {
        Self {
            slaves,
            delta: ExactRational::ratio(1, 10),
            alpha: ExactRational::ratio(1, 2),
            delta_star: ExactRational::ratio(1, 10),
            timing: EmissionTiming::Fixed { s: 100 },
            t: 100,
            pacing: Pacing::Paced,
            prefill: None,
            seed: 0,
            epsilon_mode: EpsilonMode::Proof,
        }
    }

    pub fn prefill_target(&self) -> Result<u64> {
        match self.prefill {
            Some(q) => Ok(q),
            None => prefill_target(self.slaves, self.alpha.to_f64(), self.delta_star.to_f64()),
        }
    }

    pub fn pace(&self) -> ExactRational {
        pacing_interval(&self.alpha, self.t, self.slaves)
    }
}

/// One record leaving the master.
#[derive(Debug, Clone)]
pub struct OutputEvent {
    pub slave: usize,
    pub record: EmissionRecord,
    pub time: ExactRational,
    /// Time since the previous output; `None` for the first.
    pub gap: Option<ExactRational>,
    /// The record had not arrived when the master wanted to output it.
    pub stalled: bool,
    /// Queue depths right after this output.
    pub depths: Vec<usize>,
    /// `L_i` right after this output.
    pub remaining: Vec<ExactRational>,
}

#[derive(Debug, Clone)]
pub struct MasterTrace {
    pub outputs: Vec<OutputEvent>,
    pub prefill: u64,
    /// Time at which every queue reached the prefill target.
    pub start: ExactRational,
    pub pace: ExactRational,
    pub stalls: u64,
    pub makespan: ExactRational,
}

impl MasterTrace {
    pub fn max_gap(&self) -> Option<&ExactRational> {
        self.outputs.iter().filter_map(|o| o.gap.as_ref()).max()
    }
}

/// Replays the master's second phase over recorded slave output.
pub fn replay_master(
    slaves: &[SlaveOutput],
    lengths: &[ExactRational],
    cfg: &HarnessConfig,
) -> Result<MasterTrace> {
    let m = slaves.len();
    if lengths.len() != m {
        return Err(Error::Invalid("one length per slave required".into()));
    }
    let t = cfg.t;
    let arrivals: Vec<Vec<u64>> = slaves
        .iter()
        .map(|s| {
            let mut last = 0u64;
            cfg.timing
                .stamp(&s.records)
                .into_iter()
                .map(|e| {
                    last = last.max(e + t);
                    last
                })
                .collect()
        })
        .collect();
    let done_at: Vec<u64> = arrivals.iter().map(|a| a.last().copied().unwrap_or(0).max(t)).collect();
    let prefill = cfg.prefill_target()?;
    let start = (0..m)
        .map(|i| {
            let n = arrivals[i].len() as u64;
            if n >= prefill && prefill > 0 {
                arrivals[i][prefill as usize - 1]
            } else if n >= prefill {
                0
            } else {
                done_at[i]
            }
        })
        .max()
        .unwrap_or(0);
    let start = ExactRational::from(start);
    let pace = cfg.pace();
    let step = match cfg.pacing {
        Pacing::Paced => pace.clone(),
        Pacing::Greedy { master_cost } => ExactRational::from(master_cost),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, 0));
    let mut remaining = lengths.to_vec();
    let mut discard_applied = vec![false; m];
    let mut consumed = vec![0usize; m];
    let mut outputs: Vec<OutputEvent> = Vec::new();
    let mut prev: Option<ExactRational> = None;
    let mut stalls = 0;
    let mut now = start.clone();
    loop {
        for i in 0..m {
            if !discard_applied[i] && ExactRational::from(done_at[i]) <= now {
                discard_applied[i] = true;
                remaining[i] -= &slaves[i].summary.discarded;
            }
        }
        if remaining.iter().all(|l| !l.is_positive()) {
            break;
        }
        let Some(i) = weighted_index(&mut rng, &remaining) else {
            break;
        };
        let Some(rec) = slaves[i].records.get(consumed[i]) else {
            if discard_applied[i] {
                return Err(Error::Deadlock {
                    slave: i + 1,
                    remaining: remaining[i].to_string(),
                });
            }
            // only discarded width is left; it is charged once the slave is done
            now = ExactRational::from(done_at[i]);
            continue;
        };
        let arrival = ExactRational::from(arrivals[i][consumed[i]]);
        let scheduled = match &prev {
            None => start.clone(),
            Some(p) => p + &step,
        };
        let stalled = arrival > scheduled;
        if stalled {
            stalls += 1;
        }
        let time = if stalled { arrival } else { scheduled };
        consumed[i] += 1;
        remaining[i] -= &rec.width();
        let depths = (0..m)
            .map(|j| {
                let arrived = arrivals[j].partition_point(|&a| ExactRational::from(a) <= time);
                arrived.saturating_sub(consumed[j])
            })
            .collect();
        outputs.push(OutputEvent {
            slave: i + 1,
            record: rec.clone(),
            gap: prev.as_ref().map(|p| &time - p),
            time: time.clone(),
            stalled,
            depths,
            remaining: remaining.clone(),
        });
        now = time.clone();
        prev = Some(time);
    }
    let makespan = prev.unwrap_or_else(|| start.clone());
    Ok(MasterTrace {
        outputs,
        prefill,
        start,
        pace,
        stalls,
        makespan,
    })
}

/// Full virtual run: partition, slaves, master replay.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub partition: Partition,
    pub slaves: Vec<SlaveOutput>,
    pub trace: MasterTrace,
}

impl ParallelRun {
    pub fn solutions(&self) -> impl Iterator<Item = &crate::bits::BitString> {
        self.trace.outputs.iter().map(|o| &o.record.solution)
    }
}

/// Runs the pipeline end to end. `oracle_for(0)` serves the master,
/// `oracle_for(i)` slave `i`.
pub fn run_virtual<P, C, F>(problem: &P, x: &P::Instance, oracle_for: F, cfg: &HarnessConfig) -> Result<ParallelRun>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
    F: Fn(usize) -> C,
{
    let partition = master_phase1(problem, &oracle_for(0), x, &cfg.delta, cfg.slaves, cfg.epsilon_mode)?;
    let opts = SessionOptions::seeded(cfg.seed).with_epsilon_mode(cfg.epsilon_mode);
    let slaves = run_slaves(problem, x, &partition, oracle_for, &opts)?;
    let lengths: Vec<_> = partition.ranges().map(|r| r.width()).collect();
    let trace = replay_master(&slaves, &lengths, cfg)?;
    Ok(ParallelRun {
        partition,
        slaves,
        trace,
    })
}

/// Makespan of a single session under `timing`: the time of its last
/// emission.
pub fn single_session_makespan(records: &[EmissionRecord], timing: EmissionTiming) -> u64 {
    timing.stamp(records).last().copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::model::brute_force_solutions;
    use crate::oracle::{Exactly, NeverFails};
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance, SimulatedOracle, SimulatedOracleConfig};

    fn noisy(i: usize) -> SimulatedOracle<AllBitsCounter> {
        SimulatedOracle::with_nonce(AllBitsCounter, SimulatedOracleConfig::default(), i as u64)
    }

    #[test]
    fn stamps() {
        let r = |a| EmissionRecord {
            index: 1,
            solution: crate::bits::BitString::empty(),
            interval: crate::rational::Interval::unit(),
            attempts: a,
            tick: 0,
            delay: 0,
        };
        let recs = vec![r(2), r(1), r(3)];
        assert_eq!(EmissionTiming::Fixed { s: 10 }.stamp(&recs), vec![10, 20, 30]);
        assert_eq!(EmissionTiming::PerAttempt { cost: 5 }.stamp(&recs), vec![10, 15, 30]);
    }

    #[test]
    fn outputs_everything_once() {
        let x = AllBitsInstance::new(6);
        for m in [1usize, 2, 4] {
            let cfg = HarnessConfig {
                seed: 3,
                ..HarnessConfig::new(m)
            };
            let run = run_virtual(&AllBits, &x, noisy, &cfg).unwrap();
            let got: Vec<_> = run.solutions().cloned().collect();
            let set: BTreeSet<_> = got.iter().cloned().collect();
            assert_eq!(got.len(), 64);
            assert_eq!(set, brute_force_solutions(&AllBits, &x, 128).unwrap());
        }
    }

    #[test]
    fn single_slave_order_is_preserved() {
        let x = AllBitsInstance::new(4);
        let run = run_virtual(&AllBits, &x, noisy, &HarnessConfig::new(1)).unwrap();
        let master: Vec<_> = run.solutions().cloned().collect();
        let slave: Vec<_> = run.slaves[0].records.iter().map(|r| r.solution.clone()).collect();
        assert_eq!(master, slave);
    }

    #[test]
    fn paced_gaps_without_stalls_equal_the_pace() {
        let x = AllBitsInstance::new(9);
        let cfg = HarnessConfig {
            prefill: Some(40),
            ..HarnessConfig::new(4)
        };
        let run = run_virtual(&AllBits, &x, |_| NeverFails(Exactly(AllBitsCounter)), &cfg).unwrap();
        for o in &run.trace.outputs {
            if let Some(g) = &o.gap {
                if !o.stalled {
                    assert_eq!(g, &run.trace.pace);
                } else {
                    assert!(g > &run.trace.pace);
                }
            }
        }
    }

    #[test]
    fn greedy_is_no_slower_than_paced() {
        let x = AllBitsInstance::new(8);
        let paced = run_virtual(&AllBits, &x, noisy, &HarnessConfig::new(2)).unwrap();
        let greedy = run_virtual(
            &AllBits,
            &x,
            noisy,
            &HarnessConfig {
                pacing: Pacing::Greedy { master_cost: 1 },
                ..HarnessConfig::new(2)
            },
        )
        .unwrap();
        assert!(greedy.trace.makespan <= paced.trace.makespan);
    }
}
