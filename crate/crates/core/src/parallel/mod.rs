//! Master/slave parallel enumeration.
//!
//! The master splits `[0, 1)` into `m` contiguous ranges along solution
//! interval boundaries and hands each slave its range, the shared correction
//! factor, and the dictionary entries it may share with its neighbours. Each
//! slave runs a range-confined FPRAS session. The master keeps one queue per
//! slave and outputs from queue `i` with probability proportional to the
//! range length `L_i` not yet output.
//!
//! [`sim`] replays this under a virtual clock; [`transport`] runs it over
//! threads or TCP.

pub mod master;
pub mod sim;
pub mod transport;

use serde::{Deserialize, Serialize};

use crate::access::{correction_factor, EpsilonMode, IntervalHit, SessionOptions, SessionStats};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::fpras::{root_estimate, xaccess, AxaSession, PrefixDictionary};
use crate::model::SelfReducible;
use crate::oracle::{Count, RandomizedCounter};
use crate::rational::{ExactRational, Interval};
use crate::record::EmissionRecord;

pub use master::{prefill_target, MasterQueues};
pub use transport::Message;

/// Everything a slave needs to start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeAssignment {
    /// 1-based.
    pub slave: usize,
    pub range: Interval,
    pub phi_star: ExactRational,
    pub delta: ExactRational,
    /// Estimates for the children of every prefix of the boundary solutions
    /// adjacent to `range`.
    pub dictionary: Vec<(BitString, Count)>,
}

/// Result of the master's first phase.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Empty when the root estimate is 0.
    pub assignments: Vec<RangeAssignment>,
    pub root_estimate: Count,
    /// `f(i/m)` for `i = 1..m-1`.
    pub boundaries: Vec<IntervalHit>,
    pub dictionary: PrefixDictionary,
}

impl Partition {
    pub fn ranges(&self) -> impl Iterator<Item = &Interval> {
        self.assignments.iter().map(|a| &a.range)
    }
}

/// Splits `[0, 1)` into `m` ranges at the lower endpoints of
/// `f(1/m), ..., f((m-1)/m)`, so every solution interval lies inside exactly
/// one range. The boundary solution `f(i/m)` belongs to slave `i + 1`.
pub fn master_phase1<P, C>(
    problem: &P,
    oracle: &C,
    x: &P::Instance,
    delta: &ExactRational,
    m: usize,
    mode: EpsilonMode,
) -> Result<Partition>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    if m == 0 {
        return Err(Error::Invalid("at least one slave is required".into()));
    }
    if !delta.in_open(&ExactRational::zero(), &ExactRational::one()) {
        return Err(Error::Invalid(format!("δ = {delta} outside (0, 1)")));
    }
    let root = root_estimate(problem, oracle, x, delta)?;
    let mut dict = PrefixDictionary::new();
    if root == 0 {
        return Ok(Partition {
            assignments: Vec::new(),
            root_estimate: 0,
            boundaries: Vec::new(),
            dictionary: dict,
        });
    }
    let phi_star = correction_factor(root)?;
    let mut boundaries = Vec::with_capacity(m - 1);
    for i in 1..m {
        let r = ExactRational::ratio(i as i64, m as i64);
        boundaries.push(xaccess(problem, oracle, x, &r, delta, &mut dict, mode)?);
    }
    let mut cuts = vec![ExactRational::zero()];
    cuts.extend(boundaries.iter().map(|b| b.interval.lo.clone()));
    cuts.push(ExactRational::one());

    let mut assignments = Vec::with_capacity(m);
    for i in 0..m {
        let range = Interval::new(cuts[i].clone(), cuts[i + 1].clone());
        if range.is_empty() {
            return Err(Error::DegeneratePartition { slave: i + 1 });
        }
        let mut piece: Vec<(BitString, Count)> = Vec::new();
        // boundary solutions at the bottom and top of this range
        let adjacent = [i.checked_sub(1), (i < m - 1).then_some(i)];
        for b in adjacent.into_iter().flatten() {
            for entry in dict.path_entries(&boundaries[b].solution) {
                if !piece.contains(&entry) {
                    piece.push(entry);
                }
            }
        }
        piece.sort();
        assignments.push(RangeAssignment {
            slave: i + 1,
            range,
            phi_star: phi_star.clone(),
            delta: delta.clone(),
            dictionary: piece,
        });
    }
    Ok(Partition {
        assignments,
        root_estimate: root,
        boundaries,
        dictionary: dict,
    })
}

/// The range-confined session a slave runs for `assignment`.
pub fn slave_session<'a, P, C>(
    problem: &'a P,
    oracle: C,
    x: P::Instance,
    assignment: &RangeAssignment,
    opts: SessionOptions,
) -> Result<AxaSession<'a, P, C>>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    let dict = PrefixDictionary::seeded(assignment.dictionary.iter().cloned())?;
    AxaSession::for_range(
        problem,
        oracle,
        x,
        assignment.delta.clone(),
        opts,
        &assignment.range,
        assignment.phi_star.clone(),
        dict,
    )
}

/// What a slave reports after finishing.
#[derive(Debug, Clone)]
pub struct SlaveSummary {
    pub slave: usize,
    pub emitted: u64,
    /// Width banned without emission (leaves that were not solutions).
    pub discarded: ExactRational,
    pub stats: SessionStats,
    pub dictionary: PrefixDictionary,
}

/// Runs slave `assignment.slave` to completion, passing each emission to
/// `send` and finishing with a `Done` message.
pub fn slave_run<P, C, S>(
    problem: &P,
    oracle: C,
    x: P::Instance,
    assignment: &RangeAssignment,
    opts: SessionOptions,
    mut send: S,
) -> Result<SlaveSummary>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
    S: FnMut(Message) -> Result<()>,
{
    let slave = assignment.slave;
    let mut session = slave_session(problem, oracle, x, assignment, opts)?;
    let mut emitted = 0;
    for rec in session.by_ref() {
        send(Message::Emission { slave, record: rec? })?;
        emitted += 1;
    }
    let stats = session.stats();
    let discarded = stats.phantom_width.clone();
    send(Message::Done {
        slave,
        emitted,
        discarded: discarded.clone(),
    })?;
    Ok(SlaveSummary {
        slave,
        emitted,
        discarded,
        stats,
        dictionary: session.dictionary().clone(),
    })
}

/// Slave output collected in-process, in emission order.
#[derive(Debug, Clone)]
pub struct SlaveOutput {
    pub records: Vec<EmissionRecord>,
    pub summary: SlaveSummary,
}

/// Runs every slave of `partition` sequentially in this thread. `oracle_for`
/// gives each worker its own counter; worker `i` is slave `i`.
pub fn run_slaves<P, C, F>(
    problem: &P,
    x: &P::Instance,
    partition: &Partition,
    oracle_for: F,
    opts: &SessionOptions,
) -> Result<Vec<SlaveOutput>>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
    F: Fn(usize) -> C,
{
    partition
        .assignments
        .iter()
        .map(|a| {
            let mut records = Vec::new();
            let o = SessionOptions {
                seed: worker_seed(opts.seed, a.slave),
                ..opts.clone()
            };
            let summary = slave_run(problem, oracle_for(a.slave), x.clone(), a, o, |msg| {
                if let Message::Emission { record, .. } = msg {
                    records.push(record);
                }
                Ok(())
            })?;
            Ok(SlaveOutput { records, summary })
        })
        .collect()
}

/// Per-worker RNG seed derived from a run seed.
pub fn worker_seed(seed: u64, worker: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ (worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Checks that estimates the master and slaves both hold agree, and that no
/// slave's dictionary lost a seeded entry. Returns the number of shared
/// prefixes compared.
pub fn check_dictionary_agreement(master: &PrefixDictionary, slaves: &[&PrefixDictionary]) -> Result<usize> {
    let mut compared = 0;
    for d in slaves {
        for (prefix, v) in d.iter() {
            if let Some(m) = master.get(prefix) {
                compared += 1;
                if m != v {
                    return Err(Error::InconsistentEstimate {
                        prefix: prefix.clone(),
                        existing: m,
                        proposed: v,
                    });
                }
            }
        }
    }
    Ok(compared)
}
