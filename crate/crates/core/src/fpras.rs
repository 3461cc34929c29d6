//! Random-order enumeration with a randomized approximate counter.
//!
//! Estimates are memoised per prefix in a [`PrefixDictionary`], so the shift
//! function stays fixed for the whole session even though the counter may
//! answer differently on repeated calls. Acceptance skips the rejection test
//! when `φ* / width` leaves `(1/4, 1)`, which only happens after a counter
//! failure.

use std::collections::{HashMap, HashSet};

use crate::access::{
    check_seed, correction_factor, descend, EpsilonMode, Estimator, Guard, PhantomPolicy, RejectionLoop,
    SessionOptions, SessionStats,
};
use crate::banned::BannedIntervalTree;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::{Count, RandomizedCounter};
use crate::rational::{ExactRational, Interval};
use crate::record::{Clock, EmissionRecord};

pub use crate::access::IntervalHit;

/// Write-once map from prefixes to count estimates.
#[derive(Debug, Clone, Default)]
pub struct PrefixDictionary {
    entries: HashMap<BitString, Count>,
    seeded: HashSet<BitString>,
    hits: u64,
    misses: u64,
}

impl PrefixDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// A dictionary pre-populated with `entries`, which are remembered as
    /// seeded.
    pub fn seeded<I: IntoIterator<Item = (BitString, Count)>>(entries: I) -> Result<Self> {
        let mut d = Self::new();
        for (k, v) in entries {
            d.insert(k.clone(), v)?;
            d.seeded.insert(k);
        }
        Ok(d)
    }

    pub fn get(&self, prefix: &BitString) -> Option<Count> {
        self.entries.get(prefix).copied()
    }

    /// Stores an estimate. Re-inserting the same value is a no-op; a
    /// different value is rejected.
    pub fn insert(&mut self, prefix: BitString, estimate: Count) -> Result<()> {
        match self.entries.get(&prefix) {
            Some(&existing) if existing != estimate => Err(Error::InconsistentEstimate {
                prefix,
                existing,
                proposed: estimate,
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(prefix, estimate);
                Ok(())
            }
        }
    }

    /// Cached estimate for `prefix`, computing and storing it on a miss.
    pub fn get_or_try_insert_with<F>(&mut self, prefix: &BitString, compute: F) -> Result<Count>
    where
        F: FnOnce() -> Result<Count>,
    {
        if let Some(v) = self.get(prefix) {
            self.hits += 1;
            return Ok(v);
        }
        self.misses += 1;
        let v = compute()?;
        self.entries.insert(prefix.clone(), v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn is_seeded(&self, prefix: &BitString) -> bool {
        self.seeded.contains(prefix)
    }

    pub fn seeded_len(&self) -> usize {
        self.seeded.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitString, Count)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// Entries for both children of every proper prefix of `solution`:
    /// `w[1..j]∘0` and `w[1..j]∘1` for `j = 0..|w|`. Missing entries are
    /// skipped.
    pub fn path_entries(&self, solution: &BitString) -> Vec<(BitString, Count)> {
        let mut out = Vec::with_capacity(2 * solution.len());
        for j in 0..solution.len() {
            let parent = solution.prefix(j);
            for bit in [false, true] {
                let child = parent.child(bit);
                if let Some(v) = self.get(&child) {
                    out.push((child, v));
                }
            }
        }
        out
    }
}

/// `2^-(d+1) · δ`.
pub fn failure_budget(depth: usize, delta: &ExactRational) -> ExactRational {
    &ExactRational::pow2_neg(depth as u64 + 1) * delta
}

pub(crate) struct DictEstimates<'o, 'd, C> {
    pub oracle: &'o C,
    pub dict: &'d mut PrefixDictionary,
    pub root_depth: usize,
    pub mode: EpsilonMode,
    pub delta: &'o ExactRational,
    pub midpoint_fallbacks: u64,
}

impl<I, C: RandomizedCounter<I>> Estimator<I> for DictEstimates<'_, '_, C> {
    fn estimate(&mut self, child: &I, prefix: &BitString, remaining: usize) -> Result<Count> {
        let (oracle, mode, d0, delta) = (self.oracle, self.mode, self.root_depth, self.delta);
        self.dict.get_or_try_insert_with(prefix, || {
            let eps = mode.epsilon(d0, remaining);
            let fail = failure_budget(mode.budget_depth(d0, remaining), delta);
            oracle.randomized_count(child, prefix, &eps, &fail)
        })
    }

    fn on_empty_split(&mut self, _parent: &BitString) -> Result<()> {
        self.midpoint_fallbacks += 1;
        Ok(())
    }
}

/// The shift-function lookup `f(r)` with its interval, reading estimates
/// from `dict` and filling it on misses.
pub fn xaccess<P, C>(
    problem: &P,
    oracle: &C,
    x: &P::Instance,
    r: &ExactRational,
    delta: &ExactRational,
    dict: &mut PrefixDictionary,
    mode: EpsilonMode,
) -> Result<IntervalHit>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    check_seed(r)?;
    let mut est = DictEstimates {
        oracle,
        dict,
        root_depth: problem.solution_length(x),
        mode,
        delta,
        midpoint_fallbacks: 0,
    };
    descend(problem, x, r, &mut est)
}

/// Root estimate `C(x, 1/3, 2^-(d+1) δ)`.
pub fn root_estimate<P, C>(problem: &P, oracle: &C, x: &P::Instance, delta: &ExactRational) -> Result<Count>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    let fail = failure_budget(problem.solution_length(x), delta);
    oracle.randomized_count(x, &BitString::empty(), &ExactRational::ratio(1, 3), &fail)
}

fn check_delta(delta: &ExactRational) -> Result<()> {
    if !delta.in_open(&ExactRational::zero(), &ExactRational::one()) {
        return Err(Error::Invalid(format!("δ = {delta} outside (0, 1)")));
    }
    Ok(())
}

pub struct AxaSession<'a, P: SelfReducible, C> {
    problem: &'a P,
    oracle: C,
    x: P::Instance,
    delta: ExactRational,
    opts: SessionOptions,
    depth: usize,
    root_estimate: Option<Count>,
    dict: PrefixDictionary,
    core: Option<RejectionLoop>,
    midpoint_fallbacks: u64,
    failed: bool,
}

impl<'a, P, C> AxaSession<'a, P, C>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    pub fn new(problem: &'a P, oracle: C, x: P::Instance, delta: ExactRational, opts: SessionOptions) -> Result<Self> {
        check_delta(&delta)?;
        let n = root_estimate(problem, &oracle, &x, &delta)?;
        let phi_star = if n == 0 { None } else { Some(correction_factor(n)?) };
        let mut s = Self::build(problem, oracle, x, delta, opts, phi_star, PrefixDictionary::new());
        s.root_estimate = Some(n);
        Ok(s)
    }

    /// A session confined to `range`, with `φ*` and a starting dictionary
    /// supplied by the caller. Everything outside `range` is banned up front.
    pub fn for_range(
        problem: &'a P,
        oracle: C,
        x: P::Instance,
        delta: ExactRational,
        opts: SessionOptions,
        range: &Interval,
        phi_star: ExactRational,
        dict: PrefixDictionary,
    ) -> Result<Self> {
        check_delta(&delta)?;
        let mut s = Self::build(problem, oracle, x, delta, opts, Some(phi_star), dict);
        if let Some(core) = &mut s.core {
            core.restrict(range)?;
        }
        Ok(s)
    }

    fn build(
        problem: &'a P,
        oracle: C,
        x: P::Instance,
        delta: ExactRational,
        opts: SessionOptions,
        phi_star: Option<ExactRational>,
        dict: PrefixDictionary,
    ) -> Self {
        let depth = problem.solution_length(&x);
        let core = phi_star.map(|p| RejectionLoop::new(p, depth, &opts, Guard::Widened, PhantomPolicy::Ban));
        Self {
            problem,
            oracle,
            x,
            delta,
            opts,
            depth,
            root_estimate: None,
            dict,
            core,
            midpoint_fallbacks: 0,
            failed: false,
        }
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        if let Some(core) = &mut self.core {
            core.set_clock(clock);
        }
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `None` for range-confined sessions, which never estimate the root.
    pub fn root_estimate(&self) -> Option<Count> {
        self.root_estimate
    }

    pub fn phi_star(&self) -> Option<&ExactRational> {
        self.core.as_ref().map(RejectionLoop::phi_star)
    }

    pub fn available(&self) -> ExactRational {
        self.core
            .as_ref()
            .map_or_else(ExactRational::zero, |c| c.available().clone())
    }

    pub fn dictionary(&self) -> &PrefixDictionary {
        &self.dict
    }

    pub fn banned(&self) -> Option<&BannedIntervalTree> {
        self.core.as_ref().map(RejectionLoop::banned)
    }

    pub fn stats(&self) -> SessionStats {
        let mut s = self.core.as_ref().map(|c| c.stats.clone()).unwrap_or_default();
        s.midpoint_fallbacks = self.midpoint_fallbacks;
        s
    }

    /// Re-runs the lookup for `r` against the session's dictionary. Used to
    /// check that the partition has not moved.
    pub fn lookup(&mut self, r: &ExactRational) -> Result<IntervalHit> {
        xaccess(
            self.problem,
            &self.oracle,
            &self.x,
            r,
            &self.delta,
            &mut self.dict,
            self.opts.epsilon_mode,
        )
    }

    fn step(&mut self) -> Result<Option<EmissionRecord>> {
        let Some(core) = self.core.as_mut() else {
            return Ok(None);
        };
        let (problem, x) = (self.problem, &self.x);
        let mut est = DictEstimates {
            oracle: &self.oracle,
            dict: &mut self.dict,
            root_depth: self.depth,
            mode: self.opts.epsilon_mode,
            delta: &self.delta,
            midpoint_fallbacks: 0,
        };
        let out = core.next(
            |r| descend(problem, x, r, &mut est),
            |w| problem.is_solution(x, w),
        );
        self.midpoint_fallbacks += est.midpoint_fallbacks;
        out
    }
}

impl<P, C> Iterator for AxaSession<'_, P, C>
where
    P: SelfReducible,
    C: RandomizedCounter<P::Instance>,
{
    type Item = Result<EmissionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.step() {
            Ok(rec) => rec.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}
