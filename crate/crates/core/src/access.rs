//! Interval access by quasi-pivot descent, and the rejection loop shared by
//! the approximate-counting enumerators.
//!
//! A descent maps a seed `r ∈ [0, 1)` to a solution by walking the
//! self-reduction tree. At each level the current interval `[l, h)` is split
//! at `l + n0 / (n0 + n1) · (h - l)`, where `n0` and `n1` are estimated
//! counts of the two children, and the walk follows the side containing `r`.
//! The leaves partition `[0, 1)`; a solution's leaf is its interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::banned::BannedIntervalTree;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::{ApproxCounter, Count};
use crate::rational::{ExactRational, Interval};
use crate::record::{Clock, EmissionRecord, VirtualClock};
use crate::sampling::bernoulli_below;

/// A solution together with its interval under the shift function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalHit {
    pub solution: BitString,
    pub interval: Interval,
}

impl IntervalHit {
    pub fn width(&self) -> ExactRational {
        self.interval.width()
    }
}

/// Which accuracy the descent requests at each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonMode {
    /// `1 / (8 d0)` at every level, `d0` the root solution length.
    #[default]
    Proof,
    /// `1 / (8 d)` with `d` the remaining length at the current level.
    Literal,
}

impl EpsilonMode {
    /// Accuracy for a split taken with `remaining` symbols still to decide.
    pub fn epsilon(self, root_depth: usize, remaining: usize) -> ExactRational {
        let d = match self {
            Self::Proof => root_depth,
            Self::Literal => remaining,
        };
        ExactRational::ratio(1, 8 * d.max(1) as i64)
    }

    /// Depth used for the per-call failure budget `2^-(d+1) δ`.
    pub fn budget_depth(self, root_depth: usize, remaining: usize) -> usize {
        match self {
            Self::Proof => root_depth,
            Self::Literal => remaining,
        }
    }
}

impl std::str::FromStr for EpsilonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proof" => Ok(Self::Proof),
            "literal" => Ok(Self::Literal),
            _ => Err(Error::Parse(format!("epsilon mode {s:?}: expected proof or literal"))),
        }
    }
}

/// Source of child-count estimates during a descent.
pub(crate) trait Estimator<I> {
    /// Estimate for `child = Ψ(x, prefix)`; `remaining` is the number of
    /// symbols left to decide at the parent.
    fn estimate(&mut self, child: &I, prefix: &BitString, remaining: usize) -> Result<Count>;

    /// Both children of `parent` were estimated at 0. Returning `Ok` splits at
    /// the midpoint instead.
    fn on_empty_split(&mut self, parent: &BitString) -> Result<()>;
}

pub(crate) fn descend<P, E>(
    problem: &P,
    x: &P::Instance,
    r: &ExactRational,
    estimator: &mut E,
) -> Result<IntervalHit>
where
    P: SelfReducible,
    E: Estimator<P::Instance>,
{
    descend_within(problem, x, r, Interval::unit(), estimator)
}

fn descend_within<P, E>(
    problem: &P,
    x: &P::Instance,
    r: &ExactRational,
    start: Interval,
    estimator: &mut E,
) -> Result<IntervalHit>
where
    P: SelfReducible,
    E: Estimator<P::Instance>,
{
    let depth = problem.solution_length(x);
    let Interval { mut lo, mut hi } = start;
    debug_assert!(lo <= *r && *r < hi);
    let mut prefix = BitString::empty();
    let mut current = x.clone();
    for level in 0..depth {
        let remaining = depth - level;
        let zero = problem.reduce_bit(&current, false);
        let one = problem.reduce_bit(&current, true);
        let n0 = estimator.estimate(&zero, &prefix.child(false), remaining)?;
        let n1 = estimator.estimate(&one, &prefix.child(true), remaining)?;
        let span = &hi - &lo;
        let pivot = if n0 + n1 == 0 {
            estimator.on_empty_split(&prefix)?;
            &lo + &(&span * &ExactRational::ratio(1, 2))
        } else {
            let frac = ExactRational::new(n0, n0 + n1)?;
            &lo + &(&span * &frac)
        };
        let bit = *r >= pivot;
        if bit {
            lo = pivot;
            current = one;
        } else {
            hi = pivot;
            current = zero;
        }
        prefix.push(bit);
    }
    Ok(IntervalHit {
        solution: prefix,
        interval: Interval::new(lo, hi),
    })
}

/// Deterministic estimates from an approximate counter.
pub(crate) struct ApproxEstimates<'o, B> {
    pub oracle: &'o B,
    pub root_depth: usize,
    pub mode: EpsilonMode,
}

impl<I, B: ApproxCounter<I>> Estimator<I> for ApproxEstimates<'_, B> {
    fn estimate(&mut self, child: &I, prefix: &BitString, remaining: usize) -> Result<Count> {
        let eps = self.mode.epsilon(self.root_depth, remaining);
        self.oracle.approx_count(child, prefix, &eps)
    }

    fn on_empty_split(&mut self, parent: &BitString) -> Result<()> {
        Err(Error::EmptyBranch {
            prefix: parent.clone(),
        })
    }
}

/// The shift-function lookup `f(r)` with its interval, using an approximate
/// counter at the accuracy chosen by `mode`.
pub fn iaccess<P, B>(
    problem: &P,
    oracle: &B,
    x: &P::Instance,
    r: &ExactRational,
    mode: EpsilonMode,
) -> Result<IntervalHit>
where
    P: SelfReducible,
    B: ApproxCounter<P::Instance>,
{
    check_seed(r)?;
    let mut est = ApproxEstimates {
        oracle,
        root_depth: problem.solution_length(x),
        mode,
    };
    descend(problem, x, r, &mut est)
}

pub(crate) fn check_seed(r: &ExactRational) -> Result<()> {
    if r.is_negative() || *r >= ExactRational::one() {
        return Err(Error::Invalid(format!("seed {r} outside [0, 1)")));
    }
    Ok(())
}

/// `φ* = (4/9) / root_estimate`.
pub fn correction_factor(root_estimate: Count) -> Result<ExactRational> {
    if root_estimate == 0 {
        return Err(Error::Invalid("correction factor of an empty instance".into()));
    }
    Ok(&ExactRational::ratio(4, 9) / &ExactRational::from(root_estimate))
}

/// Tuning knobs shared by the rejection-sampling enumerators.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub seed: u64,
    pub epsilon_mode: EpsilonMode,
    /// Random bits per seed draw; defaults to `ζ(x) + 128`.
    pub precision_bits: Option<u64>,
    /// Attempts allowed per emission; defaults to `max(64 ζ(x), 64)`.
    pub attempt_cap: Option<u64>,
}

impl SessionOptions {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn with_epsilon_mode(mut self, mode: EpsilonMode) -> Self {
        self.epsilon_mode = mode;
        self
    }

    pub(crate) fn precision_for(&self, depth: usize) -> u64 {
        self.precision_bits.unwrap_or(depth as u64 + 128)
    }

    pub(crate) fn cap_for(&self, depth: usize) -> u64 {
        self.attempt_cap.unwrap_or((64 * depth as u64).max(64))
    }
}

/// Counters collected by a rejection-sampling session.
#[derive(Debug, Clone, Default)]
pub struct SessionStats {
    pub attempts: u64,
    pub emissions: u64,
    /// Smallest and largest acceptance ratio `φ* / width` seen on any attempt.
    pub min_ratio: Option<ExactRational>,
    pub max_ratio: Option<ExactRational>,
    /// Attempts whose ratio fell outside `(1/4, 1)`.
    pub ratio_out_of_range: u64,
    /// Emissions made without the rejection test because the ratio was out of
    /// range.
    pub guard_bypasses: u64,
    /// Leaves reached that were not solutions; their intervals were banned.
    pub phantom_leaves: u64,
    pub phantom_width: ExactRational,
    /// Splits where both children were estimated at 0.
    pub midpoint_fallbacks: u64,
}

impl SessionStats {
    fn observe_ratio(&mut self, ratio: &ExactRational) -> bool {
        if self.min_ratio.as_ref().is_none_or(|m| ratio < m) {
            self.min_ratio = Some(ratio.clone());
        }
        if self.max_ratio.as_ref().is_none_or(|m| ratio > m) {
            self.max_ratio = Some(ratio.clone());
        }
        let in_range = ratio.in_open(&ExactRational::ratio(1, 4), &ExactRational::one());
        if !in_range {
            self.ratio_out_of_range += 1;
        }
        in_range
    }

    pub fn mean_attempts(&self) -> f64 {
        if self.emissions == 0 {
            0.0
        } else {
            self.attempts as f64 / self.emissions as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Guard {
    /// Always run the rejection test.
    Strict,
    /// Skip the test when the ratio is outside `(1/4, 1)`.
    Widened,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PhantomPolicy {
    Fail,
    Ban,
}

/// Seed generation, banning, and the accept/reject step. Owns everything a
/// session mutates except the estimate source.
pub(crate) struct RejectionLoop {
    banned: BannedIntervalTree,
    available: ExactRational,
    phi_star: ExactRational,
    precision_bits: u64,
    attempt_cap: u64,
    guard: Guard,
    phantoms: PhantomPolicy,
    rng: ChaCha8Rng,
    clock: Box<dyn Clock>,
    last_tick: u64,
    pub stats: SessionStats,
}

impl RejectionLoop {
    pub fn new(
        phi_star: ExactRational,
        depth: usize,
        opts: &SessionOptions,
        guard: Guard,
        phantoms: PhantomPolicy,
    ) -> Self {
        Self {
            banned: BannedIntervalTree::new(),
            available: ExactRational::one(),
            phi_star,
            precision_bits: opts.precision_for(depth),
            attempt_cap: opts.cap_for(depth),
            guard,
            phantoms,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            clock: Box::new(VirtualClock::default()),
            last_tick: 0,
            stats: SessionStats::default(),
        }
    }

    /// Bans everything outside `range`.
    pub fn restrict(&mut self, range: &Interval) -> Result<()> {
        let zero = ExactRational::zero();
        let one = ExactRational::one();
        if range.lo.is_negative() || range.hi > one || range.is_empty() {
            return Err(Error::Invalid(format!("range {range} not inside [0, 1)")));
        }
        for part in [
            Interval::new(zero, range.lo.clone()),
            Interval::new(range.hi.clone(), one),
        ] {
            if !part.is_empty() {
                self.ban(part)?;
            }
        }
        Ok(())
    }

    pub fn set_clock(&mut self, clock: Box<dyn Clock>) {
        self.last_tick = clock.now();
        self.clock = clock;
    }

    pub fn available(&self) -> &ExactRational {
        &self.available
    }

    pub fn banned(&self) -> &BannedIntervalTree {
        &self.banned
    }

    pub fn phi_star(&self) -> &ExactRational {
        &self.phi_star
    }

    fn ban(&mut self, interval: Interval) -> Result<()> {
        let w = interval.width();
        self.banned.insert(interval)?;
        self.available -= &w;
        Ok(())
    }

    /// Draws seeds until one is accepted. `None` once nothing is left.
    pub fn next<A, S>(&mut self, mut access: A, is_solution: S) -> Result<Option<EmissionRecord>>
    where
        A: FnMut(&ExactRational) -> Result<IntervalHit>,
        S: Fn(&BitString) -> bool,
    {
        let mut attempts = 0u64;
        loop {
            if !self.available.is_positive() {
                return Ok(None);
            }
            if attempts >= self.attempt_cap {
                return Err(Error::NonTerminating { attempts });
            }
            attempts += 1;
            self.stats.attempts += 1;
            self.clock.on_attempt();
            let r = self
                .banned
                .generate_seed(&self.available, &mut self.rng, self.precision_bits)?;
            let hit = access(&r)?;
            if !hit.interval.contains(&r) {
                return Err(Error::OracleContract(format!(
                    "seed {r} outside returned interval {}",
                    hit.interval
                )));
            }
            if !is_solution(&hit.solution) {
                match self.phantoms {
                    PhantomPolicy::Fail => {
                        return Err(Error::OracleContract(format!(
                            "descent reached non-solution {}",
                            hit.solution
                        )))
                    }
                    PhantomPolicy::Ban => {
                        self.stats.phantom_leaves += 1;
                        self.stats.phantom_width += &hit.width();
                        self.ban(hit.interval)?;
                        continue;
                    }
                }
            }
            let ratio = &self.phi_star / &hit.width();
            let in_range = self.stats.observe_ratio(&ratio);
            let accept = if self.guard == Guard::Widened && !in_range {
                self.stats.guard_bypasses += 1;
                true
            } else {
                bernoulli_below(&mut self.rng, &ratio)
            };
            if accept {
                self.ban(hit.interval.clone())?;
                self.stats.emissions += 1;
                let tick = self.clock.now();
                let record = EmissionRecord {
                    index: self.stats.emissions,
                    solution: hit.solution,
                    interval: hit.interval,
                    attempts,
                    tick,
                    delay: tick - self.last_tick,
                };
                self.last_tick = tick;
                return Ok(Some(record));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Exactly;
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance, Knapsack, KnapsackCounter, KnapsackInstance};

    fn q(n: i64, d: i64) -> ExactRational {
        ExactRational::ratio(n, d)
    }

    #[test]
    fn allbits_midpoints() {
        let hit = iaccess(
            &AllBits,
            &Exactly(AllBitsCounter),
            &AllBitsInstance::new(2),
            &q(5, 8),
            EpsilonMode::Proof,
        )
        .unwrap();
        assert_eq!(hit.solution.to_string(), "10");
        assert_eq!(hit.interval, Interval::new(q(1, 2), q(3, 4)));
    }

    #[test]
    fn knapsack_first_interval() {
        // oracle: the all-zero leaf's width is the product over levels of
        // |Sol with prefix 0^(k+1)| / |Sol with prefix 0^k|, counted by brute force
        let x = KnapsackInstance::new(3, vec![1, 2, 3]);
        let sols = crate::model::brute_force_solutions(&Knapsack, &x, 1 << 10).unwrap();
        let with_prefix = |k: usize| sols.iter().filter(|s| s.bits()[..k].iter().all(|b| !b)).count() as i64;
        let expected = (0..3).fold(q(1, 1), |w, k| &w * &q(with_prefix(k + 1), with_prefix(k)));
        let hit = iaccess(&Knapsack, &Exactly(KnapsackCounter::default()), &x, &q(0, 1), EpsilonMode::Proof)
            .unwrap();
        assert_eq!(hit.solution.to_string(), "000");
        assert_eq!(hit.interval, Interval::new(q(0, 1), expected));
    }

    #[test]
    fn empty_instance_has_no_branch() {
        let x = KnapsackInstance::new(0, vec![1, 1]);
        // only "00" survives; a seed in the upper part never exists
        let hit = iaccess(&Knapsack, &Exactly(KnapsackCounter::default()), &x, &q(99, 100), EpsilonMode::Proof)
            .unwrap();
        assert_eq!(hit.solution.to_string(), "00");
        assert_eq!(hit.interval, Interval::unit());
    }

    #[test]
    fn seed_must_be_in_unit_interval() {
        let err = iaccess(&AllBits, &Exactly(AllBitsCounter), &AllBitsInstance::new(2), &q(1, 1), EpsilonMode::Proof);
        assert!(err.is_err());
    }

    #[test]
    fn epsilon_modes() {
        assert_eq!(EpsilonMode::Proof.epsilon(5, 2), q(1, 40));
        assert_eq!(EpsilonMode::Literal.epsilon(5, 2), q(1, 16));
        assert_eq!("literal".parse::<EpsilonMode>().unwrap(), EpsilonMode::Literal);
        assert!("other".parse::<EpsilonMode>().is_err());
    }

    #[test]
    fn restrict_bans_the_outside() {
        let mut l = RejectionLoop::new(q(4, 9), 3, &SessionOptions::default(), Guard::Strict, PhantomPolicy::Fail);
        l.restrict(&Interval::new(q(1, 4), q(1, 2))).unwrap();
        assert_eq!(l.available(), &q(1, 4));
        assert_eq!(l.banned().len(), 2);
        let mut l = RejectionLoop::new(q(4, 9), 3, &SessionOptions::default(), Guard::Strict, PhantomPolicy::Fail);
        l.restrict(&Interval::unit()).unwrap();
        assert!(l.banned().is_empty());
    }
}
