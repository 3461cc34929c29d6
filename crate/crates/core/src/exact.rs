//! Random-order enumeration with an exact counter: draw indices from a lazy
//! Fisher-Yates shuffle and unrank each one lexicographically.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::{Count, ExactCounter};
use crate::rational::{ExactRational, Interval};
use crate::record::{Clock, EmissionRecord, VirtualClock};

/// A uniformly random permutation of `1..=total`, produced one value at a
/// time. Only swapped slots are stored, so memory is proportional to the
/// number of values drawn.
#[derive(Debug, Clone)]
pub struct SparsePermutation {
    total: Count,
    next_slot: Count,
    displaced: HashMap<Count, Count>,
}

impl SparsePermutation {
    pub fn new(total: Count) -> Self {
        Self {
            total,
            next_slot: 0,
            displaced: HashMap::new(),
        }
    }

    pub fn total(&self) -> Count {
        self.total
    }

    pub fn remaining(&self) -> Count {
        self.total - self.next_slot
    }

    /// Number of stored displacements.
    pub fn stored(&self) -> usize {
        self.displaced.len()
    }

    fn at(&self, slot: Count) -> Count {
        self.displaced.get(&slot).copied().unwrap_or(slot)
    }

    /// Next value in `1..=total`, or `None` once all have been drawn.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Count> {
        if self.next_slot >= self.total {
            return None;
        }
        let slot = self.next_slot;
        let pick = rng.gen_range(slot..self.total);
        let value = self.at(pick);
        if pick != slot {
            let moved = self.at(slot);
            self.displaced.insert(pick, moved);
        }
        self.displaced.remove(&slot);
        self.next_slot += 1;
        Some(value + 1)
    }
}

/// Walks down from `x` to the `i`-th solution (1-based), assuming
/// `1 <= i <= |Sol(x)|`. One oracle call per level.
fn unrank<P, A>(problem: &P, oracle: &A, x: &P::Instance, mut i: Count) -> Result<BitString>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
{
    let depth = problem.solution_length(x);
    let mut current = x.clone();
    let mut out = BitString::empty();
    for _ in 0..depth {
        let zero = problem.reduce_bit(&current, false);
        let n0 = oracle.count(&zero)?;
        if i <= n0 {
            current = zero;
            out.push(false);
        } else {
            i -= n0;
            current = problem.reduce_bit(&current, true);
            out.push(true);
        }
    }
    Ok(out)
}

/// The `i`-th solution of `x` in lexicographic order, 1-based. `None` when
/// `i` is 0 or exceeds the number of solutions.
pub fn raccess<P, A>(problem: &P, oracle: &A, x: &P::Instance, i: Count) -> Result<Option<BitString>>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
{
    let total = oracle.count(x)?;
    if i == 0 || i > total {
        return Ok(None);
    }
    unrank(problem, oracle, x, i).map(Some)
}

/// Exact-counting enumerator. Each emission costs one unranking.
pub struct AraSession<'a, P: SelfReducible, A> {
    problem: &'a P,
    oracle: A,
    x: P::Instance,
    total: Count,
    perm: SparsePermutation,
    rng: ChaCha8Rng,
    clock: Box<dyn Clock>,
    last_tick: u64,
    emitted: u64,
    failed: bool,
}

impl<'a, P, A> AraSession<'a, P, A>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
{
    pub fn new(problem: &'a P, oracle: A, x: P::Instance, seed: u64) -> Result<Self> {
        let total = oracle.count(&x)?;
        Ok(Self {
            problem,
            oracle,
            x,
            total,
            perm: SparsePermutation::new(total),
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Box::new(VirtualClock::default()),
            last_tick: 0,
            emitted: 0,
            failed: false,
        })
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.last_tick = clock.now();
        self.clock = clock;
        self
    }

    pub fn total(&self) -> Count {
        self.total
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    fn step(&mut self) -> Result<Option<EmissionRecord>> {
        let Some(i) = self.perm.next(&mut self.rng) else {
            return Ok(None);
        };
        self.clock.on_attempt();
        let solution = unrank(self.problem, &self.oracle, &self.x, i)?;
        if !self.problem.is_solution(&self.x, &solution) {
            return Err(Error::OracleContract(format!(
                "index {i} unranked to non-solution {solution}"
            )));
        }
        let n = ExactRational::from(self.total);
        let interval = Interval::new(
            &ExactRational::from(i - 1) / &n,
            &ExactRational::from(i) / &n,
        );
        self.emitted += 1;
        let tick = self.clock.now();
        let record = EmissionRecord {
            index: self.emitted,
            solution,
            interval,
            attempts: 1,
            tick,
            delay: tick - self.last_tick,
        };
        self.last_tick = tick;
        Ok(Some(record))
    }
}

impl<P, A> Iterator for AraSession<'_, P, A>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
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

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashMap};

    use super::*;
    use crate::model::brute_force_solutions;
    use crate::oracle::CallCounter;
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance, Knapsack, KnapsackCounter, KnapsackInstance};
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn raccess_examples() {
        let x = AllBitsInstance::new(2);
        assert_eq!(raccess(&AllBits, &AllBitsCounter, &x, 3).unwrap(), Some(bs("10")));
        let k = KnapsackInstance::new(3, vec![1, 2, 3]);
        let c = KnapsackCounter::default();
        assert_eq!(raccess(&Knapsack, &c, &k, 1).unwrap(), Some(bs("000")));
        assert_eq!(raccess(&Knapsack, &c, &k, 6).unwrap(), None);
        assert_eq!(raccess(&Knapsack, &c, &k, 0).unwrap(), None);
    }

    #[test]
    fn raccess_walks_brute_force_in_order() {
        let k = KnapsackInstance::new(7, vec![3, 1, 4, 1, 5, 2]);
        let c = KnapsackCounter::default();
        let expected: Vec<_> = brute_force_solutions(&Knapsack, &k, 1 << 10).unwrap().into_iter().collect();
        let got: Vec<_> = (1..=expected.len() as u128)
            .map(|i| raccess(&Knapsack, &c, &k, i).unwrap().unwrap())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_string_instance() {
        let got: Vec<_> = AraSession::new(&AllBits, AllBitsCounter, AllBitsInstance::new(0), 1)
            .unwrap()
            .map(|r| r.unwrap().solution)
            .collect();
        assert_eq!(got, vec![BitString::empty()]);
    }

    #[test]
    fn knapsack_emits_brute_force_set() {
        let k = KnapsackInstance::new(3, vec![1, 2, 3]);
        let got: BTreeSet<_> = AraSession::new(&Knapsack, KnapsackCounter::default(), k.clone(), 9)
            .unwrap()
            .map(|r| r.unwrap().solution)
            .collect();
        assert_eq!(got, brute_force_solutions(&Knapsack, &k, 64).unwrap());
    }

    #[test]
    fn one_oracle_call_per_level() {
        let x = AllBitsInstance::new(6);
        let oracle = CallCounter::new(AllBitsCounter);
        let mut session = AraSession::new(&AllBits, &oracle, x, 4).unwrap();
        assert_eq!(oracle.calls(), 1);
        for _ in 0..64 {
            oracle.reset();
            session.next().unwrap().unwrap();
            assert_eq!(oracle.calls(), 6);
        }
        assert!(session.next().is_none());
    }

    #[test]
    fn all_orders_equally_likely() {
        // 24 orders of 4 solutions; 48k runs, chi-square with 23 dof
        let runs = 48_000;
        let mut freq: HashMap<Vec<BitString>, u64> = HashMap::new();
        for seed in 0..runs {
            let order: Vec<_> = AraSession::new(&AllBits, AllBitsCounter, AllBitsInstance::new(2), seed)
                .unwrap()
                .map(|r| r.unwrap().solution)
                .collect();
            *freq.entry(order).or_default() += 1;
        }
        assert_eq!(freq.len(), 24);
        let expected = runs as f64 / 24.0;
        let chi2: f64 = freq.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 0.999 quantile of chi-square(23) is about 49.7
        assert!(chi2 < 49.7, "chi2 = {chi2}");
    }

    #[test]
    fn intervals_tile_by_index() {
        let recs: Vec<_> = AraSession::new(&AllBits, AllBitsCounter, AllBitsInstance::new(3), 2)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        let sum = recs.iter().fold(ExactRational::zero(), |acc, r| &acc + &r.width());
        assert_eq!(sum, ExactRational::one());
    }

    #[test]
    fn first_draw_is_uniform() {
        let n = 10u128;
        let runs = 5_000u64;
        let mut counts = vec![0u64; n as usize];
        for seed in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = SparsePermutation::new(n).next(&mut rng).unwrap();
            counts[(v - 1) as usize] += 1;
        }
        let e = runs as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 0.999 quantile of chi-square(9) is about 27.9
        assert!(chi2 < 27.9, "chi2 = {chi2}");
    }

    #[test]
    fn huge_range_stays_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = SparsePermutation::new(1u128 << 100);
        for _ in 0..1000 {
            let v = p.next(&mut rng).unwrap();
            assert!(v >= 1 && v <= 1u128 << 100);
        }
        assert!(p.stored() <= 1000);
    }

    proptest! {
        #[test]
        fn permutation_is_a_bijection(n in 0u128..300, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = SparsePermutation::new(n);
            let mut seen = BTreeSet::new();
            while let Some(v) = p.next(&mut rng) {
                prop_assert!(v >= 1 && v <= n);
                prop_assert!(seen.insert(v));
            }
            prop_assert_eq!(seen.len() as u128, n);
            prop_assert_eq!(p.stored(), 0);
        }
    }
}
