//! Sampling-without-replacement baseline: draw a uniform index, unrank it,
//! and discard solutions already emitted. The expected attempts for the
//! `i`-th emission grow like `M / (M - i + 1)`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::exact::raccess;
use crate::model::SelfReducible;
use crate::oracle::{Count, ExactCounter};
use crate::parallel::worker_seed;
use crate::rational::{ExactRational, Interval};
use crate::record::{Clock, EmissionRecord, VirtualClock};

/// One uniform draw: a 1-based index and its solution.
fn draw<P, A, R>(problem: &P, oracle: &A, x: &P::Instance, total: Count, rng: &mut R) -> Result<(Count, BitString)>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
    R: Rng + ?Sized,
{
    let i = rng.gen_range(1..=total);
    let w = raccess(problem, oracle, x, i)?
        .ok_or_else(|| Error::OracleContract(format!("index {i} of {total} has no solution")))?;
    Ok((i, w))
}

fn index_interval(i: Count, total: Count) -> Interval {
    let n = ExactRational::from(total);
    Interval::new(&ExactRational::from(i - 1) / &n, &ExactRational::from(i) / &n)
}

pub struct SworSession<'a, P: SelfReducible, A> {
    problem: &'a P,
    oracle: A,
    x: P::Instance,
    total: Count,
    seen: HashSet<BitString>,
    rng: ChaCha8Rng,
    clock: Box<dyn Clock>,
    last_tick: u64,
    draws: u64,
    failed: bool,
}

impl<'a, P, A> SworSession<'a, P, A>
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
            seen: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Box::new(VirtualClock::default()),
            last_tick: 0,
            draws: 0,
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

    /// Candidates drawn so far, repeats included.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    fn step(&mut self) -> Result<Option<EmissionRecord>> {
        if self.seen.len() as Count >= self.total {
            return Ok(None);
        }
        let mut attempts = 0;
        loop {
            attempts += 1;
            self.draws += 1;
            self.clock.on_attempt();
            let (i, w) = draw(self.problem, &self.oracle, &self.x, self.total, &mut self.rng)?;
            if self.seen.insert(w.clone()) {
                let tick = self.clock.now();
                let record = EmissionRecord {
                    index: self.seen.len() as u64,
                    solution: w,
                    interval: index_interval(i, self.total),
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

impl<P, A> Iterator for SworSession<'_, P, A>
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

/// A parallel SWOR run on the virtual clock.
#[derive(Debug, Clone)]
pub struct PSworRun {
    /// `(sampler, record)` in master output order; `tick` is the arrival
    /// time at the master.
    pub outputs: Vec<(usize, EmissionRecord)>,
    /// Candidates drawn across all samplers.
    pub draws: u64,
    pub makespan: u64,
}

/// `k` independent samplers each draw one candidate every `s` ticks and
/// deliver it to the master `t` ticks later; the master keeps first arrivals.
pub fn pswor_virtual<P, A>(problem: &P, oracle: &A, x: &P::Instance, k: usize, s: u64, t: u64, seed: u64) -> Result<PSworRun>
where
    P: SelfReducible,
    A: ExactCounter<P::Instance>,
{
    if k == 0 || s == 0 {
        return Err(Error::Invalid("P-SWOR needs k >= 1 samplers and s >= 1".into()));
    }
    let total = oracle.count(x)?;
    let mut rngs: Vec<_> = (1..=k).map(|i| ChaCha8Rng::seed_from_u64(worker_seed(seed, i))).collect();
    let mut seen = HashSet::new();
    let mut outputs = Vec::new();
    let mut draws = 0;
    let mut since_last = 0;
    let mut last_tick = 0;
    let mut round = 0u64;
    while (seen.len() as Count) < total {
        round += 1;
        let arrival = round * s + t;
        // same-tick arrivals are taken in sampler order
        for (i, rng) in rngs.iter_mut().enumerate() {
            draws += 1;
            since_last += 1;
            let (idx, w) = draw(problem, oracle, x, total, rng)?;
            if seen.insert(w.clone()) {
                outputs.push((
                    i + 1,
                    EmissionRecord {
                        index: seen.len() as u64,
                        solution: w,
                        interval: index_interval(idx, total),
                        attempts: since_last,
                        tick: arrival,
                        delay: arrival - last_tick,
                    },
                ));
                since_last = 0;
                last_tick = arrival;
                if seen.len() as Count == total {
                    break;
                }
            }
        }
    }
    Ok(PSworRun {
        outputs,
        draws,
        makespan: last_tick,
    })
}

/// `M · H_M`, the expected total draws of a sequential SWOR run.
pub fn expected_total_draws(m: u64) -> f64 {
    let m_f = m as f64;
    (1..=m).map(|i| m_f / i as f64).sum()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::model::brute_force_solutions;
    use crate::problems::{AllBits, AllBitsCounter, AllBitsInstance, Knapsack, KnapsackCounter, KnapsackInstance};

    #[test]
    fn single_solution_takes_one_attempt() {
        let recs: Vec<_> = SworSession::new(&AllBits, AllBitsCounter, AllBitsInstance::new(0), 1)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].attempts, 1);
    }

    #[test]
    fn emits_the_brute_force_set_once() {
        let x = KnapsackInstance::new(9, vec![4, 2, 7, 3, 5, 1]);
        let truth = brute_force_solutions(&Knapsack, &x, 1 << 8).unwrap();
        let mut s = SworSession::new(&Knapsack, KnapsackCounter::default(), x, 4).unwrap();
        let got: Vec<_> = s.by_ref().map(|r| r.unwrap().solution).collect();
        assert_eq!(got.len(), truth.len());
        assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), truth);
        assert!(s.draws() >= truth.len() as u64);
    }

    #[test]
    fn total_draws_track_the_coupon_collector() {
        let x = AllBitsInstance::new(8);
        let runs = 100;
        let total: u64 = (0..runs)
            .map(|seed| {
                let mut s = SworSession::new(&AllBits, AllBitsCounter, x.clone(), seed).unwrap();
                s.by_ref().for_each(|r| drop(r.unwrap()));
                s.draws()
            })
            .sum();
        let mean = total as f64 / runs as f64;
        let expected = expected_total_draws(256);
        assert!((mean - expected).abs() < 0.1 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn pswor_dedups_at_the_master() {
        let x = AllBitsInstance::new(6);
        let run = pswor_virtual(&AllBits, &AllBitsCounter, &x, 4, 10, 5, 2).unwrap();
        let set: BTreeSet<_> = run.outputs.iter().map(|(_, r)| r.solution.clone()).collect();
        assert_eq!(run.outputs.len(), 64);
        assert_eq!(set.len(), 64);
        assert_eq!(run.outputs.iter().map(|(_, r)| r.attempts).sum::<u64>(), run.draws);
        let sequential = {
            let mut s = SworSession::new(&AllBits, AllBitsCounter, x, 2).unwrap();
            s.by_ref().for_each(drop);
            s.draws() * 10
        };
        assert!(run.makespan < sequential);
    }
}
