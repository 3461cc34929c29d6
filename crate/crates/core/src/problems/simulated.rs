//! Simulated approximate counters: an exact count perturbed by bounded,
//! hash-derived noise, plus deterministic failure injection for the
//! randomized tier.

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::ToPrimitive;
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracle::{ApproxCounter, Count, ExactCounter, RandomizedCounter};
use crate::rational::ExactRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Return the exact count.
    None,
    /// Multiplicative perturbation `1 + η`, `η ∈ [-ε, ε)` derived from a hash
    /// of the query.
    Hash,
    /// Worst case: 0-branches (and the root) get the top of the `ε`-band,
    /// 1-branches the bottom, skewing every split as far as allowed.
    Extreme,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureMode {
    /// Never fail.
    None,
    /// Fail with the per-call probability the caller passes in.
    Budget,
    /// Fail with this probability regardless of the caller.
    Rate(ExactRational),
    /// Fail exactly on these prefixes.
    Prefixes(BTreeSet<BitString>),
}

#[derive(Debug, Clone)]
pub struct SimulatedOracleConfig {
    pub noise: NoiseMode,
    pub failure: FailureMode,
    /// Factor applied to the exact count on an injected failure.
    pub distortion: ExactRational,
    pub seed: u64,
    /// Mix a per-call counter into the hash, so repeated identical queries
    /// get fresh noise like a genuinely randomized counter would.
    pub fresh_per_call: bool,
}

impl Default for SimulatedOracleConfig {
    fn default() -> Self {
        Self {
            noise: NoiseMode::Hash,
            failure: FailureMode::None,
            distortion: ExactRational::from(2u64),
            seed: 0,
            fresh_per_call: false,
        }
    }
}

impl SimulatedOracleConfig {
    pub fn exact() -> Self {
        Self {
            noise: NoiseMode::None,
            ..Self::default()
        }
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_failure(mut self, failure: FailureMode) -> Self {
        self.failure = failure;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_distortion(mut self, distortion: ExactRational) -> Self {
        self.distortion = distortion;
        self
    }

    pub fn fresh_per_call(mut self) -> Self {
        self.fresh_per_call = true;
        self
    }
}

/// Approximate and randomized counter built on an exact one.
///
/// The `nonce` separates independent sessions (or workers) sharing a
/// configuration: identical `(query, nonce)` pairs always get identical
/// answers unless `fresh_per_call` is set.
#[derive(Debug)]
pub struct SimulatedOracle<C> {
    exact: C,
    config: SimulatedOracleConfig,
    nonce: u64,
    calls: AtomicU64,
    failures: AtomicU64,
}

struct ShaHasher(Sha256);

impl Hasher for ShaHasher {
    fn finish(&self) -> u64 {
        unreachable!("digest is read through finalize")
    }

    fn write(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }
}

impl<C> SimulatedOracle<C> {
    pub fn new(exact: C, config: SimulatedOracleConfig) -> Self {
        Self::with_nonce(exact, config, 0)
    }

    pub fn with_nonce(exact: C, config: SimulatedOracleConfig, nonce: u64) -> Self {
        Self {
            exact,
            config,
            nonce,
            calls: AtomicU64::new(0),
            failures: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &SimulatedOracleConfig {
        &self.config
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Number of injected failures so far.
    pub fn failures(&self) -> u64 {
        self.failures.load(Ordering::Relaxed)
    }

    /// 64 uniform bits keyed on the query.
    fn hash_word<I: Hash>(
        &self,
        tag: &[u8],
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        call: u64,
    ) -> u64 {
        let mut h = ShaHasher(Sha256::new());
        h.write(tag);
        h.write_u64(self.config.seed);
        h.write_u64(self.nonce);
        if self.config.fresh_per_call {
            h.write_u64(call);
        }
        x.hash(&mut h);
        prefix.hash(&mut h);
        h.write(epsilon.to_string().as_bytes());
        let digest = h.0.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        u64::from_be_bytes(word)
    }

    fn check_epsilon(epsilon: &ExactRational) -> Result<()> {
        if !epsilon.in_open(&ExactRational::zero(), &ExactRational::one()) {
            return Err(Error::OracleContract(format!("ε = {epsilon} is not in (0, 1)")));
        }
        Ok(())
    }

    fn perturb<I: Hash>(
        &self,
        exact: Count,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        call: u64,
    ) -> Result<Count> {
        if exact == 0 {
            return Ok(0);
        }
        // with ε = n/d the band is [⌈e(d-n)/d⌉, ⌊e(d+n)/d⌋]
        let e = BigInt::from(exact);
        let (n, d) = (epsilon.numer(), epsilon.denom());
        let low = div_ceil(&(&e * (d - n)), d);
        let high = (&e * (d + n)).div_floor(d);
        let value = match self.config.noise {
            NoiseMode::None => return Ok(exact),
            NoiseMode::Extreme => match prefix.last() {
                Some(true) => low,
                _ => high,
            },
            NoiseMode::Hash => {
                let h = self.hash_word(b"noise", x, prefix, epsilon, call);
                // η = ε·(2h - 2^64)/2^64 ∈ [-ε, ε); value = round(e·(1 + η))
                let two64 = BigInt::from(1u128 << 64);
                let den = d * &two64;
                let num: BigInt = &e * (&den + n * (BigInt::from(h) * 2u32 - &two64));
                let v = (num * 2u32 + &den).div_floor(&(&den * 2u32));
                v.clamp(low, high)
            }
        };
        // e >= 1 and ε < 1 keep the band's lower end at 1 or more
        value
            .to_u128()
            .ok_or_else(|| Error::OracleContract("estimate out of range".into()))
    }

    fn fails<I: Hash>(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        failure: &ExactRational,
        call: u64,
    ) -> bool {
        let rate = match &self.config.failure {
            FailureMode::None => return false,
            FailureMode::Prefixes(set) => return set.contains(prefix),
            FailureMode::Budget => failure,
            FailureMode::Rate(r) => r,
        };
        if rate.is_zero() || rate.is_negative() {
            return false;
        }
        let h = self.hash_word(b"failure", x, prefix, epsilon, call);
        ExactRational::dyadic(BigUint::from(h), 64) < *rate
    }
}

impl<I: Hash, C: ExactCounter<I>> ApproxCounter<I> for SimulatedOracle<C> {
    fn approx_count(&self, x: &I, prefix: &BitString, epsilon: &ExactRational) -> Result<Count> {
        Self::check_epsilon(epsilon)?;
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        let exact = self.exact.count(x)?;
        self.perturb(exact, x, prefix, epsilon, call)
    }
}

impl<I: Hash, C: ExactCounter<I>> RandomizedCounter<I> for SimulatedOracle<C> {
    fn randomized_count(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        failure: &ExactRational,
    ) -> Result<Count> {
        Self::check_epsilon(epsilon)?;
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        let exact = self.exact.count(x)?;
        if self.fails(x, prefix, epsilon, failure, call) {
            self.failures.fetch_add(1, Ordering::Relaxed);
            if exact == 0 {
                return Ok(0);
            }
            let distorted = (&ExactRational::from(exact) * &self.config.distortion).round_integer();
            let distorted = distorted.to_u128().unwrap_or(u128::MAX).max(1);
            return Ok(distorted);
        }
        self.perturb(exact, x, prefix, epsilon, call)
    }
}

fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    -(-a).div_floor(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{AllBitsCounter, AllBitsInstance};

    /// Always returns a fixed count.
    struct Fixed(Count);

    impl ExactCounter<u32> for Fixed {
        fn count(&self, _x: &u32) -> Result<Count> {
            Ok(self.0)
        }
    }

    fn eps(n: i64, d: i64) -> ExactRational {
        ExactRational::ratio(n, d)
    }

    #[test]
    fn zero_stays_zero() {
        let o = SimulatedOracle::new(Fixed(0), SimulatedOracleConfig::default());
        for k in 0..20u32 {
            assert_eq!(o.approx_count(&k, &BitString::empty(), &eps(1, 2)).unwrap(), 0);
        }
    }

    #[test]
    fn no_noise_is_exact() {
        let o = SimulatedOracle::new(Fixed(5), SimulatedOracleConfig::exact());
        assert_eq!(o.approx_count(&1, &BitString::empty(), &eps(1, 3)).unwrap(), 5);
    }

    #[test]
    fn hash_noise_stays_in_band() {
        let o = SimulatedOracle::new(Fixed(64), SimulatedOracleConfig::default());
        let mut seen = BTreeSet::new();
        for k in 0..500u32 {
            let v = o.approx_count(&k, &BitString::empty(), &eps(1, 8)).unwrap();
            assert!((56..=72).contains(&v), "{v}");
            seen.insert(v);
        }
        assert!(seen.len() > 5, "noise should actually vary: {seen:?}");
    }

    #[test]
    fn band_respected_after_rounding() {
        // exact 10 at ε = 0.06 has band [9.4, 10.6]; rounding 10.55 would give 11
        let o = SimulatedOracle::new(Fixed(10), SimulatedOracleConfig::default());
        for k in 0..2000u32 {
            let v = o.approx_count(&k, &BitString::empty(), &eps(6, 100)).unwrap();
            assert_eq!(v, 10);
        }
    }

    #[test]
    fn deterministic_across_calls() {
        let o = SimulatedOracle::new(AllBitsCounter, SimulatedOracleConfig::default().with_seed(9));
        let x = AllBitsInstance::new(7);
        let w: BitString = "0110".parse().unwrap();
        let first = o.approx_count(&x, &w, &eps(1, 5)).unwrap();
        for _ in 0..10 {
            assert_eq!(o.approx_count(&x, &w, &eps(1, 5)).unwrap(), first);
        }
    }

    #[test]
    fn extreme_noise_hits_band_ends() {
        let o = SimulatedOracle::new(Fixed(64), SimulatedOracleConfig::default().with_noise(NoiseMode::Extreme));
        assert_eq!(o.approx_count(&0, &"0".parse().unwrap(), &eps(1, 8)).unwrap(), 72);
        assert_eq!(o.approx_count(&0, &"1".parse().unwrap(), &eps(1, 8)).unwrap(), 56);
        assert_eq!(o.approx_count(&0, &BitString::empty(), &eps(1, 8)).unwrap(), 72);
    }

    #[test]
    fn rejects_epsilon_outside_unit_interval() {
        let o = SimulatedOracle::new(Fixed(3), SimulatedOracleConfig::default());
        assert!(o.approx_count(&0, &BitString::empty(), &eps(1, 1)).is_err());
        assert!(o.approx_count(&0, &BitString::empty(), &eps(0, 1)).is_err());
    }

    #[test]
    fn fpras_without_failures_matches_fptas() {
        let o = SimulatedOracle::new(Fixed(40), SimulatedOracleConfig::default().with_failure(FailureMode::Budget));
        for k in 0..100u32 {
            let w = BitString::from_index(k as u128, 8);
            let a = o.approx_count(&k, &w, &eps(1, 10)).unwrap();
            let b = o.randomized_count(&k, &w, &eps(1, 10), &ExactRational::zero()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forced_failure_distorts() {
        let o = SimulatedOracle::new(Fixed(5), SimulatedOracleConfig::default().with_failure(FailureMode::Budget));
        let v = o
            .randomized_count(&0, &BitString::empty(), &eps(1, 8), &ExactRational::one())
            .unwrap();
        assert_eq!(v, 10);
        assert_eq!(o.failures(), 1);
    }

    #[test]
    fn failure_frequency_matches_rate() {
        // binomial(10^5, 1/16): mean 6250, σ ≈ 76.5
        let o = SimulatedOracle::new(Fixed(5), SimulatedOracleConfig::default().with_failure(FailureMode::Budget));
        let rate = eps(1, 16);
        let n = 100_000u128;
        for i in 0..n {
            let w = BitString::from_index(i, 17);
            o.randomized_count(&0, &w, &eps(1, 8), &rate).unwrap();
        }
        let f = o.failures() as f64;
        let mean = n as f64 / 16.0;
        let sigma = (n as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        assert!((f - mean).abs() <= 3.0 * sigma, "{f} vs {mean} ± {}", 3.0 * sigma);
    }

    #[test]
    fn nonce_changes_noise() {
        let cfg = SimulatedOracleConfig::default();
        let a = SimulatedOracle::with_nonce(Fixed(1000), cfg.clone(), 1);
        let b = SimulatedOracle::with_nonce(Fixed(1000), cfg, 2);
        let differ = (0..50u32).any(|k| {
            a.approx_count(&k, &BitString::empty(), &eps(1, 4)).unwrap()
                != b.approx_count(&k, &BitString::empty(), &eps(1, 4)).unwrap()
        });
        assert!(differ);
    }
}
