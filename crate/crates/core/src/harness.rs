//! One entry point for running any sequential enumerator on a problem with
//! an exact counter, wrapping the counter in simulated noise as needed.

use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::access::{EpsilonMode, SessionOptions};
use crate::error::{Error, Result};
use crate::exact::AraSession;
use crate::fpras::AxaSession;
use crate::fptas::AiaSession;
use crate::model::SelfReducible;
use crate::oracle::ExactCounter;
use crate::problems::{FailureMode, NoiseMode, SimulatedOracle, SimulatedOracleConfig};
use crate::rational::ExactRational;
use crate::record::{EmissionRecord, VirtualClock};
use crate::swor::SworSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Exact counting with random access.
    Ara,
    /// Deterministic approximate counting.
    Aia,
    /// Randomized approximate counting with a prefix dictionary.
    Axa,
    /// Sampling without replacement.
    Swor,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Ara, Self::Aia, Self::Axa, Self::Swor];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ara => "ara",
            Self::Aia => "aia",
            Self::Axa => "axa",
            Self::Swor => "swor",
        }
    }

    /// Name of the counting oracle the algorithm needs.
    pub fn alias(self) -> &'static str {
        match self {
            Self::Ara => "exact",
            Self::Aia => "fptas",
            Self::Axa => "fpras",
            Self::Swor => "swor",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s || a.alias() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}; expected ara, aia, axa or swor")))
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "hash" => Ok(Self::Hash),
            "extreme" => Ok(Self::Extreme),
            _ => Err(Error::Parse(format!("unknown noise mode {s:?}; expected none, hash or extreme"))),
        }
    }
}

/// `none`, `budget`, or a fixed rate such as `1/100`.
impl FromStr for FailureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "budget" => Ok(Self::Budget),
            rate => {
                let r: ExactRational = rate
                    .parse()
                    .map_err(|_| Error::Parse(format!("unknown failure mode {s:?}; expected none, budget or a rate")))?;
                if r.is_negative() || r > ExactRational::one() {
                    return Err(Error::Parse(format!("failure rate {r} outside [0, 1]")));
                }
                Ok(Self::Rate(r))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub epsilon_mode: EpsilonMode,
    /// Session failure budget for AXA.
    pub delta: ExactRational,
    pub noise: NoiseMode,
    /// Failure injection for the randomized counter; AXA only.
    pub failure: FailureMode,
    /// Virtual ticks per attempt.
    pub attempt_cost: u64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            seed,
            epsilon_mode: EpsilonMode::Proof,
            delta: ExactRational::ratio(1, 10),
            noise: NoiseMode::Hash,
            failure: FailureMode::None,
            attempt_cost: 1,
        }
    }

    /// The simulated counter a run with this configuration uses.
    pub fn oracle<C>(&self, exact: C) -> SimulatedOracle<C> {
        let cfg = SimulatedOracleConfig::default()
            .with_noise(self.noise)
            .with_failure(self.failure.clone())
            .with_seed(self.seed);
        SimulatedOracle::new(exact, cfg)
    }
}

/// Runs `cfg.algorithm` on `x` to completion.
pub fn run_session<P, C>(problem: &P, exact: C, x: &P::Instance, cfg: &RunConfig) -> Result<Vec<EmissionRecord>>
where
    P: SelfReducible,
    P::Instance: Hash,
    C: ExactCounter<P::Instance>,
{
    let clock = || Box::new(VirtualClock::new(cfg.attempt_cost));
    let opts = SessionOptions::seeded(cfg.seed).with_epsilon_mode(cfg.epsilon_mode);
    match cfg.algorithm {
        Algorithm::Ara => AraSession::new(problem, exact, x.clone(), cfg.seed)?
            .with_clock(clock())
            .collect(),
        Algorithm::Swor => SworSession::new(problem, exact, x.clone(), cfg.seed)?
            .with_clock(clock())
            .collect(),
        Algorithm::Aia => AiaSession::new(problem, cfg.oracle(exact), x.clone(), opts)?
            .with_clock(clock())
            .collect(),
        Algorithm::Axa => AxaSession::new(problem, cfg.oracle(exact), x.clone(), cfg.delta.clone(), opts)?
            .with_clock(clock())
            .collect(),
    }
}
