//! Concrete problems, their exact counters, and simulated approximate
//! counters.
//!
//! Instance files are plain text:
//!
//! ```text
//! knapsack <n> <C>
//! s_1 s_2 ... s_n
//! ```
//!
//! or the single line `allbits <n>`.

mod allbits;
mod knapsack;
mod simulated;

use std::fmt;
use std::str::FromStr;

pub use allbits::{AllBits, AllBitsCounter, AllBitsInstance};
pub use knapsack::{generate_knapsack, Knapsack, KnapsackCounter, KnapsackGenConfig, KnapsackInstance};
pub use simulated::{FailureMode, NoiseMode, SimulatedOracle, SimulatedOracleConfig};

use crate::error::Error;

/// Names accepted by the problem registry.
pub const PROBLEM_NAMES: [&str; 2] = ["all-bitstrings", "knapsack"];

/// An instance of one of the shipped problems, as read from an instance file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadedInstance {
    AllBits(AllBitsInstance),
    Knapsack(KnapsackInstance),
}

impl LoadedInstance {
    pub fn problem_name(&self) -> &'static str {
        match self {
            Self::AllBits(_) => "all-bitstrings",
            Self::Knapsack(_) => "knapsack",
        }
    }
}

impl fmt::Display for LoadedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllBits(x) => writeln!(f, "allbits {}", x.free),
            Self::Knapsack(x) => {
                let sizes = x.sizes();
                writeln!(f, "knapsack {} {}", sizes.len(), x.capacity().unwrap_or(0))?;
                let line: Vec<String> = sizes.iter().map(u64::to_string).collect();
                writeln!(f, "{}", line.join(" "))
            }
        }
    }
}

impl FromStr for LoadedInstance {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self, Error> {
        let bad = |msg: &str| Error::Parse(format!("instance file: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("not a natural: {s:?}")));
        match words.as_slice() {
            ["allbits", n] => Ok(Self::AllBits(AllBitsInstance::new(num(n)? as usize))),
            ["knapsack", n, c] => {
                let n = num(n)? as usize;
                let c = num(c)?;
                let sizes = match lines.next() {
                    Some(line) => line.split_whitespace().map(num).collect::<Result<Vec<_>, _>>()?,
                    None => Vec::new(),
                };
                if sizes.len() != n {
                    return Err(bad(&format!("expected {n} sizes, found {}", sizes.len())));
                }
                Ok(Self::Knapsack(KnapsackInstance::new(c, sizes)))
            }
            _ => Err(bad(&format!("unknown header {header:?}"))),
        }
    }
}
