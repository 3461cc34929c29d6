//! The self-reducible problem abstraction and its brute-force ground truth.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::hash::Hash;

use crate::bits::BitString;
use crate::error::{Error, Result};

/// A self-reducible enumeration problem over the alphabet `{0, 1}`.
///
/// Implementations must satisfy, for every instance `x` and prefix `w`:
///
/// * every solution of `x` has length `solution_length(x)`;
/// * `solution_length(reduce(x, w)) == solution_length(x).saturating_sub(w.len())`;
/// * the solutions of `reduce(x, w)` are exactly the suffixes `w'` with
///   `w ∘ w'` a solution of `x`;
/// * `encoded_size(reduce(x, w)) <= encoded_size(x)`.
///
/// [`verify_self_reducibility`] checks all of these exhaustively on small
/// instances.
pub trait SelfReducible: Sync {
    type Instance: Clone + Debug + Hash + Eq + Send + Sync;

    fn name(&self) -> &'static str;

    /// The solution length ζ(x).
    fn solution_length(&self, x: &Self::Instance) -> usize;

    /// The self-reduction Ψ(x, w).
    fn reduce(&self, x: &Self::Instance, prefix: &BitString) -> Self::Instance;

    /// For an instance with ζ(x) = 0: does its solution set contain λ?
    fn accepts_empty(&self, x: &Self::Instance) -> bool;

    /// Membership test `w ∈ Sol(x)`.
    fn is_solution(&self, x: &Self::Instance, w: &BitString) -> bool;

    /// Encoding length |x|.
    fn encoded_size(&self, x: &Self::Instance) -> usize;

    /// Ψ(x, bit). Kernels descend one symbol at a time through this.
    fn reduce_bit(&self, x: &Self::Instance, bit: bool) -> Self::Instance {
        self.reduce(x, &BitString::from_bits(vec![bit]))
    }
}

/// Default cap on brute-force candidate counts (`2^20`).
pub const DEFAULT_BRUTE_FORCE_LIMIT: u128 = 1 << 20;

fn candidate_count(len: usize, limit: u128) -> Result<u128> {
    let needed = if len >= 127 { u128::MAX } else { 1u128 << len };
    if needed > limit {
        return Err(Error::BudgetExceeded {
            what: "brute-force candidates",
            needed,
            limit,
        });
    }
    Ok(needed)
}

/// Every `w` with `|w| = ζ(x)` and `w ∈ Sol(x)`, found by testing all
/// `2^ζ(x)` candidates.
pub fn brute_force_solutions<P: SelfReducible>(
    problem: &P,
    x: &P::Instance,
    limit: u128,
) -> Result<BTreeSet<BitString>> {
    let len = problem.solution_length(x);
    let n = candidate_count(len, limit)?;
    Ok((0..n)
        .map(|i| BitString::from_index(i, len))
        .filter(|w| problem.is_solution(x, w))
        .collect())
}

/// Exhaustively checks the self-reducibility contract on `x` and on every
/// reduced instance `Ψ(x, w)` with `|w| <= ζ(x) + 1`.
///
/// Returns `Ok(false)` on the first violated property.
pub fn verify_self_reducibility<P: SelfReducible>(
    problem: &P,
    x: &P::Instance,
    max_candidates: u128,
) -> Result<bool> {
    let depth = problem.solution_length(x);
    let size = problem.encoded_size(x);
    // all strings of lengths 0..=depth+1 are tested for membership once
    candidate_count(depth + 2, max_candidates.saturating_mul(4))?;
    let sol = brute_force_solutions(problem, x, max_candidates)?;

    // no solution of a different length
    for len in 0..=depth + 1 {
        if len == depth {
            continue;
        }
        let wrong_length = (0..1u128 << len)
            .map(|i| BitString::from_index(i, len))
            .any(|w| problem.is_solution(x, &w));
        if wrong_length {
            return Ok(false);
        }
    }

    if depth == 0 && problem.accepts_empty(x) != sol.contains(&BitString::empty()) {
        return Ok(false);
    }

    for plen in 0..=depth + 1 {
        for p in 0..1u128 << plen {
            let w = BitString::from_index(p, plen);
            let reduced = problem.reduce(x, &w);
            if problem.encoded_size(&reduced) > size {
                return Ok(false);
            }
            let rdepth = problem.solution_length(&reduced);
            if rdepth != depth.saturating_sub(plen) {
                return Ok(false);
            }
            let expected: BTreeSet<BitString> = sol
                .iter()
                .filter(|s| w.is_prefix_of(s))
                .map(|s| BitString::from_bits(s.bits()[plen.min(s.len())..].to_vec()))
                .collect();
            let got = brute_force_solutions(problem, &reduced, max_candidates)?;
            // beyond ζ(x) the reduced instance has ζ = 0 and no solutions
            let expected = if plen > depth { BTreeSet::new() } else { expected };
            if got != expected {
                return Ok(false);
            }
            if rdepth == 0 && problem.accepts_empty(&reduced) != got.contains(&BitString::empty())
            {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
