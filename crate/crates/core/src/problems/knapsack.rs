use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::{Count, ExactCounter};

/// 0/1 packings of items into a knapsack. Bit `i` of a solution is 1 when item
/// `i` (in the given order) is packed.
#[derive(Debug, Clone, Copy, Default)]
pub struct Knapsack;

/// Residual instance: capacity plus the items not yet decided.
///
/// `capacity == None` is the infeasible sentinel produced when a prefix packs
/// more than the capacity (or runs past the last item); it has no solutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnapsackInstance {
    capacity: Option<u64>,
    sizes: Arc<[u64]>,
    start: usize,
}

impl KnapsackInstance {
    pub fn new(capacity: u64, sizes: Vec<u64>) -> Self {
        Self {
            capacity: Some(capacity),
            sizes: sizes.into(),
            start: 0,
        }
    }

    pub fn capacity(&self) -> Option<u64> {
        self.capacity
    }

    /// Sizes of the undecided items.
    pub fn sizes(&self) -> &[u64] {
        &self.sizes[self.start.min(self.sizes.len())..]
    }

    pub fn is_infeasible(&self) -> bool {
        self.capacity.is_none()
    }

    /// Infeasible residual that still consumes one item, so solution
    /// lengths keep shrinking by one per reduced bit.
    fn infeasible(&self) -> Self {
        Self {
            capacity: None,
            sizes: self.sizes.clone(),
            start: (self.start + 1).min(self.sizes.len()),
        }
    }

    fn step(&self, bit: bool) -> Self {
        let Some(cap) = self.capacity else {
            return self.infeasible();
        };
        let Some(&size) = self.sizes.get(self.start) else {
            return self.infeasible();
        };
        let cap = if bit { cap.checked_sub(size) } else { Some(cap) };
        match cap {
            Some(cap) => Self {
                capacity: Some(cap),
                sizes: self.sizes.clone(),
                start: self.start + 1,
            },
            None => self.infeasible(),
        }
    }
}

impl PartialEq for KnapsackInstance {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity && self.sizes() == other.sizes()
    }
}

impl Eq for KnapsackInstance {}

impl Hash for KnapsackInstance {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.capacity.hash(state);
        self.sizes().hash(state);
    }
}

impl SelfReducible for Knapsack {
    type Instance = KnapsackInstance;

    fn name(&self) -> &'static str {
        "knapsack"
    }

    fn solution_length(&self, x: &KnapsackInstance) -> usize {
        x.sizes().len()
    }

    fn reduce(&self, x: &KnapsackInstance, prefix: &BitString) -> KnapsackInstance {
        prefix
            .bits()
            .iter()
            .fold(x.clone(), |acc, &bit| acc.step(bit))
    }

    fn reduce_bit(&self, x: &KnapsackInstance, bit: bool) -> KnapsackInstance {
        x.step(bit)
    }

    fn accepts_empty(&self, x: &KnapsackInstance) -> bool {
        x.capacity.is_some() && x.sizes().is_empty()
    }

    fn is_solution(&self, x: &KnapsackInstance, w: &BitString) -> bool {
        let Some(cap) = x.capacity else {
            return false;
        };
        let sizes = x.sizes();
        if w.len() != sizes.len() {
            return false;
        }
        let packed: u128 = sizes
            .iter()
            .zip(w.bits())
            .filter(|(_, &b)| b)
            .map(|(&s, _)| s as u128)
            .sum();
        packed <= cap as u128
    }

    fn encoded_size(&self, x: &KnapsackInstance) -> usize {
        x.sizes().len() + 1
    }
}

/// Pseudo-polynomial counter: dynamic programming over residual capacity.
#[derive(Debug, Clone, Copy)]
pub struct KnapsackCounter {
    /// Upper bound on `items × (capacity + 1)` table cells.
    pub budget: u128,
}

impl Default for KnapsackCounter {
    fn default() -> Self {
        Self { budget: 1 << 26 }
    }
}

impl ExactCounter<KnapsackInstance> for KnapsackCounter {
    fn count(&self, x: &KnapsackInstance) -> Result<Count> {
        let Some(cap) = x.capacity else {
            return Ok(0);
        };
        let sizes = x.sizes();
        let total: u128 = sizes.iter().map(|&s| s as u128).sum();
        if total <= cap as u128 {
            return if sizes.len() >= 128 {
                Err(Error::BudgetExceeded {
                    what: "knapsack count",
                    needed: u128::MAX,
                    limit: u128::MAX,
                })
            } else {
                Ok(1u128 << sizes.len())
            };
        }
        // cap < total here, so it fits in usize whenever the budget does
        let cells = (sizes.len() as u128).saturating_mul(cap as u128 + 1);
        if cells > self.budget {
            return Err(Error::BudgetExceeded {
                what: "knapsack table cells",
                needed: cells,
                limit: self.budget,
            });
        }
        let cap = cap as usize;
        // table[c] = number of subsets of the items seen so far with total <= c
        let mut table = vec![1u128; cap + 1];
        for &s in sizes {
            let s = s as usize;
            if s > cap {
                continue;
            }
            for c in (s..=cap).rev() {
                table[c] += table[c - s];
            }
        }
        Ok(table[cap])
    }
}

/// Parameters of the seeded knapsack generator.
#[derive(Debug, Clone)]
pub struct KnapsackGenConfig {
    pub max_size: u64,
    /// Capacity as a fraction of the total size, drawn from this range.
    pub capacity_fraction: (f64, f64),
}

impl Default for KnapsackGenConfig {
    fn default() -> Self {
        Self {
            max_size: 40,
            capacity_fraction: (0.3, 0.6),
        }
    }
}

/// Seeded random instance with `n` items.
pub fn generate_knapsack(n: usize, seed: u64, cfg: &KnapsackGenConfig) -> KnapsackInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=cfg.max_size)).collect();
    let total: u64 = sizes.iter().sum();
    let (lo, hi) = cfg.capacity_fraction;
    let frac = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    KnapsackInstance::new((total as f64 * frac).floor() as u64, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brute_force_solutions, verify_self_reducibility};

    fn count(c: u64, s: &[u64]) -> Count {
        KnapsackCounter::default()
            .count(&KnapsackInstance::new(c, s.to_vec()))
            .unwrap()
    }

    #[test]
    fn exact_count_examples() {
        assert_eq!(count(3, &[1, 2, 3]), 5);
        assert_eq!(count(0, &[1, 1]), 1);
        assert_eq!(count(6, &[1, 2, 3]), 8);
        assert_eq!(count(0, &[]), 1);
    }

    #[test]
    fn reduction_subtracts_packed_sizes() {
        let x = KnapsackInstance::new(3, vec![1, 2, 3]);
        let r = Knapsack.reduce(&x, &"1".parse().unwrap());
        assert_eq!(r.capacity(), Some(2));
        assert_eq!(r.sizes(), &[2, 3]);
        let r = Knapsack.reduce(&x, &"11".parse().unwrap());
        assert_eq!(r.capacity(), Some(0));
        let r = Knapsack.reduce(&x, &"111".parse().unwrap());
        assert!(r.is_infeasible());
        assert_eq!(KnapsackCounter::default().count(&r).unwrap(), 0);
    }

    #[test]
    fn equality_ignores_how_the_residual_was_reached() {
        let x = KnapsackInstance::new(5, vec![2, 1, 4]);
        let a = Knapsack.reduce(&x, &"10".parse().unwrap());
        let b = Knapsack.reduce(&KnapsackInstance::new(4, vec![1, 4]), &"1".parse().unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn budget_is_enforced() {
        let c = KnapsackCounter { budget: 100 };
        let err = c.count(&KnapsackInstance::new(1000, vec![600, 700])).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn dp_matches_brute_force_and_decomposes() {
        for seed in 0..20 {
            let x = generate_knapsack(10, seed, &KnapsackGenConfig::default());
            assert!(verify_self_reducibility(&Knapsack, &x, 1 << 12).unwrap());
            let brute = brute_force_solutions(&Knapsack, &x, 1 << 12).unwrap();
            let counter = KnapsackCounter::default();
            assert_eq!(counter.count(&x).unwrap(), brute.len() as u128);
            for len in 0..10usize {
                for p in 0..1u128 << len {
                    let w = BitString::from_index(p, len);
                    let parent = counter.count(&Knapsack.reduce(&x, &w)).unwrap();
                    let zero = counter.count(&Knapsack.reduce(&x, &w.child(false))).unwrap();
                    let one = counter.count(&Knapsack.reduce(&x, &w.child(true))).unwrap();
                    assert_eq!(zero + one, parent);
                }
            }
        }
    }

    #[test]
    fn generator_is_seeded() {
        let cfg = KnapsackGenConfig::default();
        assert_eq!(generate_knapsack(12, 7, &cfg), generate_knapsack(12, 7, &cfg));
        assert_eq!(generate_knapsack(12, 7, &cfg).sizes().len(), 12);
    }
}
