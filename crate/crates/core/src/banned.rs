//! Banned-interval index and seed generator.
//!
//! An AVL tree over disjoint half-open intervals of `[0, 1)`, ordered by
//! position. Every node carries `take`, the total length of the intervals in
//! its subtree, which lets [`BannedIntervalTree::offset`] map a point of the
//! compressed available space `[0, L)` back to `[0, 1) \ B` in one root-to-leaf
//! walk.

use std::cmp::max;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rational::{ExactRational, Interval};
use crate::sampling::uniform_dyadic;

#[derive(Debug, Clone)]
struct Node {
    interval: Interval,
    take: ExactRational,
    left: Option<usize>,
    right: Option<usize>,
    height: u32,
}

/// Insert-only AVL tree of banned intervals. Adjacent intervals are kept as
/// separate nodes, so `len()` equals the number of insertions.
#[derive(Debug, Clone, Default)]
pub struct BannedIntervalTree {
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl BannedIntervalTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn height(&self) -> u32 {
        self.h(self.root)
    }

    /// Total banned length.
    pub fn total(&self) -> ExactRational {
        self.root
            .map(|r| self.nodes[r].take.clone())
            .unwrap_or_default()
    }

    fn h(&self, at: Option<usize>) -> u32 {
        at.map_or(0, |i| self.nodes[i].height)
    }

    fn take_of(&self, at: Option<usize>) -> Option<&ExactRational> {
        at.map(|i| &self.nodes[i].take)
    }

    fn update(&mut self, i: usize) {
        let (l, r) = (self.nodes[i].left, self.nodes[i].right);
        let mut take = self.nodes[i].interval.width();
        if let Some(t) = self.take_of(l) {
            take += t;
        }
        if let Some(t) = self.take_of(r) {
            take += t;
        }
        let height = 1 + max(self.h(l), self.h(r));
        let node = &mut self.nodes[i];
        node.take = take;
        node.height = height;
    }

    fn rotate_right(&mut self, y: usize) -> usize {
        let x = self.nodes[y].left.expect("left child");
        self.nodes[y].left = self.nodes[x].right;
        self.nodes[x].right = Some(y);
        self.update(y);
        self.update(x);
        x
    }

    fn rotate_left(&mut self, x: usize) -> usize {
        let y = self.nodes[x].right.expect("right child");
        self.nodes[x].right = self.nodes[y].left;
        self.nodes[y].left = Some(x);
        self.update(x);
        self.update(y);
        y
    }

    fn balance(&mut self, i: usize) -> usize {
        self.update(i);
        let (l, r) = (self.nodes[i].left, self.nodes[i].right);
        let (hl, hr) = (self.h(l), self.h(r));
        if hl > hr + 1 {
            let l = l.expect("taller left");
            if self.h(self.nodes[l].right) > self.h(self.nodes[l].left) {
                self.nodes[i].left = Some(self.rotate_left(l));
            }
            return self.rotate_right(i);
        }
        if hr > hl + 1 {
            let r = r.expect("taller right");
            if self.h(self.nodes[r].left) > self.h(self.nodes[r].right) {
                self.nodes[i].right = Some(self.rotate_right(r));
            }
            return self.rotate_left(i);
        }
        i
    }

    fn insert_at(&mut self, at: Option<usize>, new: usize) -> usize {
        let Some(i) = at else {
            return new;
        };
        if self.nodes[new].interval.hi <= self.nodes[i].interval.lo {
            let l = self.insert_at(self.nodes[i].left, new);
            self.nodes[i].left = Some(l);
        } else {
            let r = self.insert_at(self.nodes[i].right, new);
            self.nodes[i].right = Some(r);
        }
        self.balance(i)
    }

    /// The stored interval intersecting `interval`, if any. Only the search
    /// path can hold one: the in-order neighbours of an insertion point are
    /// its ancestors.
    fn find_overlap(&self, interval: &Interval) -> Option<&Interval> {
        let mut at = self.root;
        while let Some(i) = at {
            let node = &self.nodes[i];
            if interval.hi <= node.interval.lo {
                at = node.left;
            } else if interval.lo >= node.interval.hi {
                at = node.right;
            } else {
                return Some(&node.interval);
            }
        }
        None
    }

    /// Bans `interval`. It must be non-empty and disjoint from every banned
    /// interval.
    pub fn insert(&mut self, interval: Interval) -> Result<()> {
        if interval.is_empty() || self.find_overlap(&interval).is_some() {
            return Err(Error::OverlapViolation {
                interval: interval.to_string(),
            });
        }
        let take = interval.width();
        self.nodes.push(Node {
            interval,
            take,
            left: None,
            right: None,
            height: 1,
        });
        let new = self.nodes.len() - 1;
        let root = self.insert_at(self.root, new);
        self.root = Some(root);
        Ok(())
    }

    /// The banned interval containing `r`, if any.
    pub fn locate(&self, r: &ExactRational) -> Option<&Interval> {
        let mut at = self.root;
        while let Some(i) = at {
            let node = &self.nodes[i];
            if r < &node.interval.lo {
                at = node.left;
            } else if r >= &node.interval.hi {
                at = node.right;
            } else {
                return Some(&node.interval);
            }
        }
        None
    }

    /// Maps `y ∈ [0, L)` to `y + b`, where `b` is the banned length lying
    /// below the result. Returns the point and the number of nodes visited.
    pub fn offset(&self, y: &ExactRational) -> (ExactRational, usize) {
        // `y` may carry a long denominator, so keep it out of the running sum
        let mut b = ExactRational::zero();
        let mut at = self.root;
        let mut visited = 0;
        while let Some(i) = at {
            visited += 1;
            let node = &self.nodes[i];
            let mut below = &b + self.take_of(node.left).unwrap_or(&ExactRational::zero());
            let limit = &node.interval.lo - &below;
            if *y < limit {
                at = node.left;
            } else {
                below += &node.interval.width();
                b = below;
                at = node.right;
            }
        }
        (y + &b, visited)
    }

    /// Draws a seed uniformly from `[0, 1) \ B`, where `available = L` is the
    /// unbanned length. `y` is `u · L` with `u` a uniform dyadic rational of
    /// `precision_bits` bits.
    pub fn generate_seed<R: Rng + ?Sized>(
        &self,
        available: &ExactRational,
        rng: &mut R,
        precision_bits: u64,
    ) -> Result<ExactRational> {
        if !available.is_positive() {
            return Err(Error::Exhausted);
        }
        let y = &uniform_dyadic(rng, precision_bits) * available;
        Ok(self.offset(&y).0)
    }

    /// `(lo, hi, take)` for every node, in position order.
    pub fn in_order(&self) -> Vec<(ExactRational, ExactRational, ExactRational)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = Vec::new();
        let mut at = self.root;
        while at.is_some() || !stack.is_empty() {
            while let Some(i) = at {
                stack.push(i);
                at = self.nodes[i].left;
            }
            let i = stack.pop().expect("non-empty stack");
            let n = &self.nodes[i];
            out.push((n.interval.lo.clone(), n.interval.hi.clone(), n.take.clone()));
            at = n.right;
        }
        out
    }

    /// One `lo hi take` line per node, in position order.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (lo, hi, take) in self.in_order() {
            let _ = writeln!(s, "{lo} {hi} {take}");
        }
        s
    }

    /// Recomputes every `take` and height bottom-up and compares with the
    /// stored values; also checks ordering and AVL balance.
    pub fn check_invariants(&self) -> bool {
        fn walk(t: &BannedIntervalTree, at: Option<usize>) -> Option<(ExactRational, u32)> {
            let Some(i) = at else {
                return Some((ExactRational::zero(), 0));
            };
            let n = &t.nodes[i];
            let (lt, lh) = walk(t, n.left)?;
            let (rt, rh) = walk(t, n.right)?;
            if lh.abs_diff(rh) > 1 {
                return None;
            }
            if let Some(l) = n.left {
                if t.nodes[l].interval.hi > n.interval.lo {
                    return None;
                }
            }
            if let Some(r) = n.right {
                if n.interval.hi > t.nodes[r].interval.lo {
                    return None;
                }
            }
            let take = &(&n.interval.width() + &lt) + &rt;
            let height = 1 + max(lh, rh);
            (take == n.take && height == n.height).then_some((take, height))
        }
        let ordered = self
            .in_order()
            .windows(2)
            .all(|w| w[0].1 <= w[1].0);
        ordered && walk(self, self.root).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> ExactRational {
        ExactRational::ratio(n, d)
    }

    fn iv(a: i64, b: i64, d: i64) -> Interval {
        Interval::new(q(a, d), q(b, d))
    }

    #[test]
    fn single_insert_take() {
        let mut t = BannedIntervalTree::new();
        t.insert(iv(1, 2, 4)).unwrap();
        assert_eq!(t.total(), q(1, 4));
    }

    #[test]
    fn two_inserts_additive() {
        let mut t = BannedIntervalTree::new();
        t.insert(iv(0, 1, 4)).unwrap();
        t.insert(iv(2, 3, 4)).unwrap();
        assert_eq!(t.total(), q(1, 2));
        let order: Vec<_> = t.in_order().into_iter().map(|(l, h, _)| (l, h)).collect();
        assert_eq!(order, vec![(q(0, 1), q(1, 4)), (q(1, 2), q(3, 4))]);
    }

    #[test]
    fn overlap_rejected() {
        let mut t = BannedIntervalTree::new();
        t.insert(iv(2, 4, 8)).unwrap();
        let err = t.insert(iv(1, 3, 8)).unwrap_err();
        assert!(matches!(err, Error::OverlapViolation { .. }));
        assert_eq!(t.len(), 1);
        // touching is fine for half-open intervals
        t.insert(iv(4, 5, 8)).unwrap();
        t.insert(iv(0, 2, 8)).unwrap();
        assert!(t.check_invariants());
    }

    #[test]
    fn empty_interval_rejected() {
        let mut t = BannedIntervalTree::new();
        assert!(t.insert(iv(1, 1, 2)).is_err());
    }

    #[test]
    fn offset_examples() {
        let t = BannedIntervalTree::new();
        assert_eq!(t.offset(&q(1, 3)).0, q(1, 3));

        let mut t = BannedIntervalTree::new();
        t.insert(iv(0, 1, 2)).unwrap();
        assert_eq!(t.offset(&q(1, 8)).0, q(5, 8));

        let mut t = BannedIntervalTree::new();
        t.insert(iv(1, 2, 4)).unwrap();
        assert_eq!(t.offset(&q(1, 8)).0, q(1, 8));
        // a point at the left end of a banned interval is pushed past it
        assert_eq!(t.offset(&q(1, 4)).0, q(1, 2));
    }

    #[test]
    fn exhausted_when_nothing_available() {
        let t = BannedIntervalTree::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = t.generate_seed(&ExactRational::zero(), &mut rng, 64).unwrap_err();
        assert!(matches!(err, Error::Exhausted));
    }

    #[test]
    fn dump_format() {
        let mut t = BannedIntervalTree::new();
        t.insert(iv(1, 2, 4)).unwrap();
        t.insert(iv(0, 1, 4)).unwrap();
        assert_eq!(t.dump(), "0/1 1/4 1/4\n1/4 1/2 1/2\n");
    }

    #[test]
    fn height_is_logarithmic() {
        let mut t = BannedIntervalTree::new();
        let n = 4096;
        for i in 0..n {
            t.insert(iv(i, i + 1, n)).unwrap();
        }
        assert!(t.check_invariants());
        assert_eq!(t.total(), ExactRational::one());
        // AVL height < 1.45 log2(n + 2)
        assert!(t.height() <= 18, "height {}", t.height());
    }

    /// Reference: walk the sorted banned list, shifting past each interval
    /// that starts at or below the running point.
    fn reference_offset(sorted: &[Interval], y: &ExactRational) -> ExactRational {
        let mut r = y.clone();
        for b in sorted {
            if b.lo <= r {
                r = &r + &b.width();
            } else {
                break;
            }
        }
        r
    }

    /// Random disjoint intervals: a random partition of [0,1) into pieces of
    /// width k/den, every other piece (or a random subset) banned.
    fn random_banned(pieces: &[u8], mask: &[bool]) -> Vec<Interval> {
        let den: i64 = pieces.iter().map(|&p| p as i64 + 1).sum();
        let mut at = 0i64;
        let mut out = Vec::new();
        for (i, &p) in pieces.iter().enumerate() {
            let w = p as i64 + 1;
            if mask[i % mask.len()] {
                out.push(iv(at, at + w, den));
            }
            at += w;
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn offset_matches_sorted_list(
            pieces in prop::collection::vec(0u8..5, 1..300),
            mask in prop::collection::vec(any::<bool>(), 1..17),
            insert_seed in any::<u64>(),
            probes in prop::collection::vec(0u32..1_000_000, 1..20),
        ) {
            let banned = random_banned(&pieces, &mask);
            let mut order: Vec<usize> = (0..banned.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(insert_seed);
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut tree = BannedIntervalTree::new();
            for &i in &order {
                tree.insert(banned[i].clone()).unwrap();
            }
            prop_assert!(tree.check_invariants());
            let available = &ExactRational::one() - &tree.total();
            prop_assume!(available.is_positive());
            let bound = 2 * (64 - (tree.len() as u64 + 1).leading_zeros() as usize) + 2;
            let mut prev: Option<ExactRational> = None;
            let mut ys: Vec<ExactRational> = probes
                .iter()
                .map(|&p| &available * &ExactRational::ratio(p as i64, 1_000_000))
                .collect();
            ys.sort();
            for y in ys {
                let (r, visited) = tree.offset(&y);
                prop_assert!(visited <= bound);
                prop_assert!(tree.locate(&r).is_none());
                prop_assert!(r < ExactRational::one());
                prop_assert_eq!(&r, &reference_offset(&banned, &y));
                if let Some(p) = &prev {
                    prop_assert!(p <= &r);
                }
                prev = Some(r);
            }
        }
    }
}
