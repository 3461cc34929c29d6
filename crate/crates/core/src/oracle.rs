//! Counting-oracle contracts.
//!
//! Three tiers, from strongest to weakest:
//!
//! * [`ExactCounter`] returns `|Sol(x)|`.
//! * [`ApproxCounter`] returns a value within relative error `ε`, always,
//!   and the same value for the same arguments.
//! * [`RandomizedCounter`] returns a value within relative error `ε` with
//!   probability at least `1 - δ` per call.
//!
//! Approximate counters also receive the prefix `w` that produced the
//! reduced instance `Ψ(x, w)`. Real counters ignore it; simulated counters key
//! their noise on it so that distinct prefixes with equal reduced instances
//! still get independent perturbations.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::bits::BitString;
use crate::error::Result;
use crate::rational::ExactRational;

pub type Count = u128;

pub trait ExactCounter<I>: Sync {
    fn count(&self, x: &I) -> Result<Count>;
}

pub trait ApproxCounter<I>: Sync {
    fn approx_count(&self, x: &I, prefix: &BitString, epsilon: &ExactRational) -> Result<Count>;
}

pub trait RandomizedCounter<I>: Sync {
    fn randomized_count(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        failure: &ExactRational,
    ) -> Result<Count>;
}

impl<I, T: ExactCounter<I> + ?Sized> ExactCounter<I> for &T {
    fn count(&self, x: &I) -> Result<Count> {
        (**self).count(x)
    }
}

impl<I, T: ApproxCounter<I> + ?Sized> ApproxCounter<I> for &T {
    fn approx_count(&self, x: &I, prefix: &BitString, epsilon: &ExactRational) -> Result<Count> {
        (**self).approx_count(x, prefix, epsilon)
    }
}

impl<I, T: RandomizedCounter<I> + ?Sized> RandomizedCounter<I> for &T {
    fn randomized_count(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        failure: &ExactRational,
    ) -> Result<Count> {
        (**self).randomized_count(x, prefix, epsilon, failure)
    }
}

/// Uses an exact counter wherever an approximate one is expected.
#[derive(Debug, Clone, Copy)]
pub struct Exactly<C>(pub C);

impl<I, C: ExactCounter<I>> ApproxCounter<I> for Exactly<C> {
    fn approx_count(&self, x: &I, _prefix: &BitString, _epsilon: &ExactRational) -> Result<Count> {
        self.0.count(x)
    }
}

impl<I, C: ExactCounter<I>> RandomizedCounter<I> for Exactly<C> {
    fn randomized_count(
        &self,
        x: &I,
        _prefix: &BitString,
        _epsilon: &ExactRational,
        _failure: &ExactRational,
    ) -> Result<Count> {
        self.0.count(x)
    }
}

/// Uses a deterministic approximate counter as a randomized one that never
/// fails.
#[derive(Debug, Clone, Copy)]
pub struct NeverFails<B>(pub B);

impl<I, B: ApproxCounter<I>> RandomizedCounter<I> for NeverFails<B> {
    fn randomized_count(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        _failure: &ExactRational,
    ) -> Result<Count> {
        self.0.approx_count(x, prefix, epsilon)
    }
}

/// Counts invocations of the wrapped oracle.
#[derive(Debug, Default)]
pub struct CallCounter<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O> CallCounter<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    fn bump(&self) {
        self.calls.fetch_add(1, Ordering::Relaxed);
    }
}

impl<I, O: ExactCounter<I>> ExactCounter<I> for CallCounter<O> {
    fn count(&self, x: &I) -> Result<Count> {
        self.bump();
        self.inner.count(x)
    }
}

impl<I, O: ApproxCounter<I>> ApproxCounter<I> for CallCounter<O> {
    fn approx_count(&self, x: &I, prefix: &BitString, epsilon: &ExactRational) -> Result<Count> {
        self.bump();
        self.inner.approx_count(x, prefix, epsilon)
    }
}

impl<I, O: RandomizedCounter<I>> RandomizedCounter<I> for CallCounter<O> {
    fn randomized_count(
        &self,
        x: &I,
        prefix: &BitString,
        epsilon: &ExactRational,
        failure: &ExactRational,
    ) -> Result<Count> {
        self.bump();
        self.inner.randomized_count(x, prefix, epsilon, failure)
    }
}
