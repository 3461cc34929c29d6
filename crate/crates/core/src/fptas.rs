//! Random-order enumeration with a deterministic approximate counter.
//!
//! Seeds are drawn from the not-yet-banned part of `[0, 1)`, mapped to a
//! solution by [`iaccess`](crate::access::iaccess), and accepted with
//! probability `φ* / width`. Acceptance makes every remaining solution
//! equally likely despite unequal interval widths.

use crate::access::{
    correction_factor, descend, ApproxEstimates, Guard, PhantomPolicy, RejectionLoop, SessionOptions, SessionStats,
};
use crate::bits::BitString;
use crate::error::Result;
use crate::model::SelfReducible;
use crate::oracle::{ApproxCounter, Count};
use crate::rational::ExactRational;
use crate::record::{Clock, EmissionRecord};

pub struct AiaSession<'a, P: SelfReducible, B> {
    problem: &'a P,
    oracle: B,
    x: P::Instance,
    opts: SessionOptions,
    depth: usize,
    root_estimate: Count,
    core: Option<RejectionLoop>,
    failed: bool,
}

impl<'a, P, B> AiaSession<'a, P, B>
where
    P: SelfReducible,
    B: ApproxCounter<P::Instance>,
{
    pub fn new(problem: &'a P, oracle: B, x: P::Instance, opts: SessionOptions) -> Result<Self> {
        let depth = problem.solution_length(&x);
        let root_estimate = oracle.approx_count(&x, &BitString::empty(), &ExactRational::ratio(1, 3))?;
        let core = if root_estimate == 0 {
            None
        } else {
            Some(RejectionLoop::new(
                correction_factor(root_estimate)?,
                depth,
                &opts,
                Guard::Strict,
                PhantomPolicy::Fail,
            ))
        };
        Ok(Self {
            problem,
            oracle,
            x,
            opts,
            depth,
            root_estimate,
            core,
            failed: false,
        })
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        if let Some(core) = &mut self.core {
            core.set_clock(clock);
        }
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root_estimate(&self) -> Count {
        self.root_estimate
    }

    /// `None` when the instance was estimated empty.
    pub fn phi_star(&self) -> Option<&ExactRational> {
        self.core.as_ref().map(RejectionLoop::phi_star)
    }

    pub fn available(&self) -> ExactRational {
        self.core
            .as_ref()
            .map_or_else(ExactRational::zero, |c| c.available().clone())
    }

    pub fn stats(&self) -> SessionStats {
        self.core.as_ref().map(|c| c.stats.clone()).unwrap_or_default()
    }

    pub fn banned(&self) -> Option<&crate::banned::BannedIntervalTree> {
        self.core.as_ref().map(RejectionLoop::banned)
    }

    fn step(&mut self) -> Result<Option<EmissionRecord>> {
        let Some(core) = self.core.as_mut() else {
            return Ok(None);
        };
        let (problem, x) = (self.problem, &self.x);
        let mut est = ApproxEstimates {
            oracle: &self.oracle,
            root_depth: self.depth,
            mode: self.opts.epsilon_mode,
        };
        core.next(
            |r| descend(problem, x, r, &mut est),
            |w| problem.is_solution(x, w),
        )
    }
}

impl<P, B> Iterator for AiaSession<'_, P, B>
where
    P: SelfReducible,
    B: ApproxCounter<P::Instance>,
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
