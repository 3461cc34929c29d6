//! Chi-square uniformity tests over repeated enumeration runs.

use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_SIGNIFICANCE: f64 = 1e-3;
pub const MAX_SOLUTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    FirstEmission,
    Position,
}

/// Goodness of fit at one output position.
#[derive(Debug, Clone, Serialize)]
pub struct PositionResult {
    /// 1-based.
    pub position: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformityReport {
    pub kind: TestKind,
    pub runs: usize,
    pub solutions: usize,
    pub significance: f64,
    /// Per-position threshold after Bonferroni correction.
    pub threshold: f64,
    pub positions: Vec<PositionResult>,
    pub passed: bool,
}

impl UniformityReport {
    pub fn min_p_value(&self) -> f64 {
        self.positions.iter().map(|p| p.p_value).fold(1.0, f64::min)
    }
}

/// Pearson statistic of `counts` against a uniform expectation.
pub fn chi_square(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let k = counts.len();
    if k < 2 || total == 0 {
        return (0.0, 1.0);
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    (stat, dist.sf(stat))
}

/// Tests whether each run's first emission is uniform over `universe`.
/// Needs at least `50·M` runs.
pub fn first_emission_test<'a, I>(runs: I, universe: &[BitString], significance: f64) -> Result<UniformityReport>
where
    I: IntoIterator<Item = &'a [BitString]>,
{
    uniformity(runs, universe, significance, TestKind::FirstEmission)
}

/// Tests every output position `k` for uniformity over `universe`, with a
/// Bonferroni correction across the `M` positions. Needs at least `50·M²`
/// runs.
pub fn position_test<'a, I>(runs: I, universe: &[BitString], significance: f64) -> Result<UniformityReport>
where
    I: IntoIterator<Item = &'a [BitString]>,
{
    uniformity(runs, universe, significance, TestKind::Position)
}

fn uniformity<'a, I>(runs: I, universe: &[BitString], significance: f64, kind: TestKind) -> Result<UniformityReport>
where
    I: IntoIterator<Item = &'a [BitString]>,
{
    let m = universe.len();
    if m == 0 || m > MAX_SOLUTIONS {
        return Err(Error::Invalid(format!(
            "uniformity tests need 1 <= M <= {MAX_SOLUTIONS}, got {m}"
        )));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::Invalid(format!("significance {significance} outside (0, 1)")));
    }
    let slot: HashMap<&BitString, usize> = universe.iter().enumerate().map(|(i, w)| (w, i)).collect();
    if slot.len() != m {
        return Err(Error::Invalid("universe contains duplicates".into()));
    }
    let positions = match kind {
        TestKind::FirstEmission => 1,
        TestKind::Position => m,
    };
    let mut counts = vec![vec![0u64; m]; positions];
    let mut n_runs = 0;
    for run in runs {
        n_runs += 1;
        if run.len() < positions {
            return Err(Error::Invalid(format!(
                "run {n_runs} has {} emissions, expected at least {positions}",
                run.len()
            )));
        }
        for (k, w) in run.iter().take(positions).enumerate() {
            let i = slot
                .get(w)
                .ok_or_else(|| Error::Invalid(format!("run {n_runs} emitted {w}, not in the solution set")))?;
            counts[k][*i] += 1;
        }
    }
    let needed = match kind {
        TestKind::FirstEmission => 50 * m,
        TestKind::Position => 50 * m * m,
    };
    if n_runs < needed {
        return Err(Error::InsufficientRuns { needed, got: n_runs });
    }
    let threshold = significance / positions as f64;
    let results: Vec<_> = counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (statistic, p_value) = chi_square(c);
            PositionResult {
                position: k + 1,
                statistic,
                p_value,
            }
        })
        .collect();
    let passed = results.iter().all(|r| r.p_value >= threshold);
    Ok(UniformityReport {
        kind,
        runs: n_runs,
        solutions: m,
        significance,
        threshold,
        positions: results,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn universe(n: usize) -> Vec<BitString> {
        (0..1u64 << n).map(|v| BitString::from_index(v as u128, n)).collect()
    }

    #[test]
    fn chi_square_reference() {
        // 3 cells, counts 10/20/30: stat = (100 + 0 + 100)/20 = 10, sf(10; 2) = e^-5
        let (stat, p) = chi_square(&[10, 20, 30]);
        assert!((stat - 10.0).abs() < 1e-12);
        assert!((p - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn shuffles_pass() {
        let u = universe(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let runs: Vec<Vec<BitString>> = (0..800)
            .map(|_| {
                let mut r = u.clone();
                r.shuffle(&mut rng);
                r
            })
            .collect();
        let first = first_emission_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).unwrap();
        assert!(first.passed);
        let pos = position_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).unwrap();
        assert!(pos.passed);
        assert_eq!(pos.positions.len(), 4);
    }

    #[test]
    fn lexicographic_stream_fails() {
        let u = universe(2);
        let runs = vec![u.clone(); 1000];
        let r = first_emission_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn too_few_runs() {
        let u = universe(3);
        let runs = vec![u.clone(); 100];
        let err = first_emission_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).unwrap_err();
        assert!(matches!(err, Error::InsufficientRuns { needed: 400, got: 100 }));
        let err = position_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).unwrap_err();
        assert!(matches!(err, Error::InsufficientRuns { needed: 3200, .. }));
    }

    #[test]
    fn foreign_solution_is_rejected() {
        let u = universe(1);
        let runs = vec![vec![BitString::from_index(3, 2)]; 200];
        assert!(first_emission_test(runs.iter().map(Vec::as_slice), &u, DEFAULT_SIGNIFICANCE).is_err());
    }
}
