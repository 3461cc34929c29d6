//! Exact random draws over rationals.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::rational::ExactRational;

/// `k / 2^bits` with `k` uniform in `[0, 2^bits)`.
pub fn uniform_dyadic<R: Rng + ?Sized>(rng: &mut R, bits: u64) -> ExactRational {
    let k = rng.gen_biguint(bits);
    ExactRational::dyadic(k, bits)
}

/// Draws `p` uniform in `[0, 1)` and reports whether `p < threshold`.
///
/// `p` is never materialised: its binary expansion is generated 64 bits at a
/// time and compared against the expansion of `threshold` until the two
/// differ, so the result is exactly Bernoulli(`threshold`) (clamped to
/// `[0, 1]`). Expected cost is one word.
pub fn bernoulli_below<R: Rng + ?Sized>(rng: &mut R, threshold: &ExactRational) -> bool {
    if !threshold.is_positive() {
        return false;
    }
    if *threshold >= ExactRational::one() {
        return true;
    }
    let denom = threshold.denom().magnitude().clone();
    let mut rem = threshold.numer().magnitude().clone();
    loop {
        rem <<= 64u32;
        let (digit, r) = rem.div_rem(&denom);
        rem = r;
        // 0 < threshold < 1 keeps every digit below 2^64
        let digit = digit.iter_u64_digits().next().unwrap_or(0);
        let word = rng.next_u64();
        if word != digit {
            return word < digit;
        }
        if rem.is_zero() {
            // threshold's expansion ended; p matches it so far and p > threshold a.s.
            return false;
        }
    }
}

/// Index `i` with probability `weights[i] / Σ weights`, drawn exactly.
/// Non-positive weights are never picked. `None` when no weight is positive.
pub fn weighted_index<R: Rng + ?Sized>(rng: &mut R, weights: &[ExactRational]) -> Option<usize> {
    let mut common = BigInt::one();
    for w in weights.iter().filter(|w| w.is_positive()) {
        common = common.lcm(w.denom());
    }
    let scaled: Vec<BigUint> = weights
        .iter()
        .map(|w| {
            if w.is_positive() {
                (w.numer() * (&common / w.denom())).abs().to_biguint().unwrap_or_default()
            } else {
                BigUint::zero()
            }
        })
        .collect();
    let total: BigUint = scaled.iter().sum();
    if total.is_zero() {
        return None;
    }
    let mut u = rng.gen_biguint_below(&total);
    for (i, s) in scaled.iter().enumerate() {
        if u < *s {
            return Some(i);
        }
        u -= s;
    }
    unreachable!("u < total")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_degenerate_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(!bernoulli_below(&mut rng, &ExactRational::zero()));
            assert!(bernoulli_below(&mut rng, &ExactRational::one()));
            assert!(bernoulli_below(&mut rng, &ExactRational::ratio(3, 2)));
        }
    }

    #[test]
    fn bernoulli_frequency() {
        // 200k draws at p = 4/9: σ ≈ 222
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = ExactRational::ratio(4, 9);
        let n = 200_000;
        let hits = (0..n).filter(|_| bernoulli_below(&mut rng, &t)).count() as f64;
        let mean = n as f64 * 4.0 / 9.0;
        let sigma = (n as f64 * (4.0 / 9.0) * (5.0 / 9.0)).sqrt();
        assert!((hits - mean).abs() < 4.0 * sigma, "{hits} vs {mean}");
    }

    #[test]
    fn bernoulli_tiny_threshold_uses_later_words() {
        // 2^-70 needs the second word; with a fixed seed this just must not panic
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = ExactRational::pow2_neg(70);
        assert!((0..1000).all(|_| !bernoulli_below(&mut rng, &t)));
    }

    #[test]
    fn dyadic_is_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let u = uniform_dyadic(&mut rng, 80);
            assert!(u >= ExactRational::zero() && u < ExactRational::one());
        }
    }

    #[test]
    fn weighted_index_excludes_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = [ExactRational::zero(), ExactRational::ratio(1, 3), ExactRational::zero()];
        for _ in 0..100 {
            assert_eq!(weighted_index(&mut rng, &w), Some(1));
        }
        assert_eq!(weighted_index(&mut rng, &[ExactRational::zero()]), None);
    }

    #[test]
    fn weighted_index_proportions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = [ExactRational::ratio(1, 6), ExactRational::ratio(1, 3)];
        let n = 60_000;
        let ones = (0..n).filter(|_| weighted_index(&mut rng, &w) == Some(1)).count() as f64;
        let sigma = (n as f64 * 2.0 / 9.0).sqrt();
        assert!((ones - n as f64 * 2.0 / 3.0).abs() < 4.0 * sigma);
    }
}
