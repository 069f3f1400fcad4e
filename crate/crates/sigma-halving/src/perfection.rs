//! Abundancy index as an exact rational, perfect-number predicates, and
//! the necessary-form checks for odd perfect candidates. No floating
//! point anywhere: equality against a target ratio must be decidable.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::arithmetic::{
    self, factorize, sigma, sigma_range, ArithmeticError, Natural,
};

/// Exact non-negative rational, stored in lowest terms by `Ratio`.
pub type ExactRatio = Ratio<Natural>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Deficient,
    Perfect,
    Abundant,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::Deficient => write!(f, "deficient"),
            Classification::Perfect => write!(f, "perfect"),
            Classification::Abundant => write!(f, "abundant"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerfectionError {
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
    #[error("{0} is even; the form applies to odd candidates only")]
    EvenCandidate(Natural),
}

/// I(n) = sigma(n)/n in lowest terms.
pub fn abundancy_index(n: &Natural) -> Result<ExactRatio, ArithmeticError> {
    assert!(!n.is_zero(), "abundancy index requires n >= 1");
    Ok(Ratio::new(sigma(n)?, n.clone()))
}

pub fn classify(index: &ExactRatio) -> Classification {
    let two = Ratio::from_integer(Natural::from(2u32));
    match index.cmp(&two) {
        std::cmp::Ordering::Less => Classification::Deficient,
        std::cmp::Ordering::Equal => Classification::Perfect,
        std::cmp::Ordering::Greater => Classification::Abundant,
    }
}

/// sigma(n) = k * n.
pub fn is_k_perfect(n: &Natural, k: u64) -> Result<bool, ArithmeticError> {
    assert!(!n.is_zero() && k >= 1);
    Ok(sigma(n)? == n * Natural::from(k))
}

pub fn is_perfect(n: &Natural) -> Result<bool, ArithmeticError> {
    is_k_perfect(n, 2)
}

/// sigma(sigma(n)) = 2n.
pub fn is_superperfect(n: &Natural) -> Result<bool, ArithmeticError> {
    assert!(!n.is_zero());
    Ok(sigma(&sigma(n)?)? == n * Natural::from(2u32))
}

/// The even perfect number 2^(e-1) * (2^e - 1) when 2^e - 1 is prime.
pub fn euclid_euler_perfect(exponent: u32) -> Option<Natural> {
    assert!(exponent >= 2);
    let mersenne = (Natural::one() << exponent) - Natural::one();
    if arithmetic::is_prime(&mersenne) {
        Some((Natural::one() << (exponent - 1)) * mersenne)
    } else {
        None
    }
}

/// Necessary (not sufficient) shape of an odd perfect number: exactly one
/// prime q with odd exponent a, q = a = 1 (mod 4), all other exponents
/// even. The square part is implicit and never materialized.
pub fn euler_form_check(n: &Natural) -> Result<bool, PerfectionError> {
    assert!(!n.is_zero());
    if n.is_even() {
        return Err(PerfectionError::EvenCandidate(n.clone()));
    }
    let four = Natural::from(4u32);
    let mut euler_prime_seen = false;
    for (p, a) in factorize(n)?.factors() {
        if a % 2 == 0 {
            continue;
        }
        if euler_prime_seen {
            return Ok(false); // two odd-exponent primes
        }
        euler_prime_seen = true;
        if p % &four != Natural::one() || a % 4 != 1 {
            return Ok(false);
        }
    }
    Ok(euler_prime_seen)
}

/// n = 1 (mod 12) or n = 9 (mod 36).
pub fn touchard_form_check(n: &Natural) -> bool {
    debug_assert!(n.is_odd());
    n % Natural::from(12u32) == Natural::one() || n % Natural::from(36u32) == Natural::from(9u32)
}

/// All n <= bound with I(n) = target, ascending, by scanning divisor sums
/// in segments. An empty result is evidence, not proof, that the target
/// is an abundancy outlaw.
pub fn search_abundancy(target: &ExactRatio, bound: u64) -> Vec<u64> {
    assert!(bound >= 1);
    assert!(
        target > &Ratio::from_integer(Natural::one()),
        "abundancy targets exceed 1"
    );
    let chunk = 1u64 << 16;
    let starts: Vec<u64> = (1..=bound).step_by(chunk as usize).collect();
    let hits = map_chunks(&starts, |lo| {
        let hi = (lo + chunk - 1).min(bound);
        search_segment(target, lo, hi)
    });
    hits.into_iter().flatten().collect()
}

fn search_segment(target: &ExactRatio, lo: u64, hi: u64) -> Vec<u64> {
    let sums = sigma_range(lo, hi);
    match (target.numer().to_u64(), target.denom().to_u64()) {
        (Some(r), Some(s)) => {
            // sigma(n)/n = r/s  <=>  s * sigma(n) = r * n, exactly in u128
            sums.iter()
                .enumerate()
                .filter(|(i, &sg)| {
                    s as u128 * sg as u128 == r as u128 * (lo + *i as u64) as u128
                })
                .map(|(i, _)| lo + i as u64)
                .collect()
        }
        _ => sums
            .iter()
            .enumerate()
            .filter(|(i, &sg)| {
                &Ratio::new(Natural::from(sg), Natural::from(lo + *i as u64)) == target
            })
            .map(|(i, _)| lo + i as u64)
            .collect(),
    }
}

#[cfg(feature = "parallel")]
fn map_chunks<F: Fn(u64) -> Vec<u64> + Sync>(starts: &[u64], f: F) -> Vec<Vec<u64>> {
    use rayon::prelude::*;
    starts.par_iter().map(|&lo| f(lo)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<F: Fn(u64) -> Vec<u64> + Sync>(starts: &[u64], f: F) -> Vec<Vec<u64>> {
    starts.iter().map(|&lo| f(lo)).collect()
}
