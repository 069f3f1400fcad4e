//! Exact integer arithmetic kernel: primality, factorization and the
//! sum-of-divisors function over arbitrary-precision naturals.
//!
//! Values below 2^64 are dispatched to machine-word routines; everything
//! else runs on [`Natural`]. The split is unobservable in results.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

/// Default splitting-iteration budget for a single factorization.
pub const DEFAULT_FACTOR_EFFORT: u64 = 4_000_000;

/// Default Miller-Rabin round count for candidates >= 2^64.
pub const DEFAULT_MR_ROUNDS: u32 = 64;

/// Trial division strips primes below this bound before rho splitting.
const TRIAL_BOUND: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    /// Splitting did not complete within the configured effort budget.
    /// Measured in rho iterations, so it is reproducible across machines.
    #[error("factorization effort budget exhausted on cofactor {remaining}")]
    BudgetExceeded { remaining: Natural },
}

/// Canonical prime factorization: sorted, strictly ascending primes with
/// positive exponents. The empty list represents 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    factors: Vec<(Natural, u32)>,
}

impl Factorization {
    pub fn factors(&self) -> &[(Natural, u32)] {
        &self.factors
    }

    /// Multiplies the prime powers back together.
    pub fn product(&self) -> Natural {
        let mut acc = Natural::one();
        for (p, a) in &self.factors {
            acc *= p.pow(*a);
        }
        acc
    }

    pub fn is_square_free(&self) -> bool {
        self.factors.iter().all(|(_, a)| *a == 1)
    }

    fn from_map(map: BTreeMap<Natural, u32>) -> Self {
        Factorization {
            factors: map.into_iter().collect(),
        }
    }

    fn from_u64_map(map: BTreeMap<u64, u32>) -> Self {
        Factorization {
            factors: map
                .into_iter()
                .map(|(p, a)| (Natural::from(p), a))
                .collect(),
        }
    }
}

/// Odd primes below 2^16, used for trial division and small sieving.
fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        primes_up_to(1 << 16)
            .into_iter()
            .skip(1) // drop 2; callers strip powers of two first
            .map(|p| p as u32)
            .collect()
    })
}

/// Simple sieve of Eratosthenes; `bound` is inclusive.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn mr_witness_u64(n: u64, base: u64) -> bool {
    // true if `base` witnesses n composite
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    let mut x = powmod(base, d, n);
    if x == 1 || x == n - 1 {
        return false;
    }
    for _ in 1..s {
        x = mulmod(x, x, n);
        if x == n - 1 {
            return false;
        }
    }
    true
}

/// Deterministic primality for machine words. The base set is exact for
/// all n < 2^64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    ![2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
        .iter()
        .any(|&b| mr_witness_u64(n, b))
}

/// Primality with the default round count: exact below 2^64, a strong
/// probable-prime test (probabilistic) above it.
pub fn is_prime(n: &Natural) -> bool {
    is_prime_with_rounds(n, DEFAULT_MR_ROUNDS)
}

/// Miller-Rabin with `rounds` pseudo-random bases for n >= 2^64.
/// Bases come from a fixed-seed generator, so the verdict is reproducible.
/// An accepted composite slips through with probability <= 4^-rounds.
pub fn is_prime_with_rounds(n: &Natural, rounds: u32) -> bool {
    if let Some(v) = n.to_u64() {
        return is_prime_u64(v);
    }
    if n.is_even() {
        return false;
    }
    let one = Natural::one();
    let two = Natural::from(2u32);
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let span = n - Natural::from(3u32); // bases drawn from [2, n-2]
    let mut rng = SplitMix64::new(0x9e37_79b9_7f4a_7c15);
    'rounds: for _ in 0..rounds {
        let base = Natural::from(rng.next()) % &span + &two;
        let mut x = base.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

/// Brent's cycle variant of Pollard rho. Returns a nontrivial factor of
/// odd composite `n`, charging iterations against `effort`.
fn brent_rho_u64(n: u64, effort: &mut u64) -> Result<u64, ArithmeticError> {
    debug_assert!(n > 1 && n % 2 == 1 && !is_prime_u64(n));
    for c in 1..u64::MAX {
        let f = |x: u64| (mulmod(x, x, n) + c) % n;
        let mut x = 2u64;
        let mut y = 2u64;
        let mut ys = 2u64;
        let mut q = 1u64;
        let mut g = 1u64;
        let mut r = 1u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                let batch = 128.min(r - k);
                if *effort < batch {
                    *effort = 0;
                    return Err(ArithmeticError::BudgetExceeded {
                        remaining: Natural::from(n),
                    });
                }
                *effort -= batch;
                for _ in 0..batch {
                    y = f(y);
                    q = mulmod(q, x.abs_diff(y), n);
                }
                g = gcd_u64(q, n);
                k += batch;
            }
            r *= 2;
        }
        if g == n {
            // backtrack one step at a time
            g = 1;
            while g == 1 {
                ys = f(ys);
                g = gcd_u64(x.abs_diff(ys), n);
            }
        }
        if g != n {
            return Ok(g);
        }
        // cycle degenerated for this constant; retry with the next c
    }
    unreachable!()
}

pub(crate) fn factor_u64(
    n: u64,
    effort: &mut u64,
) -> Result<BTreeMap<u64, u32>, ArithmeticError> {
    assert!(n >= 1, "factorize requires n >= 1");
    let mut map = BTreeMap::new();
    let mut rem = n;
    let tz = rem.trailing_zeros();
    if tz > 0 {
        map.insert(2u64, tz);
        rem >>= tz;
    }
    for &p in small_primes() {
        let p = p as u64;
        if p > TRIAL_BOUND || p * p > rem {
            break;
        }
        if rem % p == 0 {
            let mut a = 0;
            while rem % p == 0 {
                rem /= p;
                a += 1;
            }
            map.insert(p, a);
        }
    }
    let mut stack = vec![rem];
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime_u64(m) {
            *map.entry(m).or_insert(0) += 1;
            continue;
        }
        let f = brent_rho_u64(m, effort)?;
        stack.push(f);
        stack.push(m / f);
    }
    Ok(map)
}

/// Brent rho over naturals, for cofactors that do not fit a machine word.
fn brent_rho_big(n: &Natural, effort: &mut u64) -> Result<Natural, ArithmeticError> {
    let one = Natural::one();
    for c in 1u64.. {
        let c_big = Natural::from(c);
        let f = |x: &Natural| (x * x + &c_big) % n;
        let mut x = Natural::from(2u32);
        let mut y = x.clone();
        let mut ys = x.clone();
        let mut q = Natural::one();
        let mut g = Natural::one();
        let mut r = 1u64;
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0u64;
            while k < r && g.is_one() {
                ys = y.clone();
                let batch = 64.min(r - k);
                if *effort < batch {
                    *effort = 0;
                    return Err(ArithmeticError::BudgetExceeded {
                        remaining: n.clone(),
                    });
                }
                *effort -= batch;
                for _ in 0..batch {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = q * diff % n;
                }
                g = q.gcd(n);
                k += batch;
            }
            r *= 2;
        }
        if &g == n {
            g = one.clone();
            while g.is_one() {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
            }
        }
        if &g != n {
            return Ok(g);
        }
    }
    unreachable!()
}

/// Canonical factorization with the default effort budget.
pub fn factorize(n: &Natural) -> Result<Factorization, ArithmeticError> {
    factorize_with_effort(n, DEFAULT_FACTOR_EFFORT)
}

/// Canonical factorization of n >= 1. The effort budget caps rho splitting
/// iterations; exhaustion is an error, never a wrong answer.
pub fn factorize_with_effort(n: &Natural, effort: u64) -> Result<Factorization, ArithmeticError> {
    assert!(!n.is_zero(), "factorize requires n >= 1");
    let mut effort = effort;
    if let Some(v) = n.to_u64() {
        return Ok(Factorization::from_u64_map(factor_u64(v, &mut effort)?));
    }
    let mut map: BTreeMap<Natural, u32> = BTreeMap::new();
    let mut rem = n.clone();
    let tz = rem.trailing_zeros().unwrap_or(0);
    if tz > 0 {
        map.insert(Natural::from(2u32), tz as u32);
        rem >>= tz;
    }
    for &p in small_primes() {
        if let Some(v) = rem.to_u64() {
            let sub = factor_u64(v, &mut effort)?;
            for (q, a) in sub {
                *map.entry(Natural::from(q)).or_insert(0) += a;
            }
            return Ok(Factorization::from_map(map));
        }
        let p_big = Natural::from(p);
        if (&rem % &p_big).is_zero() {
            let mut a = 0;
            while (&rem % &p_big).is_zero() {
                rem /= &p_big;
                a += 1;
            }
            map.insert(p_big, a);
        }
    }
    let mut stack = vec![rem];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if let Some(v) = m.to_u64() {
            let sub = factor_u64(v, &mut effort)?;
            for (q, a) in sub {
                *map.entry(Natural::from(q)).or_insert(0) += a;
            }
            continue;
        }
        if is_prime(&m) {
            *map.entry(m).or_insert(0) += 1;
            continue;
        }
        let f = brent_rho_big(&m, &mut effort)?;
        let q = &m / &f;
        stack.push(f);
        stack.push(q);
    }
    Ok(Factorization::from_map(map))
}

/// sigma(p^a) = 1 + p + p^2 + ... + p^a = (p^{a+1} - 1)/(p - 1).
pub fn sigma_prime_power(p: &Natural, a: u32) -> Natural {
    debug_assert!(is_prime(p));
    if a == 0 {
        return Natural::one();
    }
    (p.pow(a + 1) - Natural::one()) / (p - Natural::one())
}

fn sigma_prime_power_u128(p: u64, a: u32) -> u128 {
    let mut sum = 1u128;
    let mut acc = 1u128;
    for _ in 0..a {
        acc *= p as u128;
        sum += acc;
    }
    sum
}

/// Sum of divisors of a machine word. sigma(n) < 7n for n < 2^64, so the
/// u128 result never overflows.
pub(crate) fn sigma_u64(n: u64, effort: &mut u64) -> Result<u128, ArithmeticError> {
    let map = factor_u64(n, effort)?;
    Ok(map
        .into_iter()
        .map(|(p, a)| sigma_prime_power_u128(p, a))
        .product())
}

/// Sum of positive divisors, via the product formula over the factorization.
pub fn sigma(n: &Natural) -> Result<Natural, ArithmeticError> {
    sigma_with_effort(n, DEFAULT_FACTOR_EFFORT)
}

pub fn sigma_with_effort(n: &Natural, effort: u64) -> Result<Natural, ArithmeticError> {
    if let Some(v) = n.to_u64() {
        let mut effort = effort;
        return Ok(natural_from_u128(sigma_u64(v, &mut effort)?));
    }
    let f = factorize_with_effort(n, effort)?;
    let mut acc = Natural::one();
    for (p, a) in f.factors() {
        acc *= sigma_prime_power(p, *a);
    }
    Ok(acc)
}

pub(crate) fn natural_from_u128(v: u128) -> Natural {
    Natural::from(v)
}

/// Splits n >= 1 as odd * 2^k with the first component odd.
pub fn odd_part(n: &Natural) -> (Natural, u64) {
    assert!(!n.is_zero(), "odd_part requires n >= 1");
    let tz = n.trailing_zeros().unwrap_or(0);
    (n >> tz, tz)
}

pub fn odd_part_u64(n: u64) -> (u64, u32) {
    assert!(n >= 1, "odd_part requires n >= 1");
    let tz = n.trailing_zeros();
    (n >> tz, tz)
}

/// Divisor sums for every n in `lo..=hi`, by pairing each divisor d <= sqrt(m)
/// with its cofactor m/d. Used for bounded scans where per-value
/// factorization would dominate.
pub fn sigma_range(lo: u64, hi: u64) -> Vec<u64> {
    assert!(lo >= 1 && lo <= hi);
    let len = (hi - lo + 1) as usize;
    let mut sums = vec![0u64; len];
    let mut d = 1u64;
    while d * d <= hi {
        // first multiple of d in range that is >= d^2
        let start = lo.div_ceil(d).max(d) * d;
        let mut m = start;
        while m <= hi {
            let q = m / d;
            let idx = (m - lo) as usize;
            sums[idx] += d;
            if q != d {
                sums[idx] += q;
            }
            m += d;
        }
        d += 1;
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: divisor scan.
    fn sigma_naive(n: u64) -> u64 {
        (1..=n).filter(|d| n % d == 0).sum()
    }

    #[test]
    fn primality_examples() {
        assert!(!is_prime(&Natural::from(1u32)));
        assert!(is_prime(&Natural::from(3967u32)));
        assert!(!is_prime(&Natural::from(2047u32))); // 23 * 89
    }

    #[test]
    fn primality_matches_trial_division_small() {
        for n in 0..2000u64 {
            let naive = n >= 2 && (2..n).all(|d| n % d != 0);
            assert_eq!(is_prime_u64(n), naive, "n = {n}");
        }
    }

    #[test]
    fn primality_large_known() {
        // 2^89 - 1 is a Mersenne prime; 2^67 - 1 = 193707721 * 761838257287
        let m89 = (Natural::one() << 89) - Natural::one();
        assert!(is_prime(&m89));
        let m67 = (Natural::one() << 67) - Natural::one();
        assert!(!is_prime(&m67));
    }

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(&Natural::one()).unwrap().factors(), &[]);
        let f = factorize(&Natural::from(360u32)).unwrap();
        assert_eq!(
            f.factors(),
            &[
                (Natural::from(2u32), 3),
                (Natural::from(3u32), 2),
                (Natural::from(5u32), 1)
            ]
        );
        let f = factorize(&Natural::from(2047u32)).unwrap();
        assert_eq!(
            f.factors(),
            &[(Natural::from(23u32), 1), (Natural::from(89u32), 1)]
        );
    }

    #[test]
    fn factorize_big_path() {
        // forces the BigUint branch: a 83-bit smooth number
        let n = Natural::from(3u32).pow(30) * Natural::from(1723u32).pow(3);
        let f = factorize(&n).unwrap();
        assert_eq!(
            f.factors(),
            &[(Natural::from(3u32), 30), (Natural::from(1723u32), 3)]
        );
        assert_eq!(f.product(), n);
    }

    #[test]
    fn factorize_budget_exhaustion() {
        // semiprime with two ~10-digit factors; one rho iteration cannot split it
        let n = Natural::from(1_000_000_007u64) * Natural::from(1_000_000_009u64);
        let err = factorize_with_effort(&n, 1).unwrap_err();
        assert!(matches!(err, ArithmeticError::BudgetExceeded { .. }));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&Natural::one()).unwrap(), Natural::one());
        assert_eq!(sigma(&Natural::from(29u32)).unwrap(), Natural::from(30u32));
        assert_eq!(sigma(&Natural::from(21u32)).unwrap(), Natural::from(32u32));
    }

    #[test]
    fn sigma_prime_power_examples() {
        assert_eq!(sigma_prime_power(&Natural::from(5u32), 0), Natural::one());
        assert_eq!(
            sigma_prime_power(&Natural::from(7u32), 1),
            Natural::from(8u32)
        );
        assert_eq!(
            sigma_prime_power(&Natural::from(3u32), 2),
            Natural::from(13u32)
        );
    }

    #[test]
    fn sigma_prime_power_agrees_with_sigma() {
        for p in primes_up_to(100) {
            for a in 0..=10u32 {
                let pp = Natural::from(p).pow(a);
                assert_eq!(
                    sigma_prime_power(&Natural::from(p), a),
                    sigma(&pp).unwrap(),
                    "p={p} a={a}"
                );
            }
        }
    }

    #[test]
    fn odd_part_examples() {
        assert_eq!(odd_part(&Natural::one()), (Natural::one(), 0));
        assert_eq!(odd_part(&Natural::from(20u32)), (Natural::from(5u32), 2));
        assert_eq!(odd_part(&Natural::from(104u32)), (Natural::from(13u32), 3));
        assert_eq!(odd_part_u64(104), (13, 3));
    }

    #[test]
    fn sigma_lower_bound_iff_prime() {
        for n in 2..3000u64 {
            let s = sigma(&Natural::from(n)).unwrap();
            assert!(s >= Natural::from(n + 1));
            assert_eq!(s == Natural::from(n + 1), is_prime_u64(n), "n = {n}");
        }
    }

    #[test]
    fn sigma_range_matches_naive() {
        let sums = sigma_range(1, 500);
        for n in 1..=500u64 {
            assert_eq!(sums[(n - 1) as usize], sigma_naive(n), "n = {n}");
        }
        let sums = sigma_range(977, 1303);
        for n in 977..=1303u64 {
            assert_eq!(sums[(n - 977) as usize], sigma_naive(n), "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn factorize_round_trip(n in 1u64..1_000_000_000_000u64) {
            let f = factorize(&Natural::from(n)).unwrap();
            prop_assert_eq!(f.product(), Natural::from(n));
            for (p, a) in f.factors() {
                prop_assert!(is_prime(p));
                prop_assert!(*a >= 1);
            }
            for w in f.factors().windows(2) {
                prop_assert!(w[0].0 < w[1].0);
            }
        }

        #[test]
        fn sigma_multiplicative(a in 1u64..10_000u64, b in 1u64..10_000u64) {
            prop_assume!(gcd_u64(a, b) == 1);
            let lhs = sigma(&Natural::from(a * b)).unwrap();
            let rhs = sigma(&Natural::from(a)).unwrap() * sigma(&Natural::from(b)).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn sigma_matches_divisor_scan(n in 1u64..100_000u64) {
            prop_assert_eq!(sigma(&Natural::from(n)).unwrap(), Natural::from(sigma_naive(n)));
        }
    }
}
