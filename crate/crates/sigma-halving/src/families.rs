//! Mersenne-rooted prime families and the square-free product verifier.
//!
//! Level 1 is the Mersenne primes. A prime p sits at level i >= 2 when
//! p + 1 = 2^alpha * q for a prime q at level i - 1. The parent q is the
//! odd part of p + 1, so it is unique and membership is a decision
//! procedure: odd parts strictly decrease, and the chain either bottoms
//! out at a Mersenne prime or dies on a composite odd part.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

use crate::arithmetic::{self, odd_part, primes_up_to, Natural};
use crate::trajectory::{reaches_one, Budget, Convergence, ConvergenceCache};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainLink {
    /// Exponent in prime_at_step + 1 = 2^alpha * parent.
    pub alpha: u32,
    pub parent: Natural,
}

/// A prime's proven descent chain down to a Mersenne root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyChain {
    pub prime: Natural,
    /// 1 = Mersenne; level i has a chain of i - 1 links.
    pub level: u32,
    pub links: Vec<ChainLink>,
    pub mersenne_root: Natural,
}

impl FamilyChain {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "prime": self.prime.to_string(),
            "level": self.level,
            "links": self.links.iter().map(|l| serde_json::json!({
                "alpha": l.alpha,
                "parent": l.parent.to_string(),
            })).collect::<Vec<_>>(),
            "mersenne_root": self.mersenne_root.to_string(),
        })
    }
}

/// Decides family membership for an odd prime p by walking odd parts.
/// Returns None the moment a non-prime odd part appears. The caller is
/// responsible for p being prime; 2 and 1 are rejected outright.
pub fn family_level(p: &Natural) -> Option<FamilyChain> {
    if p <= &Natural::from(2u32) || p.is_even() {
        return None;
    }
    debug_assert!(arithmetic::is_prime(p));
    let mut links = Vec::new();
    let mut current = p.clone();
    loop {
        let (q, alpha) = odd_part(&(&current + Natural::one()));
        if q.is_one() {
            // current + 1 = 2^alpha: a Mersenne root
            return Some(FamilyChain {
                prime: p.clone(),
                level: links.len() as u32 + 1,
                links,
                mersenne_root: current,
            });
        }
        if !arithmetic::is_prime(&q) {
            return None;
        }
        links.push(ChainLink {
            alpha: alpha as u32,
            parent: q.clone(),
        });
        current = q;
    }
}

/// All primes p <= bound with p + 1 a power of two, ascending.
pub fn mersenne_primes_up_to(bound: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut m = 2u32;
    loop {
        let candidate = match 1u64.checked_shl(m).map(|v| v - 1) {
            Some(c) => c,
            None => break,
        };
        if candidate > bound {
            break;
        }
        if arithmetic::is_prime_u64(candidate) {
            out.push(candidate);
        }
        m += 1;
    }
    out
}

/// All primes p <= bound at exactly the given level, ascending.
pub fn generate_family(level: u32, bound: u64) -> Vec<u64> {
    assert!(level >= 1);
    primes_up_to(bound)
        .into_iter()
        .filter(|&p| {
            p > 2
                && family_level(&Natural::from(p))
                    .map(|c| c.level == level)
                    .unwrap_or(false)
        })
        .collect()
}

/// Why a prime belongs to a [`GoodSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Proven by its odd-part chain to a Mersenne root.
    Chain(FamilyChain),
    /// Admitted by closure: sigma(p) = p + 1 = 2^r * (distinct members).
    Closure(ClosureCertificate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureCertificate {
    pub two_exponent: u32,
    /// Distinct odd primes, each a member at admission time. Empty for
    /// Mersenne primes (p + 1 a pure power of two).
    pub odd_primes: Vec<Natural>,
}

/// Primes with a convergence proof, plus the justification for each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoodSet {
    members: BTreeSet<Natural>,
    provenance: BTreeMap<Natural, Provenance>,
}

impl GoodSet {
    pub fn new() -> Self {
        GoodSet::default()
    }

    /// All primes <= bound whose odd-part chain succeeds.
    pub fn from_chains(bound: u64) -> Self {
        let mut set = GoodSet::new();
        for p in primes_up_to(bound) {
            if p == 2 {
                continue;
            }
            if let Some(chain) = family_level(&Natural::from(p)) {
                set.insert(Natural::from(p), Provenance::Chain(chain));
            }
        }
        set
    }

    fn insert(&mut self, prime: Natural, provenance: Provenance) {
        self.members.insert(prime.clone());
        self.provenance.insert(prime, provenance);
    }

    pub fn contains(&self, p: &Natural) -> bool {
        self.members.contains(p)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Natural> {
        self.members.iter()
    }

    pub fn provenance(&self, p: &Natural) -> Option<&Provenance> {
        self.provenance.get(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .members
            .iter()
            .map(|p| {
                let prov = match self.provenance.get(p) {
                    Some(Provenance::Chain(chain)) => serde_json::json!({
                        "kind": "chain",
                        "chain": chain.to_json(),
                    }),
                    Some(Provenance::Closure(cert)) => serde_json::json!({
                        "kind": "closure",
                        "two_exponent": cert.two_exponent,
                        "odd_primes": cert.odd_primes.iter()
                            .map(|q| q.to_string()).collect::<Vec<_>>(),
                    }),
                    None => serde_json::Value::Null,
                };
                serde_json::json!({
                    "prime": p.to_string(),
                    "provenance": prov,
                })
            })
            .collect();
        serde_json::json!({ "primes": entries })
    }
}

/// Fixed point of the closure rule: admit any prime p <= bound whose
/// sigma(p) = p + 1 factors as 2^r times distinct primes already in the
/// set. Candidates are processed ascending, so provenance records are
/// reproducible; the fixed point itself is order-independent.
pub fn closure_extend(seed: &GoodSet, bound: u64) -> GoodSet {
    let mut result = seed.clone();
    let candidates: Vec<u64> = primes_up_to(bound).into_iter().filter(|&p| p > 2).collect();
    loop {
        let mut changed = false;
        for &p in &candidates {
            let p_nat = Natural::from(p);
            if result.contains(&p_nat) {
                continue;
            }
            let (odd, r) = arithmetic::odd_part_u64(p + 1);
            let mut effort = arithmetic::DEFAULT_FACTOR_EFFORT;
            let factors = match arithmetic::factor_u64(odd, &mut effort) {
                Ok(f) => f,
                Err(_) => continue,
            };
            if factors.values().all(|&a| a == 1)
                && factors.keys().all(|q| result.contains(&Natural::from(*q)))
            {
                let cert = ClosureCertificate {
                    two_exponent: r,
                    odd_primes: factors.keys().map(|&q| Natural::from(q)).collect(),
                };
                result.insert(p_nat, Provenance::Closure(cert));
                changed = true;
            }
        }
        if !changed {
            return result;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductError {
    #[error("repeated prime {0} (the product must be square-free)")]
    RepeatedPrime(Natural),
    #[error("prime {0} is not a member of the given set")]
    NotInSet(Natural),
}

/// Forms the product of distinct set members and runs the iteration.
pub fn verify_product(
    primes: &[Natural],
    set: &GoodSet,
    budget: &Budget,
) -> Result<Convergence, ProductError> {
    let mut seen = BTreeSet::new();
    let mut n = Natural::one();
    for p in primes {
        if !seen.insert(p.clone()) {
            return Err(ProductError::RepeatedPrime(p.clone()));
        }
        if !set.contains(p) {
            return Err(ProductError::NotInSet(p.clone()));
        }
        n *= p;
    }
    Ok(reaches_one(&n, budget))
}

/// Outcome of a bulk product verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProductCheckReport {
    pub products_checked: u64,
    /// Factor lists of products that did not resolve within budget.
    pub undecided: Vec<Vec<u64>>,
}

/// Checks every square-free product of 1..=max_factors distinct members.
///
/// For distinct primes the first map application is sigma(n) =
/// prod(p_i + 1) by multiplicativity, so the product itself is never
/// factorized; the walk continues from there through a shared
/// [`ConvergenceCache`].
pub fn verify_products(set: &GoodSet, max_factors: usize, budget: &Budget) -> ProductCheckReport {
    assert!(max_factors >= 1);
    let members: Vec<u64> = set
        .iter()
        .map(|p| p.to_u64().expect("bulk verification expects word-size members"))
        .collect();
    let cache = ConvergenceCache::new();

    // Seed the cache with one walk per member so the parallel phase mostly
    // hits shared suffixes.
    for &p in &members {
        cache.check_u64(p, budget);
    }

    // one task per first factor, so products are enumerated exactly once
    let scan_from = |i: usize| -> (u64, Vec<Vec<u64>>) {
        let mut checked = 0u64;
        let mut undecided = Vec::new();
        let mut combo = vec![members[i]];
        let sigma = members[i] as u128 + 1;
        check_product(&combo, sigma, &cache, budget, &mut checked, &mut undecided);
        extend_products(
            &members,
            i + 1,
            max_factors - 1,
            sigma,
            &mut combo,
            &cache,
            budget,
            &mut checked,
            &mut undecided,
        );
        (checked, undecided)
    };

    let results = run_indexed(members.len(), scan_from);
    let mut report = ProductCheckReport {
        products_checked: 0,
        undecided: Vec::new(),
    };
    for (checked, undecided) in results {
        report.products_checked += checked;
        report.undecided.extend(undecided);
    }
    report.undecided.sort();
    report
}

#[cfg(feature = "parallel")]
fn run_indexed<F>(n: usize, f: F) -> Vec<(u64, Vec<Vec<u64>>)>
where
    F: Fn(usize) -> (u64, Vec<Vec<u64>>) + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_indexed<F>(n: usize, f: F) -> Vec<(u64, Vec<Vec<u64>>)>
where
    F: Fn(usize) -> (u64, Vec<Vec<u64>>) + Sync + Send,
{
    (0..n).map(f).collect()
}

fn check_product(
    combo: &[u64],
    sigma: u128,
    cache: &ConvergenceCache,
    budget: &Budget,
    checked: &mut u64,
    undecided: &mut Vec<Vec<u64>>,
) {
    *checked += 1;
    let converged = match u64::try_from(sigma) {
        // sigma(prod p_i) = prod (p_i + 1) by multiplicativity, so the walk
        // can start one step in without factorizing the product itself
        Ok(s) => cache.check_u64(s, budget),
        Err(_) => {
            // product of sigmas exceeds a word; fall back to the generic walk
            matches!(
                reaches_one(&combo.iter().map(|&q| Natural::from(q)).product(), budget),
                Convergence::Converged { .. }
            )
        }
    };
    if !converged {
        undecided.push(combo.to_vec());
    }
}

#[allow(clippy::too_many_arguments)]
fn extend_products(
    members: &[u64],
    start: usize,
    remaining: usize,
    sigma_so_far: u128,
    combo: &mut Vec<u64>,
    cache: &ConvergenceCache,
    budget: &Budget,
    checked: &mut u64,
    undecided: &mut Vec<Vec<u64>>,
) {
    if remaining == 0 {
        return;
    }
    for j in start..members.len() {
        combo.push(members[j]);
        let sigma = sigma_so_far * (members[j] as u128 + 1);
        check_product(combo, sigma, cache, budget, checked, undecided);
        extend_products(
            members,
            j + 1,
            remaining - 1,
            sigma,
            combo,
            cache,
            budget,
            checked,
            undecided,
        );
        combo.pop();
    }
}
