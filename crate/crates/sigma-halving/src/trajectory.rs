//! The halving map and its iteration: sigma(n) for odd n, n/2 for even n.
//!
//! Iteration is budgeted on step count, value bit-length and factorization
//! effort; running out of budget is an outcome, not a failure. 1 is the
//! unique fixed point (1 is odd and sigma(1) = 1).

use std::collections::HashMap;

use dashmap::DashSet;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use num_traits::Zero;

use crate::arithmetic::{
    self, natural_from_u128, sigma_with_effort, ArithmeticError, Natural, DEFAULT_FACTOR_EFFORT,
};

/// Iteration limits. The map is conjectured, not proven, to reach 1, so
/// every run is bounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of map applications.
    pub max_steps: u64,
    /// Abort once a value exceeds this bit-length.
    pub max_bits: u64,
    /// Splitting-iteration cap per sigma call.
    pub factor_effort: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: 100_000,
            max_bits: 4096,
            factor_effort: DEFAULT_FACTOR_EFFORT,
        }
    }
}

pub const ENV_MAX_STEPS: &str = "SIGMA_HALVING_MAX_STEPS";
pub const ENV_MAX_BITS: &str = "SIGMA_HALVING_MAX_BITS";
pub const ENV_FACTOR_EFFORT: &str = "SIGMA_HALVING_FACTOR_EFFORT";

impl Budget {
    /// Defaults, with `SIGMA_HALVING_{MAX_STEPS,MAX_BITS,FACTOR_EFFORT}`
    /// environment overrides applied.
    pub fn from_env() -> Budget {
        let mut b = Budget::default();
        let read = |key: &str| {
            std::env::var(key)
                .ok()
                .and_then(|v| v.parse::<u64>().ok())
                .filter(|v| *v >= 1)
        };
        if let Some(v) = read(ENV_MAX_STEPS) {
            b.max_steps = v;
        }
        if let Some(v) = read(ENV_MAX_BITS) {
            b.max_bits = v;
        }
        if let Some(v) = read(ENV_FACTOR_EFFORT) {
            b.factor_effort = v;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetReason {
    Steps,
    Bits,
    Factorization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    ReachedOne { steps: u64 },
    CycleDetected { entry: Natural, period: u64 },
    BudgetExceeded { reason: BudgetReason },
}

/// Step list, elided to head and tail once it grows past the threshold.
/// Statistics in the surrounding record stay exact either way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Steps {
    Full(Vec<Natural>),
    Elided {
        first: Vec<Natural>,
        last: Vec<Natural>,
        total: u64,
    },
}

impl Steps {
    pub fn total(&self) -> u64 {
        match self {
            Steps::Full(v) => v.len() as u64,
            Steps::Elided { total, .. } => *total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub start: Natural,
    pub steps: Steps,
    pub outcome: Outcome,
    pub peak_bits: u64,
    pub odd_steps: u64,
    pub even_steps: u64,
}

/// Result of a convergence query: either the step count to 1, or a reason
/// the run stopped without deciding. Divergence is never claimed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Convergence {
    Converged { steps: u64 },
    Undecided { reason: UndecidedReason },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UndecidedReason {
    Steps,
    Bits,
    Factorization,
    Cycle { entry: Natural, period: u64 },
}

/// One application of the map: sigma(n) if n is odd, n/2 if n is even.
pub fn r_step(n: &Natural) -> Result<Natural, ArithmeticError> {
    assert!(!n.is_zero(), "map domain is n >= 1");
    if n.is_even() {
        Ok(n >> 1)
    } else {
        arithmetic::sigma(n)
    }
}

/// Internal iteration value: machine word with overflow promotion.
/// The promotion is unobservable in results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Value {
    Small(u64),
    Big(Natural),
}

impl Value {
    pub(crate) fn from_natural(n: &Natural) -> Value {
        match n.to_u64() {
            Some(v) => Value::Small(v),
            None => Value::Big(n.clone()),
        }
    }

    pub(crate) fn to_natural(&self) -> Natural {
        match self {
            Value::Small(v) => Natural::from(*v),
            Value::Big(b) => b.clone(),
        }
    }

    pub(crate) fn is_one(&self) -> bool {
        matches!(self, Value::Small(1))
    }

    pub(crate) fn is_odd(&self) -> bool {
        match self {
            Value::Small(v) => v & 1 == 1,
            Value::Big(b) => b.is_odd(),
        }
    }

    pub(crate) fn bits(&self) -> u64 {
        match self {
            Value::Small(v) => 64 - v.leading_zeros() as u64,
            Value::Big(b) => b.bits(),
        }
    }

    pub(crate) fn step(self, factor_effort: u64) -> Result<Value, ArithmeticError> {
        match self {
            Value::Small(v) => {
                if v & 1 == 0 {
                    Ok(Value::Small(v >> 1))
                } else {
                    let mut effort = factor_effort;
                    let s = arithmetic::sigma_u64(v, &mut effort)?;
                    Ok(match u64::try_from(s) {
                        Ok(w) => Value::Small(w),
                        Err(_) => Value::Big(natural_from_u128(s)),
                    })
                }
            }
            Value::Big(b) => {
                if b.is_even() {
                    let h = b >> 1;
                    Ok(Value::from_natural(&h))
                } else {
                    let s = sigma_with_effort(&b, factor_effort)?;
                    Ok(Value::from_natural(&s))
                }
            }
        }
    }
}

const ELIDE_THRESHOLD: usize = 10_000;
const ELIDE_KEEP: usize = 100;

struct StepLog {
    head: Vec<Natural>,
    tail: Vec<Natural>,
    total: u64,
}

impl StepLog {
    fn new() -> Self {
        StepLog {
            head: Vec::new(),
            tail: Vec::new(),
            total: 0,
        }
    }

    fn push(&mut self, v: Natural) {
        self.total += 1;
        if (self.total as usize) <= ELIDE_THRESHOLD {
            self.head.push(v);
        } else {
            if self.tail.len() == ELIDE_KEEP {
                self.tail.remove(0);
            }
            self.tail.push(v);
        }
    }

    fn finish(mut self) -> Steps {
        if self.tail.is_empty() {
            Steps::Full(self.head)
        } else {
            self.head.truncate(ELIDE_KEEP);
            Steps::Elided {
                first: self.head,
                last: self.tail,
                total: self.total,
            }
        }
    }
}

/// Iterates the map from n until 1, a cycle, or a budget trip.
pub fn trajectory(n: &Natural, budget: &Budget) -> TrajectoryRecord {
    assert!(!n.is_zero(), "map domain is n >= 1");
    let mut value = Value::from_natural(n);
    let mut log = StepLog::new();
    log.push(value.to_natural());
    let mut peak_bits = value.bits();
    let mut odd_steps = 0u64;
    let mut even_steps = 0u64;
    let mut steps = 0u64;
    // Halvings strictly decrease, so any cycle must revisit an odd value;
    // a nontrivial hit would correspond to an odd perfect number.
    let mut seen_small: HashMap<u64, u64> = HashMap::new();
    let mut seen_big: HashMap<Natural, u64> = HashMap::new();
    let outcome = loop {
        if value.is_one() {
            break Outcome::ReachedOne { steps };
        }
        if value.is_odd() {
            let prev = match &value {
                Value::Small(v) => seen_small.insert(*v, steps),
                Value::Big(b) => seen_big.insert(b.clone(), steps),
            };
            if let Some(first) = prev {
                break Outcome::CycleDetected {
                    entry: value.to_natural(),
                    period: steps - first,
                };
            }
        }
        if steps >= budget.max_steps {
            break Outcome::BudgetExceeded {
                reason: BudgetReason::Steps,
            };
        }
        let odd = value.is_odd();
        value = match value.step(budget.factor_effort) {
            Ok(v) => v,
            Err(ArithmeticError::BudgetExceeded { .. }) => {
                break Outcome::BudgetExceeded {
                    reason: BudgetReason::Factorization,
                }
            }
        };
        steps += 1;
        if odd {
            odd_steps += 1;
        } else {
            even_steps += 1;
        }
        peak_bits = peak_bits.max(value.bits());
        log.push(value.to_natural());
        if value.bits() > budget.max_bits {
            break Outcome::BudgetExceeded {
                reason: BudgetReason::Bits,
            };
        }
    };
    TrajectoryRecord {
        start: n.clone(),
        steps: log.finish(),
        outcome,
        peak_bits,
        odd_steps,
        even_steps,
    }
}

/// Convergence query when only the verdict matters; discards the step list.
pub fn reaches_one(n: &Natural, budget: &Budget) -> Convergence {
    let record = trajectory(n, budget);
    match record.outcome {
        Outcome::ReachedOne { steps } => Convergence::Converged { steps },
        Outcome::CycleDetected { entry, period } => Convergence::Undecided {
            reason: UndecidedReason::Cycle { entry, period },
        },
        Outcome::BudgetExceeded { reason } => Convergence::Undecided {
            reason: match reason {
                BudgetReason::Steps => UndecidedReason::Steps,
                BudgetReason::Bits => UndecidedReason::Bits,
                BudgetReason::Factorization => UndecidedReason::Factorization,
            },
        },
    }
}

/// Smallest k >= 1 with the k-th iterate <= n, or None within budget.
pub fn descent_time(n: &Natural, budget: &Budget) -> Option<u64> {
    assert!(!n.is_zero(), "map domain is n >= 1");
    let start = Value::from_natural(n);
    let mut value = start.clone();
    let mut k = 0u64;
    loop {
        if k >= budget.max_steps {
            return None;
        }
        value = match value.step(budget.factor_effort) {
            Ok(v) => v,
            Err(_) => return None,
        };
        k += 1;
        if value_le(&value, &start) {
            return Some(k);
        }
        if value.bits() > budget.max_bits {
            return None;
        }
    }
}

fn value_le(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Small(x), Value::Small(y)) => x <= y,
        (Value::Small(_), Value::Big(_)) => true,
        (Value::Big(_), Value::Small(_)) => false,
        (Value::Big(x), Value::Big(y)) => x <= y,
    }
}

/// Shared set of machine-word values known to reach 1. Used by bulk
/// verification where only convergence matters, not step counts: a walk
/// that lands on a cached value is done, and every odd value it visited
/// is cached in turn. Entries are inserted only after a walk actually
/// reached 1 (or a cached value), so membership is always sound.
pub struct ConvergenceCache {
    known: DashSet<u64>,
    cap: usize,
}

impl Default for ConvergenceCache {
    fn default() -> Self {
        Self::new()
    }
}

impl ConvergenceCache {
    pub fn new() -> Self {
        ConvergenceCache {
            known: DashSet::new(),
            cap: 1 << 26,
        }
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// True if n provably reaches 1 within the budget. False means
    /// undecided, never divergent.
    pub fn check_u64(&self, n: u64, budget: &Budget) -> bool {
        assert!(n >= 1);
        let mut value = Value::Small(n);
        let mut visited: Vec<u64> = Vec::new();
        let mut steps = 0u64;
        loop {
            if value.is_one() {
                self.commit(&visited);
                return true;
            }
            if let Value::Small(v) = value {
                if v & 1 == 1 {
                    if self.known.contains(&v) {
                        self.commit(&visited);
                        return true;
                    }
                    visited.push(v);
                }
            }
            if steps >= budget.max_steps {
                return false;
            }
            value = match value.step(budget.factor_effort) {
                Ok(v) => v,
                Err(_) => return false,
            };
            steps += 1;
            if value.bits() > budget.max_bits {
                return false;
            }
        }
    }

    fn commit(&self, visited: &[u64]) {
        if self.known.len() + visited.len() > self.cap {
            return; // cache full; lookups keep working
        }
        for &v in visited {
            self.known.insert(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn full_steps(rec: &TrajectoryRecord) -> Vec<u64> {
        match &rec.steps {
            Steps::Full(v) => v.iter().map(|x| x.to_u64().unwrap()).collect(),
            Steps::Elided { .. } => panic!("unexpected elision"),
        }
    }

    #[test]
    fn r_step_examples() {
        assert_eq!(r_step(&nat(4)).unwrap(), nat(2));
        assert_eq!(r_step(&nat(3)).unwrap(), nat(4));
        assert_eq!(r_step(&nat(29)).unwrap(), nat(30));
        assert_eq!(r_step(&nat(1)).unwrap(), nat(1));
    }

    #[test]
    fn trajectory_of_one() {
        let rec = trajectory(&nat(1), &Budget::default());
        assert_eq!(rec.outcome, Outcome::ReachedOne { steps: 0 });
        assert_eq!(full_steps(&rec), vec![1]);
        assert_eq!(rec.odd_steps + rec.even_steps, 0);
    }

    #[test]
    fn trajectory_of_five() {
        let rec = trajectory(&nat(5), &Budget::default());
        assert_eq!(full_steps(&rec), vec![5, 6, 3, 4, 2, 1]);
        assert_eq!(rec.outcome, Outcome::ReachedOne { steps: 5 });
        assert_eq!(rec.odd_steps, 2); // 5 and 3
        assert_eq!(rec.even_steps, 3);
    }

    #[test]
    fn trajectory_of_nineteen() {
        let rec = trajectory(&nat(19), &Budget::default());
        assert_eq!(full_steps(&rec), vec![19, 20, 10, 5, 6, 3, 4, 2, 1]);
        assert_eq!(rec.outcome, Outcome::ReachedOne { steps: 8 });
    }

    #[test]
    fn reaches_one_examples() {
        let b = Budget::default();
        assert_eq!(
            reaches_one(&nat(1 << 20), &b),
            Convergence::Converged { steps: 20 }
        );
        assert_eq!(reaches_one(&nat(1), &b), Convergence::Converged { steps: 0 });
        assert!(matches!(
            reaches_one(&nat(27), &b),
            Convergence::Converged { .. }
        ));
    }

    #[test]
    fn descent_time_examples() {
        let b = Budget::default();
        for n in [2u64, 4, 6, 100, 65536] {
            assert_eq!(descent_time(&nat(n), &b), Some(1), "even n = {n}");
        }
        assert_eq!(descent_time(&nat(1), &b), Some(1)); // map(1) = 1 <= 1
        assert_eq!(descent_time(&nat(3), &b), Some(2));
        assert_eq!(descent_time(&nat(9), &b), Some(3)); // 9 -> 13 -> 14 -> 7
    }

    #[test]
    fn step_budget_trips() {
        let b = Budget {
            max_steps: 3,
            ..Budget::default()
        };
        let rec = trajectory(&nat(19), &b);
        assert_eq!(
            rec.outcome,
            Outcome::BudgetExceeded {
                reason: BudgetReason::Steps
            }
        );
        assert_eq!(rec.odd_steps + rec.even_steps, 3);
    }

    #[test]
    fn bits_budget_trips() {
        let b = Budget {
            max_bits: 4,
            ..Budget::default()
        };
        let rec = trajectory(&nat(27), &b); // sigma(27) = 40 > 2^4
        assert_eq!(
            rec.outcome,
            Outcome::BudgetExceeded {
                reason: BudgetReason::Bits
            }
        );
    }

    #[test]
    fn determinism() {
        let b = Budget::default();
        let a = trajectory(&nat(12345), &b);
        let c = trajectory(&nat(12345), &b);
        assert_eq!(a, c);
    }

    #[test]
    fn parity_law() {
        let b = Budget::default();
        for n in 1..400u64 {
            let rec = trajectory(&nat(n), &b);
            let steps = full_steps(&rec);
            for w in steps.windows(2) {
                if w[0] % 2 == 0 {
                    assert_eq!(w[1], w[0] / 2);
                } else if w[0] > 1 {
                    assert!(w[1] > w[0], "sigma(n) >= n + 1 for odd n > 1");
                }
            }
        }
    }

    #[test]
    fn elision_keeps_statistics_exact() {
        // 2^k halves k times; a large power of two gives a long step list
        let n = Natural::one() << 20000;
        let b = Budget {
            max_steps: 100_000,
            max_bits: 30_000,
            ..Budget::default()
        };
        let rec = trajectory(&n, &b);
        assert_eq!(rec.outcome, Outcome::ReachedOne { steps: 20000 });
        match rec.steps {
            Steps::Elided { first, last, total } => {
                assert_eq!(first.len(), 100);
                assert_eq!(last.len(), 100);
                assert_eq!(total, 20001);
                assert_eq!(last.last().unwrap(), &Natural::one());
            }
            Steps::Full(_) => panic!("expected elided steps"),
        }
        assert_eq!(rec.even_steps, 20000);
    }

    #[test]
    fn cache_agrees_with_reaches_one() {
        let b = Budget::default();
        let cache = ConvergenceCache::new();
        for n in 1..2000u64 {
            let direct = matches!(reaches_one(&nat(n), &b), Convergence::Converged { .. });
            assert_eq!(cache.check_u64(n, &b), direct, "n = {n}");
        }
        assert!(!cache.is_empty());
        // second pass hits the cache
        for n in 1..2000u64 {
            assert!(cache.check_u64(n, &b));
        }
    }

    #[test]
    fn budget_from_env_defaults() {
        let b = Budget::default();
        assert_eq!(b.max_steps, 100_000);
        assert_eq!(b.max_bits, 4096);
    }
}
