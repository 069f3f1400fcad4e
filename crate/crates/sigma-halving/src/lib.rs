//! Library and CLI around the halving dynamical system on the naturals:
//! map odd n to sigma(n), the sum of its divisors, and even n to n/2.
//! Every value is conjectured to reach 1; products of Mersenne-rooted
//! prime families provably do.
//!
//! - [`arithmetic`]: primality, factorization and sigma over
//!   arbitrary-precision naturals, with a machine-word fast path.
//! - [`trajectory`]: the map itself, budgeted iteration, cycle detection
//!   and descent times.
//! - [`families`]: the Mersenne-rooted level structure, closure extension
//!   and the square-free product verifier.
//! - [`perfection`]: abundancy index as an exact rational, perfect /
//!   k-perfect / superperfect predicates and odd-perfect form checks.
//! - [`harness`]: checkpointed, resumable range sweeps with a verified
//!   frontier, parallel when the `parallel` feature (default) is on.

pub mod arithmetic;
pub mod families;
pub mod harness;
pub mod perfection;
pub mod trajectory;

pub use arithmetic::{ArithmeticError, Factorization, Natural};
pub use trajectory::{Budget, Convergence, Outcome, TrajectoryRecord};
