//! Borel-Cantelli criteria for Markov sequences of events.
//!
//! The crate evaluates, exactly where closed forms exist and by seeded Monte
//! Carlo elsewhere, the series criteria that decide whether a Markov sequence
//! of events occurs infinitely often, together with two applications:
//! concomitants of sample maxima and running maxima of the F^alpha-scheme.

pub mod copula;
pub mod distributions;
pub mod falpha;
pub mod harness;
pub mod markov;
pub mod quadrature;
pub mod rng;
pub mod series;

pub use series::{classify, partial_sum, Budget, SeriesClass, SeriesFamily, SeriesVerdict, TermSequence};
