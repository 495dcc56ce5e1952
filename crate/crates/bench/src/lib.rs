//! Shared fixtures for the benchmarks.

use bcmarkov_core::copula::{BivariateModel, Copula};
use bcmarkov_core::markov::IndicatorKernel;

/// Order-1 chain with `q_n = 1/(n+1)^power` and constant `p`.
pub fn sparse_chain(p: f64, power: f64) -> IndicatorKernel {
    IndicatorKernel::two_state(move |_| p, move |n| 1.0 / ((n + 1) as f64).powf(power), 0.0).expect("valid kernel")
}

pub fn fgm_model(lambda: f64) -> BivariateModel {
    BivariateModel::uniform(Copula::fgm(lambda).expect("valid lambda")).expect("valid model")
}
