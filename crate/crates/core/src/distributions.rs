//! Continuous univariate laws used by the maxima and concomitant models.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::open_uniform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("probability {0} is outside the open interval (0, 1)")]
    Domain(f64),
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
}

/// Continuous base law `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Univariate {
    Uniform,
    Exponential { rate: f64 },
    Pareto { shape: f64 },
}

impl fmt::Display for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Univariate::Uniform => f.write_str("uniform(0,1)"),
            Univariate::Exponential { rate } => write!(f, "exponential({rate})"),
            Univariate::Pareto { shape } => write!(f, "pareto({shape})"),
        }
    }
}

impl Univariate {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(DistributionError::Parameter { name: "rate", value: rate });
        }
        Ok(Univariate::Exponential { rate })
    }

    pub fn pareto(shape: f64) -> Result<Self, DistributionError> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(DistributionError::Parameter { name: "shape", value: shape });
        }
        Ok(Univariate::Pareto { shape })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Left and right endpoints of the support.
    pub fn extremities(&self) -> (f64, f64) {
        match self {
            Univariate::Uniform => (0.0, 1.0),
            Univariate::Exponential { .. } => (0.0, f64::INFINITY),
            Univariate::Pareto { .. } => (1.0, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Univariate::Uniform => x.clamp(0.0, 1.0),
            Univariate::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Univariate::Pareto { shape } => {
                if x <= 1.0 {
                    0.0
                } else {
                    -(-shape * x.ln()).exp_m1()
                }
            }
        }
    }

    /// `1 - F(x)`, without cancellation in the right tail.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Univariate::Uniform => 1.0 - x.clamp(0.0, 1.0),
            Univariate::Exponential { rate } => (-rate * x.max(0.0)).exp(),
            Univariate::Pareto { shape } => x.max(1.0).powf(-shape),
        }
    }

    /// `ln F(x)`, accurate when `F(x)` is close to 1.
    pub fn log_cdf(&self, x: f64) -> f64 {
        match *self {
            Univariate::Uniform => self.cdf(x).ln(),
            _ => {
                let s = self.survival(x);
                if s < 0.5 {
                    (-s).ln_1p()
                } else {
                    self.cdf(x).ln()
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistributionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistributionError::Domain(p));
        }
        Ok(match *self {
            Univariate::Uniform => p,
            Univariate::Exponential { rate } => -(-p).ln_1p() / rate,
            Univariate::Pareto { shape } => (-(-p).ln_1p() / shape).exp(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_uniform(rng);
        self.quantile(u).expect("open uniform lies in (0, 1)")
    }
}

/// The law `F^alpha` for a base law `F` and `alpha > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTransform {
    pub base: Univariate,
    pub alpha: f64,
}

impl PowerTransform {
    pub fn new(base: Univariate, alpha: f64) -> Result<Self, DistributionError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(DistributionError::Parameter { name: "alpha", value: alpha });
        }
        Ok(Self { base, alpha })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.log_cdf(x).exp()
    }

    pub fn log_cdf(&self, x: f64) -> f64 {
        let l = self.base.log_cdf(x);
        if l == f64::NEG_INFINITY {
            l
        } else {
            self.alpha * l
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistributionError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistributionError::Domain(p));
        }
        let q = (p.ln() / self.alpha).exp();
        if q >= 1.0 {
            return Ok(self.base.extremities().1.min(self.base.quantile(1.0 - f64::EPSILON / 2.0)?));
        }
        self.base.quantile(q)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_uniform(rng);
        self.quantile(u).expect("open uniform lies in (0, 1)")
    }
}
