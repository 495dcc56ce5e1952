//! Concomitants of sample maxima in a bivariate model `F(x, y) = C(H(x), G(y))`.
//!
//! Every integral runs on the copula scale `u = H(x)`. With `v = G(y)`:
//!
//! * `P(Y_[n,n] <= y) = n ∫ u^{n-1} ∂₁C(u, v) du`
//! * criterion term `n ∫ u^{n-1} (v - C)(1 - ∂₁C) du`, which sums over `n` to
//!   the criterion integral `∫ (v - C)(1 - ∂₁C) / (1 - u)² du`
//! * `β(y) = lim_{u -> 1} (v - C(u, v)) / (1 - u)`
//!
//! The factor `n u^{n-1} du` is absorbed by `s = u^n`, and the criterion
//! integral is evaluated in `t = -ln(1 - u)`, where its integrand is bounded.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::Univariate;
use crate::quadrature::{integrate_fn, QuadratureError, DEFAULT_TOLERANCE};
use crate::rng::{open_uniform, rng_from_seed};
use crate::series::{self, Budget, SeriesClass, SeriesError, TermSequence};

/// Truncation points `ε` for the criterion-integral fit.
pub const EPSILON_SCHEDULE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Slopes at or below this are treated as zero by the divergence rule.
pub const SLOPE_FLOOR: f64 = 1e-8;

/// Successive `β` estimates closer than this count as stabilized.
pub const BETA_STABILITY: f64 = 1e-6;

/// Budget for classifying the criterion-term series by quadrature.
pub fn cross_check_budget() -> Budget {
    Budget::default().with_max_index(10_000).with_sum_limit(10_000)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopulaError {
    #[error("FGM parameter must lie in [-1, 1], got {0}")]
    Parameter(f64),
    #[error("conditional quantile failed at w = {w}, u = {u}")]
    RootFind { w: f64, u: f64 },
    #[error("n must be at least 1")]
    ZeroIndex,
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    Epsilon(f64),
    #[error("y = {y} is not below the right extremity of G")]
    AtRightExtremity { y: f64 },
    #[error("criterion series and criterion integral disagree at y = {y}: series {series}, integral {integral}")]
    Inconsistent { y: f64, series: SeriesClass, integral: SeriesClass },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Copula {
    Independence,
    /// Farlie-Gumbel-Morgenstern, `C = uv(1 + λ(1-u)(1-v))`.
    Fgm {
        lambda: f64,
    },
    /// Upper Fréchet bound `min(u, v)`.
    Comonotone,
}

impl fmt::Display for Copula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Copula::Independence => f.write_str("independence"),
            Copula::Fgm { lambda } => write!(f, "fgm({lambda})"),
            Copula::Comonotone => f.write_str("comonotone"),
        }
    }
}

impl Copula {
    pub fn fgm(lambda: f64) -> Result<Self, CopulaError> {
        if !(-1.0..=1.0).contains(&lambda) {
            return Err(CopulaError::Parameter(lambda));
        }
        Ok(Copula::Fgm { lambda })
    }

    /// Parses `independence`, `comonotone` or `fgm` with the given `lambda`.
    pub fn from_name(name: &str, lambda: Option<f64>) -> Result<Self, String> {
        match name.trim().to_ascii_lowercase().as_str() {
            "independence" | "independent" => Ok(Copula::Independence),
            "comonotone" | "comonotonic" => Ok(Copula::Comonotone),
            "fgm" => Copula::fgm(lambda.unwrap_or(1.0)).map_err(|e| e.to_string()),
            other => Err(format!("unknown copula `{other}`")),
        }
    }

    pub fn validate(&self) -> Result<(), CopulaError> {
        match *self {
            Copula::Fgm { lambda } => Copula::fgm(lambda).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => u * v,
            Copula::Fgm { lambda } => u * v * (1.0 + lambda * (1.0 - u) * (1.0 - v)),
            Copula::Comonotone => u.min(v),
        }
    }

    /// `∂C/∂u`; for the comonotone copula `1{u < v}`.
    pub fn d1(&self, u: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => v,
            Copula::Fgm { lambda } => v * (1.0 + lambda * (1.0 - 2.0 * u) * (1.0 - v)),
            Copula::Comonotone => {
                if u < v {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `v - C(u, v)`, given `w = 1 - u` separately to keep precision near `u = 1`.
    pub fn gap(&self, u: f64, w: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => v * w,
            Copula::Fgm { lambda } => v * w * (1.0 - lambda * u * (1.0 - v)),
            Copula::Comonotone => (v - u).max(0.0),
        }
    }

    /// `1 - ∂C/∂u`.
    pub fn complement_d1(&self, u: f64, v: f64) -> f64 {
        match *self {
            Copula::Independence => 1.0 - v,
            Copula::Fgm { lambda } => (1.0 - v) * (1.0 - lambda * (1.0 - 2.0 * u) * v),
            Copula::Comonotone => 1.0 - self.d1(u, v),
        }
    }

    /// Points in `u` where the integrands are not smooth.
    fn breakpoints(&self, v: f64) -> Option<f64> {
        match self {
            Copula::Comonotone if v > 0.0 && v < 1.0 => Some(v),
            _ => None,
        }
    }

    /// Solves `∂₁C(u, v) = w` for `v`.
    pub fn cond_quantile(&self, w: f64, u: f64) -> Result<f64, CopulaError> {
        let v = match *self {
            Copula::Independence => w,
            Copula::Fgm { lambda } => {
                let a = lambda * (1.0 - 2.0 * u);
                let b = 1.0 + a;
                2.0 * w / (b + (b * b - 4.0 * a * w).sqrt())
            }
            Copula::Comonotone => u,
        };
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(CopulaError::RootFind { w, u })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateModel {
    pub copula: Copula,
    pub marginal_x: Univariate,
    pub marginal_y: Univariate,
}

impl BivariateModel {
    pub fn new(copula: Copula, marginal_x: Univariate, marginal_y: Univariate) -> Result<Self, CopulaError> {
        copula.validate()?;
        Ok(Self { copula, marginal_x, marginal_y })
    }

    pub fn uniform(copula: Copula) -> Result<Self, CopulaError> {
        Self::new(copula, Univariate::Uniform, Univariate::Uniform)
    }

    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        self.copula.cdf(self.marginal_x.cdf(x), self.marginal_y.cdf(y))
    }

    /// `v = G(y)`, rejecting `y` at or beyond the right extremity.
    fn level(&self, y: f64) -> Result<f64, CopulaError> {
        let v = self.marginal_y.cdf(y);
        if v >= 1.0 || y >= self.marginal_y.extremities().1 {
            return Err(CopulaError::AtRightExtremity { y });
        }
        Ok(v)
    }
}

fn quantile_or_edge(d: Univariate, p: f64) -> f64 {
    let (lo, hi) = d.extremities();
    if p <= 0.0 {
        lo
    } else if p >= 1.0 {
        hi
    } else {
        d.quantile(p).unwrap_or(hi)
    }
}

/// One pair on the copula scale by conditional inversion.
pub fn sample_uv<R: Rng + ?Sized>(copula: &Copula, rng: &mut R) -> Result<(f64, f64), CopulaError> {
    let u = open_uniform(rng);
    let w = open_uniform(rng);
    Ok((u, copula.cond_quantile(w, u)?))
}

pub fn sample_pair_with<R: Rng + ?Sized>(model: &BivariateModel, rng: &mut R) -> Result<(f64, f64), CopulaError> {
    let (u, v) = sample_uv(&model.copula, rng)?;
    Ok((quantile_or_edge(model.marginal_x, u), quantile_or_edge(model.marginal_y, v)))
}

pub fn sample_pair(model: &BivariateModel, seed: u64) -> Result<(f64, f64), CopulaError> {
    sample_pair_with(model, &mut rng_from_seed(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcomitantStep {
    pub n: u64,
    pub x_max: f64,
    pub y_concomitant: f64,
}

/// Running maximum of `X` and the `Y` paired with it, for `n = 1..=T`.
pub fn concomitant_of_max_stream(
    model: &BivariateModel,
    horizon: usize,
    seed: u64,
) -> Result<Vec<ConcomitantStep>, CopulaError> {
    let mut rng = rng_from_seed(seed);
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    let mut out = Vec::with_capacity(horizon);
    for n in 1..=horizon as u64 {
        let (x, y) = sample_pair_with(model, &mut rng)?;
        if x > best.0 {
            best = (x, y);
        }
        out.push(ConcomitantStep { n, x_max: best.0, y_concomitant: best.1 });
    }
    Ok(out)
}

/// Copula-scale concomitant levels `V_[n,n]` for `n = 1..=T`.
pub fn concomitant_levels_with<R: Rng + ?Sized>(
    copula: &Copula,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>, CopulaError> {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (u, v) = sample_uv(copula, rng)?;
        if u > best.0 {
            best = (u, v);
        }
        out.push(best.1);
    }
    Ok(out)
}

/// `n ∫_0^{upper} u^{n-1} g(u, 1-u) du`, as `∫_0^{upper^n} g(s^{1/n}) ds`.
fn power_weighted(n: u64, upper: f64, kink: Option<f64>, g: impl Fn(f64, f64) -> f64) -> Result<f64, CopulaError> {
    if n == 0 {
        return Err(CopulaError::ZeroIndex);
    }
    let inv = 1.0 / n as f64;
    let h = |s: f64| {
        if s <= 0.0 {
            return g(0.0, 1.0);
        }
        let l = s.ln() * inv;
        g(l.exp(), -l.exp_m1())
    };
    let top = upper.powf(n as f64);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let mut cuts = vec![0.0];
    if let Some(k) = kink {
        let s = k.powf(n as f64);
        if s > 0.0 && s < top {
            cuts.push(s);
        }
    }
    cuts.push(top);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_fn(h, w[0], w[1], DEFAULT_TOLERANCE)?.value;
    }
    Ok(total)
}

/// `P(Y_[n,n] <= y)`.
pub fn prob_concomitant_leq(model: &BivariateModel, n: u64, y: f64) -> Result<f64, CopulaError> {
    let v = model.marginal_y.cdf(y);
    let c = model.copula;
    power_weighted(n, 1.0, c.breakpoints(v), |u, _| c.d1(u, v))
}

/// Criterion term `P(Y_[n,n] > y, Y_[n+1,n+1] <= y)`.
pub fn criterion_term(model: &BivariateModel, n: u64, y: f64) -> Result<f64, CopulaError> {
    criterion_term_level(&model.copula, n, model.marginal_y.cdf(y), 1.0)
}

/// Criterion term at level `v`, with the `u` integral stopped at `upper`.
pub fn criterion_term_level(copula: &Copula, n: u64, v: f64, upper: f64) -> Result<f64, CopulaError> {
    let c = *copula;
    power_weighted(n, upper, c.breakpoints(v), |u, w| c.gap(u, w, v) * c.complement_d1(u, v))
}

/// `∫_0^{upper} (v - C)(1 - ∂₁C) / (1 - u)² du` at level `v`.
pub fn criterion_integral_to(copula: &Copula, v: f64, upper: f64) -> Result<f64, CopulaError> {
    let c = *copula;
    // In t = -ln(1 - u) the measure du / (1 - u)² becomes e^t dt.
    let h = |t: f64| {
        let w = (-t).exp();
        let u = -(-t).exp_m1();
        let g = c.gap(u, w, v);
        if g == 0.0 {
            0.0
        } else {
            g / w * c.complement_d1(u, v)
        }
    };
    let top = -(-upper).ln_1p();
    if top <= 0.0 {
        return Ok(0.0);
    }
    let mut cuts = vec![0.0];
    if let Some(k) = c.breakpoints(v) {
        let t = -(-k).ln_1p();
        if t < top {
            cuts.push(t);
        }
    }
    cuts.push(top);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_fn(h, w[0], w[1], DEFAULT_TOLERANCE)?.value;
    }
    Ok(total)
}

/// Partial criterion integrals with a fitted `a ln(1/ε) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionIntegral {
    pub level: f64,
    /// `(ε, ∫_0^{1-ε})` over the schedule.
    pub partial: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
    pub class: SeriesClass,
}

impl CriterionIntegral {
    pub fn is_finite(&self) -> bool {
        self.class == SeriesClass::Convergent
    }
}

/// Criterion integral over `[0, 1 - ε]`, for `ε` in `(0, 0.5)`.
pub fn criterion_integral_partial(model: &BivariateModel, y: f64, eps: f64) -> Result<f64, CopulaError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(CopulaError::Epsilon(eps));
    }
    criterion_integral_to(&model.copula, model.level(y)?, 1.0 - eps)
}

/// Evaluates the partial integrals over [`EPSILON_SCHEDULE`] and classifies:
/// divergent when the fitted slope exceeds ten times the fit residual.
pub fn criterion_integral(model: &BivariateModel, y: f64) -> Result<CriterionIntegral, CopulaError> {
    let v = model.level(y)?;
    let partial = EPSILON_SCHEDULE
        .iter()
        .map(|&e| Ok((e, criterion_integral_to(&model.copula, v, 1.0 - e)?)))
        .collect::<Result<Vec<_>, CopulaError>>()?;
    let xs: Vec<f64> = partial.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = partial.iter().map(|(_, i)| *i).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / m).sqrt();
    let divergent = slope > (10.0 * residual).max(SLOPE_FLOOR);
    Ok(CriterionIntegral {
        level: v,
        partial,
        slope,
        intercept,
        residual,
        class: if divergent { SeriesClass::Divergent } else { SeriesClass::Convergent },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLimit {
    pub estimate: f64,
    pub converged: bool,
}

/// `(v - C(u, v)) / (1 - u)` along `u = 1 - 2^{-j}`, `j = 1..=50`.
pub fn beta_limit(model: &BivariateModel, y: f64) -> Result<BetaLimit, CopulaError> {
    let v = model.level(y)?;
    let c = model.copula;
    let ratios: Vec<f64> = (1..=50)
        .map(|j| {
            let w = 0.5f64.powi(j);
            c.gap(1.0 - w, w, v) / w
        })
        .collect();
    let tail = &ratios[ratios.len() - 10..];
    let converged = tail.windows(2).all(|p| (p[1] - p[0]).abs() < BETA_STABILITY);
    let last = ratios[ratios.len() - 1];
    let prev = ratios[ratios.len() - 2];
    // The ratio is smooth in 1 - u; one Richardson step removes the linear term.
    let estimate = if converged { 2.0 * last - prev } else { last };
    Ok(BetaLimit { estimate, converged })
}

/// Outcome of the almost-sure convergence criterion for `Y_[n,n] -> r_G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConcomitantVerdict {
    ConvergesAS,
    DoesNotConvergeAS,
    Indeterminate,
}

impl fmt::Display for ConcomitantVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConcomitantVerdict::ConvergesAS => "ConvergesAS",
            ConcomitantVerdict::DoesNotConvergeAS => "DoesNotConvergeAS",
            ConcomitantVerdict::Indeterminate => "Indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelVerdict {
    pub y: f64,
    pub verdict: ConcomitantVerdict,
    pub integral: Option<CriterionIntegral>,
    /// Class of the criterion-term series from the series engine.
    pub series: Option<SeriesClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Report {
    pub levels: Vec<LevelVerdict>,
    /// Converges on the whole grid; a finite grid stands in for every `y`.
    pub overall: ConcomitantVerdict,
}

/// Criterion terms at level `y` as a series.
pub fn criterion_terms(model: &BivariateModel, y: f64) -> Result<TermSequence, CopulaError> {
    let v = model.level(y)?;
    let c = model.copula;
    criterion_term_level(&c, 1, v, 1.0)?;
    Ok(TermSequence::new(1, move |n| criterion_term_level(&c, n, v, 1.0).unwrap_or(f64::NAN)))
}

fn level_verdict(model: &BivariateModel, y: f64, budget: &Budget) -> Result<LevelVerdict, CopulaError> {
    let integral = match criterion_integral(model, y) {
        Ok(i) => i,
        Err(CopulaError::Quadrature(QuadratureError::Accuracy { .. })) => {
            return Ok(LevelVerdict { y, verdict: ConcomitantVerdict::Indeterminate, integral: None, series: None })
        }
        Err(e) => return Err(e),
    };
    let series = series::classify(&criterion_terms(model, y)?, budget)?.verdict;
    if series != SeriesClass::Indeterminate && series != integral.class {
        return Err(CopulaError::Inconsistent { y, series, integral: integral.class });
    }
    let verdict =
        if integral.is_finite() { ConcomitantVerdict::ConvergesAS } else { ConcomitantVerdict::DoesNotConvergeAS };
    Ok(LevelVerdict { y, verdict, integral: Some(integral), series: Some(series) })
}

/// Criterion verdict on a grid of levels, cross-checked against the series
/// of criterion terms.
pub fn theorem31_verdict(model: &BivariateModel, y_grid: &[f64]) -> Result<Theorem31Report, CopulaError> {
    theorem31_verdict_with(model, y_grid, &cross_check_budget())
}

pub fn theorem31_verdict_with(
    model: &BivariateModel,
    y_grid: &[f64],
    budget: &Budget,
) -> Result<Theorem31Report, CopulaError> {
    let levels = y_grid.iter().map(|&y| level_verdict(model, y, budget)).collect::<Result<Vec<_>, _>>()?;
    let overall = if levels.iter().any(|l| l.verdict == ConcomitantVerdict::DoesNotConvergeAS) {
        ConcomitantVerdict::DoesNotConvergeAS
    } else if !levels.is_empty() && levels.iter().all(|l| l.verdict == ConcomitantVerdict::ConvergesAS) {
        ConcomitantVerdict::ConvergesAS
    } else {
        ConcomitantVerdict::Indeterminate
    };
    Ok(Theorem31Report { levels, overall })
}

/// Largest `u` with `∫_0^u Σ_{n>N} n t^{n-1} dt = u^{N+1} / (1 - u)` below `tol`.
pub fn matched_truncation(n: u64, tol: f64) -> f64 {
    let excess = |u: f64| (n + 1) as f64 * u.ln() - (-u).ln_1p() - tol.ln();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if excess(0.5) >= 0.0 {
        hi = 0.5;
    } else {
        lo = 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;

    fn families() -> Vec<Copula> {
        vec![Copula::Independence, Copula::fgm(1.0).unwrap(), Copula::fgm(-0.6).unwrap(), Copula::Comonotone]
    }

    #[test]
    fn boundary_identities() {
        for c in families() {
            for i in 0..=49 {
                let t = i as f64 / 49.0;
                assert!(c.cdf(t, 0.0).abs() < 1e-10);
                assert!((c.cdf(t, 1.0) - t).abs() < 1e-10);
                assert!(c.cdf(0.0, t).abs() < 1e-10);
                assert!((c.cdf(1.0, t) - t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gap_and_complement_match_definitions() {
        for c in families() {
            for &(u, v) in &[(0.1, 0.3), (0.5, 0.5), (0.9, 0.2), (0.999, 0.7)] {
                assert!((c.gap(u, 1.0 - u, v) - (v - c.cdf(u, v))).abs() < 1e-14);
                assert!((c.complement_d1(u, v) - (1.0 - c.d1(u, v))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conditional_quantile_inverts() {
        for c in [Copula::Independence, Copula::fgm(1.0).unwrap(), Copula::fgm(-1.0).unwrap()] {
            for &u in &[0.01, 0.3, 0.5, 0.97] {
                for &w in &[0.001, 0.2, 0.5, 0.999] {
                    let v = c.cond_quantile(w, u).unwrap();
                    assert!((c.d1(u, v) - w).abs() < 1e-12);
                }
            }
        }
        assert_eq!(Copula::Comonotone.cond_quantile(0.3, 0.8).unwrap(), 0.8);
        assert!(Copula::fgm(1.5).is_err());
    }

    #[test]
    fn fgm_joint_frequency() {
        let c = Copula::fgm(1.0).unwrap();
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let (u, v) = sample_uv(&c, &mut rng).unwrap();
                u <= 0.5 && v <= 0.5
            })
            .count() as f64;
        let p = 0.3125;
        assert!((hits / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn concomitant_probability_examples() {
        let ind = BivariateModel::uniform(Copula::Independence).unwrap();
        for n in [1u64, 5, 50] {
            assert!((prob_concomitant_leq(&ind, n, 0.3).unwrap() - 0.3).abs() < 1e-8);
        }
        let fgm = BivariateModel::uniform(Copula::fgm(1.0).unwrap()).unwrap();
        assert!((prob_concomitant_leq(&fgm, 2, 0.5).unwrap() - 5.0 / 12.0).abs() < 1e-10);
        let com = BivariateModel::uniform(Copula::Comonotone).unwrap();
        assert!((prob_concomitant_leq(&com, 4, 0.6).unwrap() - 0.6f64.powi(4)).abs() < 1e-10);
        for c in families() {
            let m = BivariateModel::new(c, Univariate::exponential(1.0).unwrap(), Univariate::pareto(2.0).unwrap())
                .unwrap();
            assert!((prob_concomitant_leq(&m, 1, 1.7).unwrap() - m.marginal_y.cdf(1.7)).abs() < 1e-10);
        }
    }

    #[test]
    fn criterion_term_examples() {
        let ind = BivariateModel::uniform(Copula::Independence).unwrap();
        for n in [1u64, 2, 10, 1000] {
            let t = criterion_term(&ind, n, 0.5).unwrap();
            assert!((t - 0.25 / (n + 1) as f64).abs() < 1e-12, "n={n}: {t}");
        }
        let com = BivariateModel::uniform(Copula::Comonotone).unwrap();
        for n in [1u64, 3, 100] {
            assert_eq!(criterion_term(&com, n, 0.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn criterion_term_matches_simulation() {
        let n = 3usize;
        let reps = 100_000u64;
        for c in families() {
            let model = BivariateModel::uniform(c).unwrap();
            let exact = criterion_term(&model, n as u64, 0.5).unwrap();
            let mut rng = rng_from_seed(derive_seed(5, 0));
            let hits = (0..reps)
                .filter(|_| {
                    let lv = concomitant_levels_with(&c, n + 1, &mut rng).unwrap();
                    lv[n - 1] > 0.5 && lv[n] <= 0.5
                })
                .count() as f64;
            let p = hits / reps as f64;
            let sd = (exact * (1.0 - exact) / reps as f64).sqrt().max(1e-12);
            assert!((p - exact).abs() <= 4.0 * sd, "{c}: mc {p} exact {exact}");
        }
    }

    #[test]
    fn criterion_integral_examples() {
        let ind = BivariateModel::uniform(Copula::Independence).unwrap();
        let part = criterion_integral_partial(&ind, 0.5, 1e-3).unwrap();
        assert!((part - 0.25 * 1e3f64.ln()).abs() < 1e-9);
        let fit = criterion_integral(&ind, 0.5).unwrap();
        assert_eq!(fit.class, SeriesClass::Divergent);
        assert!((fit.slope - 0.25).abs() < 1e-9);

        let com = BivariateModel::uniform(Copula::Comonotone).unwrap();
        let fit = criterion_integral(&com, 0.5).unwrap();
        assert!(fit.partial.iter().all(|&(_, i)| i == 0.0));
        assert!(fit.is_finite());

        let fgm = BivariateModel::uniform(Copula::fgm(1.0).unwrap()).unwrap();
        let fit = criterion_integral(&fgm, 0.5).unwrap();
        assert_eq!(fit.class, SeriesClass::Divergent);
        // Slope is β(y)(1 - ∂₁C(1-, v)).
        assert!((fit.slope - 0.25 * 0.75).abs() < 0.01, "{}", fit.slope);
        assert!(matches!(criterion_integral_partial(&fgm, 0.5, 0.7), Err(CopulaError::Epsilon(_))));
    }

    #[test]
    fn beta_limit_examples() {
        let ind = BivariateModel::uniform(Copula::Independence).unwrap();
        let b = beta_limit(&ind, 0.5).unwrap();
        assert!(b.converged && (b.estimate - 0.5).abs() < 1e-9);
        let com = BivariateModel::uniform(Copula::Comonotone).unwrap();
        assert_eq!(beta_limit(&com, 0.7).unwrap().estimate, 0.0);
        for (lambda, v) in [(1.0, 0.5), (-0.5, 0.3), (0.4, 0.9)] {
            let m = BivariateModel::uniform(Copula::fgm(lambda).unwrap()).unwrap();
            let b = beta_limit(&m, v).unwrap();
            assert!((b.estimate - v * (1.0 - lambda * (1.0 - v))).abs() < 1e-9);
        }
        assert!(matches!(beta_limit(&ind, 1.0), Err(CopulaError::AtRightExtremity { .. })));
    }

    #[test]
    fn theorem_verdicts() {
        let com = BivariateModel::uniform(Copula::Comonotone).unwrap();
        let r = theorem31_verdict(&com, &[0.5, 0.9, 0.99]).unwrap();
        assert_eq!(r.overall, ConcomitantVerdict::ConvergesAS);
        for c in [Copula::Independence, Copula::fgm(1.0).unwrap()] {
            let m = BivariateModel::uniform(c).unwrap();
            let r = theorem31_verdict(&m, &[0.5]).unwrap();
            assert_eq!(r.overall, ConcomitantVerdict::DoesNotConvergeAS);
        }
    }

    #[test]
    fn truncation_point() {
        for n in [10u64, 500, 2000] {
            let u = matched_truncation(n, 1e-8);
            let tail = u.powi(n as i32 + 1) / (1.0 - u);
            assert!(tail < 1e-8 && tail > 0.9e-8, "{n}: {u} {tail}");
        }
    }

    #[test]
    fn comonotone_stream_is_monotone() {
        let m = BivariateModel::uniform(Copula::Comonotone).unwrap();
        let s = concomitant_of_max_stream(&m, 200, 4).unwrap();
        for w in s.windows(2) {
            assert_eq!(w[1].x_max, w[1].y_concomitant);
            assert!(w[1].y_concomitant >= w[0].y_concomitant);
        }
    }
}
