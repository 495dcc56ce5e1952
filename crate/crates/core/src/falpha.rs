//! The F^alpha-scheme: independent `X_i ~ F^{alpha_i}` with `alpha_1 = 1`.
//!
//! `S_n = 1 + alpha_2 + ... + alpha_n` is the cumulative exponent, so the
//! running maximum satisfies `P(M_n <= x) = F^{S_n}(x)`. Exponents that
//! overflow (`n^{2n}`) are handled in log form throughout.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, Univariate};
use crate::markov::{IndicatorKernel, MarkovError};
use crate::rng::{open_uniform, rng_from_seed};
use crate::series::{self, log_add_exp, Budget, CompensatedSum, SeriesClass, SeriesError, TermSequence};

/// Probe indices used to check hypotheses that are limits in `n`.
pub const PROBE_GRID: [u64; 6] = [10, 100, 1_000, 10_000, 100_000, 1_000_000];

/// First index of the gamma-family thresholds; `ln ln n > 0` from here.
pub const EXAMPLE41_FIRST_INDEX: u64 = 3;

/// Below this index the gamma-family thresholds are held at `x_6`, where
/// `1 - ln ln n / n` turns nondecreasing.
pub const EXAMPLE41_MONOTONE_FROM: u64 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FalphaError {
    #[error("invalid parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("index {index} is below the minimum {min}")]
    Domain { index: u64, min: u64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate event: P(M_{index} <= x_{index}) = 1")]
    DegenerateEvent { index: u64 },
    #[error("thresholds decrease at n = {index}")]
    NonMonotoneThresholds { index: u64 },
    #[error("exponent table must start with alpha_1 = 1 and hold positive finite values")]
    BadTable,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Exponent sequence `alpha_n`, with `alpha_1 = 1` in every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentSequence {
    /// `alpha_n = value` for `n >= 2`.
    Constant { value: f64 },
    /// `alpha_n = gamma (1 + 1/n)` for `n >= 2`.
    Example41 { gamma: f64 },
    /// `alpha_n = n^exponent`.
    Power { exponent: f64 },
    /// `alpha_n = n^{2n}`.
    Superexp,
    /// `alpha_n = values[n - 1]`; the last value repeats.
    Table { values: Vec<f64> },
}

impl fmt::Display for ExponentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentSequence::Constant { value } => write!(f, "constant({value})"),
            ExponentSequence::Example41 { gamma } => write!(f, "example41({gamma})"),
            ExponentSequence::Power { exponent } => write!(f, "power({exponent})"),
            ExponentSequence::Superexp => f.write_str("superexp"),
            ExponentSequence::Table { values } => write!(f, "table[{}]", values.len()),
        }
    }
}

impl FromStr for ExponentSequence {
    type Err = String;

    /// Parses `constant(c)`, `example41(g)`, `power(c)` or `superexp`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "superexp" {
            return Ok(ExponentSequence::Superexp);
        }
        let (name, arg) = s
            .strip_suffix(')')
            .and_then(|r| r.split_once('('))
            .ok_or_else(|| format!("unknown exponent family `{s}`"))?;
        let v: f64 = arg.trim().parse().map_err(|_| format!("bad parameter in `{s}`"))?;
        match name.trim() {
            "constant" => Ok(ExponentSequence::Constant { value: v }),
            "example41" => Ok(ExponentSequence::Example41 { gamma: v }),
            "power" => Ok(ExponentSequence::Power { exponent: v }),
            other => Err(format!("unknown exponent family `{other}`")),
        }
    }
}

impl ExponentSequence {
    pub fn validate(&self) -> Result<(), FalphaError> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(FalphaError::Parameter { name, value: v })
            }
        };
        match self {
            ExponentSequence::Constant { value } => positive("alpha", *value),
            ExponentSequence::Example41 { gamma } => positive("gamma", *gamma),
            ExponentSequence::Power { exponent } if exponent.is_finite() => Ok(()),
            ExponentSequence::Power { exponent } => Err(FalphaError::Parameter { name: "exponent", value: *exponent }),
            ExponentSequence::Superexp => Ok(()),
            ExponentSequence::Table { values } => {
                if values.first() != Some(&1.0) || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    Err(FalphaError::BadTable)
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn alpha(&self, n: u64) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        let x = n as f64;
        match self {
            ExponentSequence::Constant { value } => *value,
            ExponentSequence::Example41 { gamma } => gamma * (1.0 + 1.0 / x),
            ExponentSequence::Power { exponent } => x.powf(*exponent),
            ExponentSequence::Superexp => self.log_alpha(n).exp(),
            ExponentSequence::Table { values } => values[(n as usize - 1).min(values.len() - 1)],
        }
    }

    pub fn log_alpha(&self, n: u64) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        let x = n as f64;
        match self {
            ExponentSequence::Example41 { gamma } => gamma.ln() + (1.0 / x).ln_1p(),
            ExponentSequence::Power { exponent } => exponent * x.ln(),
            ExponentSequence::Superexp => 2.0 * x * x.ln(),
            _ => self.alpha(n).ln(),
        }
    }
}

#[derive(Debug, Default)]
struct CumulativeCache {
    linear: Vec<f64>,
    log: Vec<f64>,
    acc: CompensatedSum,
}

/// Lazily extended `S_n`, kept in linear and log-sum-exp form.
#[derive(Debug, Clone)]
pub struct CumulativeExponent {
    exponents: ExponentSequence,
    cache: Arc<Mutex<CumulativeCache>>,
}

impl CumulativeExponent {
    pub fn new(exponents: ExponentSequence) -> Self {
        Self { exponents, cache: Arc::new(Mutex::new(CumulativeCache::default())) }
    }

    pub fn exponents(&self) -> &ExponentSequence {
        &self.exponents
    }

    /// `(S_n, log S_n)`; the linear value is `inf` once it overflows.
    pub fn at(&self, n: u64) -> (f64, f64) {
        let n = n.max(1);
        let mut c = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        while (c.linear.len() as u64) < n {
            let i = c.linear.len() as u64 + 1;
            let a = self.exponents.alpha(i);
            let saturated = c.linear.last().is_some_and(|v| v.is_infinite());
            let lin = if saturated || !a.is_finite() {
                f64::INFINITY
            } else {
                c.acc.add(a);
                let v = c.acc.value();
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            };
            let log = if lin.is_finite() && a <= 1e300 {
                lin.ln()
            } else {
                let prev = c.log.last().copied().unwrap_or(f64::NEG_INFINITY);
                log_add_exp(prev, self.exponents.log_alpha(i))
            };
            c.linear.push(lin);
            c.log.push(log);
        }
        (c.linear[n as usize - 1], c.log[n as usize - 1])
    }

    pub fn linear(&self, n: u64) -> f64 {
        self.at(n).0
    }

    pub fn log(&self, n: u64) -> f64 {
        self.at(n).1
    }
}

/// Threshold sequence `x_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Thresholds {
    Constant {
        value: f64,
    },
    /// `x_n = 1 - ln ln n / n`, held at `x_6` for `n < 6`.
    Example41,
    /// `x_n = values[n - 1]`; the last value repeats.
    Table {
        values: Vec<f64>,
    },
}

impl Thresholds {
    fn example41_gap(n: u64) -> f64 {
        let n = n.max(EXAMPLE41_MONOTONE_FROM) as f64;
        n.ln().ln() / n
    }

    pub fn at(&self, n: u64) -> f64 {
        match self {
            Thresholds::Constant { value } => *value,
            Thresholds::Example41 => 1.0 - Self::example41_gap(n),
            Thresholds::Table { values } => values[(n.max(1) as usize - 1).min(values.len() - 1)],
        }
    }
}

/// Base law, exponents and thresholds of one F^alpha experiment.
#[derive(Debug, Clone)]
pub struct MaximaScenario {
    base: Univariate,
    thresholds: Thresholds,
    cumulative: CumulativeExponent,
    first_index: u64,
}

impl MaximaScenario {
    pub fn new(base: Univariate, exponents: ExponentSequence, thresholds: Thresholds) -> Result<Self, FalphaError> {
        exponents.validate()?;
        match &thresholds {
            Thresholds::Table { values } => {
                if values.is_empty() {
                    return Err(FalphaError::BadTable);
                }
                if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
                    return Err(FalphaError::NonMonotoneThresholds { index: i as u64 + 2 });
                }
            }
            Thresholds::Constant { value } if !value.is_finite() => {
                return Err(FalphaError::Parameter { name: "threshold", value: *value });
            }
            _ => {}
        }
        let first_index = if thresholds == Thresholds::Example41 { EXAMPLE41_FIRST_INDEX } else { 1 };
        Ok(Self { base, thresholds, cumulative: CumulativeExponent::new(exponents), first_index })
    }

    pub fn base(&self) -> Univariate {
        self.base
    }

    pub fn exponents(&self) -> &ExponentSequence {
        self.cumulative.exponents()
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn first_index(&self) -> u64 {
        self.first_index
    }

    pub fn threshold(&self, n: u64) -> f64 {
        self.thresholds.at(n)
    }

    pub fn alpha(&self, n: u64) -> f64 {
        self.exponents().alpha(n)
    }

    pub fn log_alpha(&self, n: u64) -> f64 {
        self.exponents().log_alpha(n)
    }

    /// `ln F(x_n)`, exact for the uniform gamma-family thresholds.
    pub fn log_cdf_at(&self, n: u64) -> f64 {
        match (self.base, &self.thresholds) {
            (Univariate::Uniform, Thresholds::Example41) => (-Thresholds::example41_gap(n)).ln_1p(),
            _ => self.base.log_cdf(self.threshold(n)),
        }
    }

    /// `ln F^{s}(x_n)` for `ln s = log_s`.
    fn log_power(&self, log_s: f64, n: u64) -> f64 {
        let l = self.log_cdf_at(n);
        if l == 0.0 || l == f64::NEG_INFINITY {
            l
        } else {
            -(log_s + (-l).ln()).exp()
        }
    }

    /// `ln P(M_n <= x_n) = S_n ln F(x_n)`.
    pub fn log_prob_max_leq(&self, n: u64) -> f64 {
        self.log_power(self.cumulative.log(n), n)
    }

    /// `P(M_n <= x_n) = F^{S_n}(x_n)`.
    pub fn prob_max_leq(&self, n: u64) -> f64 {
        self.log_prob_max_leq(n).exp()
    }

    /// `1 - F^{alpha_n}(x_n)`.
    fn newcomer_exceeds(&self, n: u64) -> f64 {
        -self.log_power(self.log_alpha(n), n).exp_m1()
    }
}

/// `S_n` for a scenario.
pub fn cumulative(scenario: &MaximaScenario, n: u64) -> f64 {
    scenario.cumulative.linear(n)
}

/// `log S_n` for a scenario.
pub fn log_cumulative(scenario: &MaximaScenario, n: u64) -> f64 {
    scenario.cumulative.log(n)
}

/// Uniform base, `alpha_n` and `x_n` of the gamma family, where the maxima
/// criterion switches at `gamma = 1`.
pub fn example41_scenario(gamma: f64) -> Result<MaximaScenario, FalphaError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(FalphaError::Parameter { name: "gamma", value: gamma });
    }
    MaximaScenario::new(Univariate::Uniform, ExponentSequence::Example41 { gamma }, Thresholds::Example41)
}

/// Criterion series available for the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FalphaSeries {
    /// `sum F^{S_n}(x_n)`.
    BcClassic,
    /// `sum F^{S_n}(x_n) [1 - F^{alpha_{n+1}}(x_{n+1})]`.
    Prop41,
    /// `sum S_n / S_{n+1}`.
    Prop51,
    /// `sum alpha_n / S_n`.
    Prop52,
}

impl fmt::Display for FalphaSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FalphaSeries::BcClassic => "BC_CLASSIC",
            FalphaSeries::Prop41 => "PROP41",
            FalphaSeries::Prop51 => "PROP51",
            FalphaSeries::Prop52 => "PROP52",
        })
    }
}

impl FromStr for FalphaSeries {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace(['-', '.'], "_").as_str() {
            "BC_CLASSIC" | "CLASSIC" => Ok(FalphaSeries::BcClassic),
            "PROP41" | "PROP_4_1" | "4_1" => Ok(FalphaSeries::Prop41),
            "PROP51" | "PROP_5_1" | "5_1" => Ok(FalphaSeries::Prop51),
            "PROP52" | "PROP_5_2" | "5_2" => Ok(FalphaSeries::Prop52),
            _ => Err(format!("unknown series kind `{s}`")),
        }
    }
}

/// Term sequence without hypothesis checks or declared class.
pub fn series_terms_unchecked(scenario: &MaximaScenario, kind: FalphaSeries) -> TermSequence {
    let sc = Arc::new(scenario.clone());
    let first = scenario.first_index;
    match kind {
        FalphaSeries::BcClassic => TermSequence::from_log(first, move |n| sc.log_prob_max_leq(n)),
        FalphaSeries::Prop41 => {
            let lin = sc.clone();
            TermSequence::new(first, move |n| lin.prob_max_leq(n) * lin.newcomer_exceeds(n + 1))
                .with_log_term(move |n| sc.log_prob_max_leq(n) + sc.newcomer_exceeds(n + 1).ln())
        }
        FalphaSeries::Prop51 => TermSequence::from_log(first, move |n| sc.cumulative.log(n) - sc.cumulative.log(n + 1)),
        FalphaSeries::Prop52 => TermSequence::from_log(first, move |n| sc.log_alpha(n) - sc.cumulative.log(n)),
    }
}

/// Criterion series with the hypotheses of the corresponding statement
/// checked on [`PROBE_GRID`].
pub fn series_terms(scenario: &MaximaScenario, kind: FalphaSeries) -> Result<TermSequence, FalphaError> {
    let terms = series_terms_unchecked(scenario, kind);
    let probe = Budget::default();
    match kind {
        FalphaSeries::Prop51 => {
            let logs: Vec<f64> = PROBE_GRID.iter().map(|&n| scenario.log_alpha(n)).collect();
            let growing = logs.windows(2).all(|w| w[1] > w[0]) && logs[logs.len() - 1] > (1e3f64).ln();
            if !growing {
                return Err(FalphaError::Precondition("alpha_n -> infinity".into()));
            }
            if !series::terms_vanish(&terms, &probe)? {
                return Err(FalphaError::Precondition("S_n / S_{n+1} -> 0".into()));
            }
        }
        FalphaSeries::Prop52 => {
            if !series::terms_vanish(&terms, &probe)? {
                return Err(FalphaError::Precondition("alpha_n / S_n -> 0".into()));
            }
        }
        _ => {}
    }
    Ok(match declared_class(scenario, kind) {
        Some((class, note)) => terms.with_declared(class, note),
        None => terms,
    })
}

/// Class of a built-in series where it follows from a closed-form comparison.
pub fn declared_class(scenario: &MaximaScenario, kind: FalphaSeries) -> Option<(SeriesClass, &'static str)> {
    use SeriesClass::{Convergent, Divergent};
    let example41 = scenario.base == Univariate::Uniform && scenario.thresholds == Thresholds::Example41;
    match (scenario.exponents(), kind) {
        (ExponentSequence::Example41 { .. }, FalphaSeries::BcClassic) if example41 => {
            Some((Divergent, "F^{S_n}(x_n) ~ (ln n)^{-gamma}"))
        }
        (ExponentSequence::Example41 { gamma }, FalphaSeries::Prop41) if example41 => Some(if *gamma <= 1.0 {
            (Divergent, "term ~ gamma ln ln n / (n (ln n)^gamma), gamma <= 1")
        } else {
            (Convergent, "term ~ gamma ln ln n / (n (ln n)^gamma), gamma > 1")
        }),
        (ExponentSequence::Superexp, FalphaSeries::Prop51) => Some((Convergent, "S_n / S_{n+1} ~ e^{-2} n^{-2}")),
        (ExponentSequence::Power { exponent }, FalphaSeries::Prop52) => Some(if *exponent < -1.0 {
            (Convergent, "S_n bounded, alpha_n / S_n ~ C n^c with c < -1")
        } else {
            (Divergent, "alpha_n / S_n of order 1/n or 1/(n ln n)")
        }),
        (ExponentSequence::Constant { .. }, FalphaSeries::Prop52) => Some((Divergent, "alpha_n / S_n ~ 1/n")),
        _ => None,
    }
}

/// `(P(B_n), P(B_n B_{n+1}^c))` with `B_n = {M_n - X_n > 0}`, in closed form.
pub fn exact_event_probs(scenario: &MaximaScenario, n: u64) -> Result<(f64, f64), FalphaError> {
    if n < 2 {
        return Err(FalphaError::Domain { index: n, min: 2 });
    }
    let c = &scenario.cumulative;
    let (l0, l1, l2) = (c.log(n - 1), c.log(n), c.log(n + 1));
    let b = (l0 - l1).exp();
    let joint = (scenario.log_alpha(n + 1) - l2 + l0 - l1).exp();
    Ok((b, joint))
}

/// `(P(∪ B_n), P(∪ C_n))` over `n ∈ [start, end]`, `start >= 2`.
///
/// The indicators of `C_n = {M_n = X_n}` are independent with
/// `P(C_n) = alpha_n / S_n`, so both unions are products.
pub fn newcomer_window_probs(scenario: &MaximaScenario, start: u64, end: u64) -> Result<(f64, f64), FalphaError> {
    if start < 2 {
        return Err(FalphaError::Domain { index: start, min: 2 });
    }
    if end < start {
        return Err(FalphaError::Domain { index: end, min: start });
    }
    let c = &scenario.cumulative;
    let log_all_new: f64 = (start..=end).map(|n| scenario.log_alpha(n) - c.log(n)).sum();
    let log_none_new = c.log(start - 1) - c.log(end);
    Ok((-log_all_new.exp_m1(), -log_none_new.exp_m1()))
}

/// Exact order-1 kernel of the indicators of `{M_n <= x_n}`.
pub fn maxima_event_kernel(scenario: &MaximaScenario) -> Result<IndicatorKernel, FalphaError> {
    for n in std::iter::once(1).chain(PROBE_GRID) {
        if scenario.log_prob_max_leq(n) == 0.0 {
            return Err(FalphaError::DegenerateEvent { index: n });
        }
    }
    let p_sc = Arc::new(scenario.clone());
    let q_sc = p_sc.clone();
    let p1 = scenario.prob_max_leq(1);
    let kernel = IndicatorKernel::two_state(
        move |n| (p_sc.log_power(p_sc.log_alpha(n + 1), n + 1)).exp(),
        move |n| {
            let log_s = q_sc.cumulative.log(n);
            let l0 = q_sc.log_power(log_s, n);
            let l1 = q_sc.log_power(log_s, n + 1);
            let fresh = q_sc.log_power(q_sc.log_alpha(n + 1), n + 1).exp();
            let den = -l0.exp_m1();
            if den <= 0.0 {
                return f64::NAN;
            }
            (fresh * l0.exp() * (l1 - l0).exp_m1() / den).clamp(0.0, 1.0)
        },
        p1,
    )?;
    Ok(kernel)
}

/// One step of a simulated scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeStep {
    pub x: f64,
    pub max: f64,
    /// `M_n <= x_n`.
    pub a: bool,
    /// `M_n - X_n > 0`: the newcomer is not the maximum.
    pub b: bool,
    /// Complement of `b`.
    pub c: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrajectory {
    pub steps: Vec<SchemeStep>,
    /// Steps where the newcomer tied the previous maximum in floating point.
    pub ties: u64,
}

/// Value of `X` with `ln(-ln F(X)) = key`.
fn value_from_key(base: Univariate, key: f64) -> f64 {
    let p = (-key.exp()).exp();
    let (lo, hi) = base.extremities();
    if p <= 0.0 {
        lo
    } else if p >= 1.0 {
        hi
    } else {
        base.quantile(p).unwrap_or(hi)
    }
}

/// Simulates `X_1..X_T`, the running maximum and the event indicators.
///
/// Draws are kept as `key = ln(-ln F(X))`, decreasing in `X`, so that huge
/// exponents do not collapse every draw onto the right endpoint.
pub fn simulate_scheme(scenario: &MaximaScenario, horizon: usize, seed: u64) -> SchemeTrajectory {
    let mut rng = rng_from_seed(seed);
    simulate_scheme_with(scenario, horizon, &mut rng)
}

pub fn simulate_scheme_with<R: Rng + ?Sized>(
    scenario: &MaximaScenario,
    horizon: usize,
    rng: &mut R,
) -> SchemeTrajectory {
    let mut steps = Vec::with_capacity(horizon);
    let mut ties = 0;
    let mut best = f64::INFINITY;
    for i in 1..=horizon as u64 {
        let e = -open_uniform(rng).ln();
        let key = e.ln() - scenario.log_alpha(i);
        let b = i > 1 && best < key;
        if i > 1 && best == key {
            ties += 1;
        }
        best = best.min(key);
        let cut = (-scenario.log_cdf_at(i)).ln();
        steps.push(SchemeStep {
            x: value_from_key(scenario.base, key),
            max: value_from_key(scenario.base, best),
            a: best >= cut,
            b,
            c: !b,
        });
    }
    SchemeTrajectory { steps, ties }
}

/// Empirical check of the order-1 Markov property of `{M_n <= x_n}` at `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovDiagnostic {
    pub index: u64,
    /// `[(I_{n-1}, I_n)] -> (count, frequency of I_{n+1} = 1)`, histories 00, 01, 10, 11.
    pub by_history: [(u64, f64); 4],
    /// Kernel values `P(A_{n+1} | A_n^c)` and `P(A_{n+1} | A_n)`.
    pub kernel: (f64, f64),
}

pub fn markov_diagnostic(
    scenario: &MaximaScenario,
    index: u64,
    replications: u64,
    seed: u64,
) -> Result<MarkovDiagnostic, FalphaError> {
    if index < 2 {
        return Err(FalphaError::Domain { index, min: 2 });
    }
    let kernel = maxima_event_kernel(scenario)?;
    let mut counts = [(0u64, 0u64); 4];
    for r in 0..replications {
        let t = simulate_scheme(scenario, index as usize + 1, crate::rng::derive_seed(seed, r));
        let s = &t.steps;
        let h = ((s[index as usize - 2].a as usize) << 1) | s[index as usize - 1].a as usize;
        counts[h].0 += 1;
        counts[h].1 += s[index as usize].a as u64;
    }
    let by_history = counts.map(|(n, k)| (n, if n == 0 { f64::NAN } else { k as f64 / n as f64 }));
    Ok(MarkovDiagnostic { index, by_history, kernel: (kernel.transition(index, 0)?, kernel.transition(index, 1)?) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{criterion_term, CriterionKind};
    use crate::rng::derive_seed;

    fn iid_uniform(c: f64) -> MaximaScenario {
        MaximaScenario::new(
            Univariate::Uniform,
            ExponentSequence::Constant { value: 1.0 },
            Thresholds::Constant { value: c },
        )
        .unwrap()
    }

    fn harmonic(n: u64) -> f64 {
        (1..=n).map(|i| 1.0 / i as f64).sum()
    }

    #[test]
    fn cumulative_examples() {
        let s = iid_uniform(0.5);
        assert_eq!(cumulative(&s, 7), 7.0);
        let e = example41_scenario(1.0).unwrap();
        assert!((cumulative(&e, 10) - (9.0 + harmonic(10))).abs() < 1e-12);
        let sup =
            MaximaScenario::new(Univariate::Uniform, ExponentSequence::Superexp, Thresholds::Constant { value: 0.5 })
                .unwrap();
        assert!((log_cumulative(&sup, 4) - 66_282f64.ln()).abs() < 1e-12);
        assert!((log_cumulative(&sup, 4) - 11.1017).abs() < 1e-4);
        assert!(log_cumulative(&sup, 300).is_finite());
        assert!(cumulative(&sup, 300).is_infinite());
    }

    #[test]
    fn linear_and_log_forms_agree() {
        for fam in [ExponentSequence::Example41 { gamma: 2.0 }, ExponentSequence::Power { exponent: -2.0 }] {
            let c = CumulativeExponent::new(fam);
            for n in [1, 2, 10, 1000, 50_000] {
                let (lin, log) = c.at(n);
                assert!((lin.ln() - log).abs() <= 1e-10 * log.abs().max(1.0));
            }
        }
    }

    #[test]
    fn example41_cumulative_growth() {
        let e = example41_scenario(1.0).unwrap();
        let dev: Vec<f64> =
            [100u64, 10_000, 1_000_000].iter().map(|&n| cumulative(&e, n) - (n as f64 + (n as f64).ln())).collect();
        for d in &dev {
            assert!((d - dev[0]).abs() < 0.01, "{dev:?}");
        }
    }

    #[test]
    fn max_probabilities() {
        assert!((iid_uniform(0.5).prob_max_leq(3) - 0.125).abs() < 1e-15);
        let e = example41_scenario(2.0).unwrap();
        for n in [10u64, 1000] {
            let x = e.threshold(n);
            assert!((e.prob_max_leq(n) - x.powf(cumulative(&e, n))).abs() < 1e-9);
        }
        assert!(example41_scenario(0.0).is_err());
    }

    #[test]
    fn example41_thresholds_nondecreasing() {
        let e = example41_scenario(1.0).unwrap();
        let mut prev = 0.0;
        for n in 1..5000 {
            let x = e.threshold(n);
            assert!(x >= prev && x > 0.0 && x < 1.0);
            prev = x;
        }
    }

    #[test]
    fn exact_event_probabilities() {
        let s = iid_uniform(0.5);
        let (b3, _) = exact_event_probs(&s, 3).unwrap();
        assert!((b3 - 2.0 / 3.0).abs() < 1e-15);
        let (_, j2) = exact_event_probs(&s, 2).unwrap();
        assert!((j2 - 1.0 / 6.0).abs() < 1e-15);
        for n in [2u64, 10, 100] {
            assert!((exact_event_probs(&s, n).unwrap().0 - (n - 1) as f64 / n as f64).abs() < 1e-14);
        }
        assert!(matches!(exact_event_probs(&s, 1), Err(FalphaError::Domain { .. })));
    }

    #[test]
    fn prop51_terms() {
        let s = iid_uniform(0.5);
        let raw = series_terms_unchecked(&s, FalphaSeries::Prop51);
        assert!((raw.term_at(4) - 0.8).abs() < 1e-15);
        assert!(matches!(series_terms(&s, FalphaSeries::Prop51), Err(FalphaError::Precondition(_))));
        let sup =
            MaximaScenario::new(Univariate::Uniform, ExponentSequence::Superexp, Thresholds::Constant { value: 0.5 })
                .unwrap();
        let t = series_terms(&sup, FalphaSeries::Prop51).unwrap();
        let scaled = t.term_at(100) * 1e4;
        assert!(scaled > 0.133 && scaled < 0.136, "{scaled}");
    }

    #[test]
    fn prop52_terms() {
        let s = MaximaScenario::new(
            Univariate::Uniform,
            ExponentSequence::Power { exponent: -2.0 },
            Thresholds::Constant { value: 0.5 },
        )
        .unwrap();
        let t = series_terms(&s, FalphaSeries::Prop52).unwrap();
        let sum = series::partial_sum(&t, 100_000).unwrap();
        assert!(sum <= std::f64::consts::PI.powi(2) / 6.0);
        assert!(series_terms(&iid_uniform(0.5), FalphaSeries::Prop52).is_ok());
        let sup =
            MaximaScenario::new(Univariate::Uniform, ExponentSequence::Superexp, Thresholds::Constant { value: 0.5 })
                .unwrap();
        assert!(matches!(series_terms(&sup, FalphaSeries::Prop52), Err(FalphaError::Precondition(_))));
    }

    #[test]
    fn kernel_matches_series_terms() {
        let iid = iid_uniform(0.7);
        let k = maxima_event_kernel(&iid).unwrap();
        assert!((k.transition(4, 1).unwrap() - 0.7).abs() < 1e-15);
        for gamma in [0.5, 3.0] {
            let e = example41_scenario(gamma).unwrap();
            let k = maxima_event_kernel(&e).unwrap();
            let direct = series_terms_unchecked(&e, FalphaSeries::Prop41);
            for n in [3u64, 10, 1000, 100_000] {
                let via = criterion_term(&k, CriterionKind::JointThenComplement, n).unwrap();
                let d = direct.term_at(n);
                assert!((via - d).abs() <= 1e-10 * d, "n={n}: {via} vs {d}");
            }
        }
        let bad = MaximaScenario::new(
            Univariate::Uniform,
            ExponentSequence::Constant { value: 1.0 },
            Thresholds::Constant { value: 1.0 },
        )
        .unwrap();
        assert!(matches!(maxima_event_kernel(&bad), Err(FalphaError::DegenerateEvent { .. })));
    }

    #[test]
    fn kernel_marginals_match_closed_form() {
        let e = example41_scenario(1.0).unwrap();
        let k = maxima_event_kernel(&e).unwrap();
        for n in [1u64, 2, 7, 500] {
            let m = k.marginal(n).unwrap();
            assert!((m - e.prob_max_leq(n)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn simulated_max_probability() {
        let s = iid_uniform(0.5);
        let reps = 10_000u64;
        let hits = (0..reps).filter(|&r| simulate_scheme(&s, 5, derive_seed(7, r)).steps[4].a).count() as f64;
        let p = 0.5f64.powi(5);
        let sd = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits / reps as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn simulated_indicators_are_consistent() {
        let e = example41_scenario(2.0).unwrap();
        let t = simulate_scheme(&e, 500, 3);
        assert_eq!(t.ties, 0);
        assert!(!t.steps[0].b && t.steps[0].c);
        for w in t.steps.windows(2) {
            assert!(w[1].max >= w[0].max);
            assert_eq!(w[1].b, w[1].x < w[0].max || (w[1].x == w[0].max && w[1].b));
        }
    }

    #[test]
    fn series_kind_parsing() {
        for k in [FalphaSeries::BcClassic, FalphaSeries::Prop41, FalphaSeries::Prop51, FalphaSeries::Prop52] {
            assert_eq!(k.to_string().parse::<FalphaSeries>().unwrap(), k);
        }
        assert_eq!("power(-2)".parse::<ExponentSequence>().unwrap(), ExponentSequence::Power { exponent: -2.0 });
        assert_eq!("superexp".parse::<ExponentSequence>().unwrap(), ExponentSequence::Superexp);
        assert!("wobble(1)".parse::<ExponentSequence>().is_err());
    }
    #[test]
    fn newcomer_windows_match_simulation() {
        let s = MaximaScenario::new(
            Univariate::exponential(1.0).unwrap(),
            ExponentSequence::Power { exponent: 0.5 },
            Thresholds::Constant { value: 1.0 },
        )
        .unwrap();
        let (pb, pc) = newcomer_window_probs(&s, 3, 8).unwrap();
        let reps = 40_000u64;
        let (mut hb, mut hc) = (0u64, 0u64);
        for r in 0..reps {
            let t = simulate_scheme(&s, 8, derive_seed(21, r));
            hb += t.steps[2..8].iter().any(|x| x.b) as u64;
            hc += t.steps[2..8].iter().any(|x| x.c) as u64;
        }
        for (h, p) in [(hb, pb), (hc, pc)] {
            let sd = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((h as f64 / reps as f64 - p).abs() < 4.0 * sd, "{h} vs {p}");
        }
        assert!(newcomer_window_probs(&s, 1, 4).is_err());
    }
}
