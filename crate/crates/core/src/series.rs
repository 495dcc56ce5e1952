//! Nonnegative series given by term generators, and a numerical
//! convergent/divergent classifier.
//!
//! The classifier runs a small battery of tests on a geometric index
//! schedule and reports every vote it took:
//!
//! * `declared`: an analytically derived class attached to the sequence.
//!   It always wins; the heuristics are still run and reported.
//! * `zero-tail`: every trailing sample is exactly zero.
//! * `non-vanishing`: trailing terms stay above a floor and do not decay.
//! * `ratio`: consecutive-term ratios bounded away from one from below
//!   (convergent) or never below one (divergent).
//! * `log-scale fit`: a hierarchical least-squares fit of
//!   `t_n ~ C n^{-p} (log n)^{-q} (log log n)^{r}` over the top decade of
//!   the schedule. `p` is compared with 1; on the boundary `p` is pinned to
//!   1 and `q` is fitted; on the `q = 1` boundary `r` is fitted and compared
//!   with -1. Anything inside a `delta` band is reported as indeterminate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("invalid sequence: term at n = {index} is {value}")]
    InvalidTerm { index: u64, value: f64 },
    #[error("truncation index {upper} is below the first index {first}")]
    BelowFirstIndex { upper: u64, first: u64 },
}

/// Convergence class of a nonnegative series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesClass {
    Convergent,
    Divergent,
    Indeterminate,
}

impl fmt::Display for SeriesClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeriesClass::Convergent => "Convergent",
            SeriesClass::Divergent => "Divergent",
            SeriesClass::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

/// An analytically derived class, carried alongside the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredClass {
    pub class: SeriesClass,
    pub note: String,
}

type TermFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// A nonnegative series `sum_{n >= first_index} t_n`.
///
/// Terms may be given linearly, in log domain, or both. When both exist they
/// must agree to `1e-12 * max(1, t_n)`.
#[derive(Clone)]
pub struct TermSequence {
    first_index: u64,
    term: TermFn,
    log_term: Option<TermFn>,
    declared: Option<DeclaredClass>,
}

impl fmt::Debug for TermSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermSequence")
            .field("first_index", &self.first_index)
            .field("has_log_term", &self.log_term.is_some())
            .field("declared", &self.declared)
            .finish()
    }
}

impl TermSequence {
    pub fn new(first_index: u64, term: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self { first_index: first_index.max(1), term: Arc::new(term), log_term: None, declared: None }
    }

    /// Builds a sequence from its log-domain terms only.
    pub fn from_log(first_index: u64, log_term: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        let log_term: TermFn = Arc::new(log_term);
        let lt = Arc::clone(&log_term);
        Self {
            first_index: first_index.max(1),
            term: Arc::new(move |n| lt(n).exp()),
            log_term: Some(log_term),
            declared: None,
        }
    }

    pub fn with_log_term(mut self, log_term: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_term = Some(Arc::new(log_term));
        self
    }

    pub fn with_declared(mut self, class: SeriesClass, note: impl Into<String>) -> Self {
        self.declared = Some(DeclaredClass { class, note: note.into() });
        self
    }

    pub fn first_index(&self) -> u64 {
        self.first_index
    }

    pub fn declared(&self) -> Option<&DeclaredClass> {
        self.declared.as_ref()
    }

    pub fn has_log_term(&self) -> bool {
        self.log_term.is_some()
    }

    pub fn term_at(&self, n: u64) -> f64 {
        (self.term)(n)
    }

    /// Log of the n-th term; `-inf` for a zero term.
    pub fn log_term_at(&self, n: u64) -> f64 {
        match &self.log_term {
            Some(lt) => lt(n),
            None => (self.term)(n).ln(),
        }
    }

    /// The same series seen only through `exp(log_term)`.
    pub fn exp_of_log(&self) -> TermSequence {
        let src = self.clone();
        let src_log = self.clone();
        TermSequence {
            first_index: self.first_index,
            term: Arc::new(move |n| src.log_term_at(n).exp()),
            log_term: Some(Arc::new(move |n| src_log.log_term_at(n))),
            declared: self.declared.clone(),
        }
    }

    /// Linear term with the log-domain fallback used for summation.
    fn checked_term(&self, n: u64) -> Result<f64, SeriesError> {
        let mut t = (self.term)(n);
        if let Some(lt) = &self.log_term {
            if !t.is_finite() || t == 0.0 {
                let l = lt(n);
                if !l.is_nan() {
                    t = l.exp();
                }
            }
        }
        if t.is_nan() || t < 0.0 || t == f64::INFINITY {
            return Err(SeriesError::InvalidTerm { index: n, value: t });
        }
        Ok(t)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `sum_{n = first_index}^{upper} t_n`.
pub fn partial_sum(seq: &TermSequence, upper: u64) -> Result<f64, SeriesError> {
    if upper < seq.first_index {
        return Err(SeriesError::BelowFirstIndex { upper, first: seq.first_index });
    }
    let mut acc = CompensatedSum::default();
    for n in seq.first_index..=upper {
        acc.add(seq.checked_term(n)?);
    }
    Ok(acc.value())
}

/// Log of the partial sum, accumulated entirely in log domain.
pub fn log_partial_sum(seq: &TermSequence, upper: u64) -> Result<f64, SeriesError> {
    if upper < seq.first_index {
        return Err(SeriesError::BelowFirstIndex { upper, first: seq.first_index });
    }
    let mut acc = f64::NEG_INFINITY;
    for n in seq.first_index..=upper {
        let l = seq.log_term_at(n);
        if l.is_nan() || l == f64::INFINITY {
            return Err(SeriesError::InvalidTerm { index: n, value: l });
        }
        acc = log_add_exp(acc, l);
    }
    Ok(acc)
}

/// Partial sums recorded at each checkpoint (sorted, deduplicated), in one pass.
pub fn partial_sums_at(seq: &TermSequence, checkpoints: &[u64]) -> Result<Vec<(u64, f64)>, SeriesError> {
    let mut cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c >= seq.first_index).collect();
    cps.sort_unstable();
    cps.dedup();
    let mut out = Vec::with_capacity(cps.len());
    let mut acc = CompensatedSum::default();
    let mut n = seq.first_index;
    for cp in cps {
        while n <= cp {
            acc.add(seq.checked_term(n)?);
            n += 1;
        }
        out.push((cp, acc.value()));
    }
    Ok(out)
}

/// Evaluation budget and decision thresholds for [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Largest index sampled.
    pub max_index: u64,
    /// Geometric growth factor of the sample schedule.
    pub growth: f64,
    /// Largest index for the checkpoint partial sums (every term is evaluated).
    pub sum_limit: u64,
    /// Half-width of the indeterminate band around each exponent boundary.
    pub delta: f64,
    /// Floor for the non-vanishing test.
    pub vanish_floor: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_index: 1_000_000, growth: 1.25, sum_limit: 1_000_000, delta: 0.05, vanish_floor: 1e-8 }
    }
}

impl Budget {
    pub fn with_max_index(mut self, max_index: u64) -> Self {
        self.max_index = max_index;
        self
    }

    pub fn with_sum_limit(mut self, sum_limit: u64) -> Self {
        self.sum_limit = sum_limit;
        self
    }
}

/// Fitted exponents of `C n^{-p} (log n)^{-q} (log log n)^{r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

/// One vote of the test battery; `None` means the test abstained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVote {
    pub test: String,
    pub vote: Option<SeriesClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub verdict: SeriesClass,
    pub fitted_exponents: Option<Exponents>,
    pub partial_sums: Vec<(u64, f64)>,
    pub tests_applied: Vec<TestVote>,
    pub diagnostic: Option<String>,
}

const MIN_SAMPLES: usize = 12;
const TAIL_SAMPLES: usize = 10;
const MIN_FIT_SAMPLES: usize = 6;

/// `ceil(first * growth^j)` for `j = 0, 1, ...`, deduplicated, up to `max`.
pub fn geometric_schedule(first: u64, max: u64, growth: f64) -> Vec<u64> {
    let first = first.max(1);
    let mut out = Vec::new();
    let mut j = 0i32;
    loop {
        let x = (first as f64 * growth.powi(j)).ceil();
        j += 1;
        if x > max as f64 {
            break;
        }
        let n = x as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        if j > 10_000 {
            break;
        }
    }
    out
}

/// Least squares `y ~ X beta`; columns given separately.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let rows = y.len();
    let cols = columns.len();
    if rows < cols {
        return None;
    }
    // Scale columns to unit max-norm to tame conditioning.
    let scales: Vec<f64> =
        columns.iter().map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)).collect();
    let x = DMatrix::from_fn(rows, cols, |i, j| columns[j][i] / scales[j]);
    let b = DVector::from_column_slice(y);
    let beta = x.svd(true, true).solve(&b, 1e-13).ok()?;
    Some(beta.iter().zip(&scales).map(|(v, s)| v / s).collect())
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let ones = vec![1.0; xs.len()];
    least_squares(&[ones, xs.to_vec()], ys).map(|b| b[1])
}

struct Sample {
    n: u64,
    log_t: f64,
}

fn decide_band(value: f64, boundary: f64, delta: f64, above: SeriesClass, below: SeriesClass) -> Option<SeriesClass> {
    if value > boundary + delta {
        Some(above)
    } else if value < boundary - delta {
        Some(below)
    } else {
        None
    }
}

/// Hierarchical log-scale fit; returns exponents and the vote.
fn log_scale_fit(samples: &[Sample], delta: f64) -> Option<(Exponents, SeriesClass)> {
    let l: Vec<f64> = samples.iter().map(|s| (s.n as f64).ln()).collect();
    let ll: Vec<f64> = l.iter().map(|v| v.ln()).collect();
    let lll: Vec<f64> = ll.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.log_t).collect();
    let ones = vec![1.0; y.len()];
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();

    let b1 = least_squares(&[ones.clone(), neg(&l), neg(&ll)], &y)?;
    let p = b1[1];
    if let Some(v) = decide_band(p, 1.0, delta, SeriesClass::Convergent, SeriesClass::Divergent) {
        return Some((Exponents { p, q: b1[2], r: 0.0 }, v));
    }

    let y2: Vec<f64> = y.iter().zip(&l).map(|(a, b)| a + b).collect();
    let b2 = least_squares(&[ones.clone(), neg(&ll), lll.clone()], &y2)?;
    let q = b2[1];
    if let Some(v) = decide_band(q, 1.0, delta, SeriesClass::Convergent, SeriesClass::Divergent) {
        return Some((Exponents { p, q, r: b2[2] }, v));
    }

    let y3: Vec<f64> = y2.iter().zip(&ll).map(|(a, b)| a + b).collect();
    let b3 = least_squares(&[ones, lll], &y3)?;
    let r = b3[1];
    // sum 1/(n log n (log log n)^s) converges iff s > 1, i.e. r < -1.
    let v = decide_band(r, -1.0, delta, SeriesClass::Divergent, SeriesClass::Convergent)
        .unwrap_or(SeriesClass::Indeterminate);
    Some((Exponents { p, q, r }, v))
}

/// True when the sampled tail does not tend to zero: the trailing samples stay
/// above `budget.vanish_floor` and show no decay on the log-log scale.
fn tail_non_vanishing(tail: &[Sample], budget: &Budget) -> bool {
    if tail.len() < 2 || tail.iter().any(|s| !s.log_t.is_finite()) {
        return false;
    }
    let floor = budget.vanish_floor.ln();
    if tail.iter().any(|s| s.log_t <= floor) {
        return false;
    }
    let xs: Vec<f64> = tail.iter().map(|s| (s.n as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.log_t).collect();
    matches!(slope(&xs, &ys), Some(s) if s > -budget.delta)
}

fn sample(seq: &TermSequence, schedule: &[u64]) -> Result<Vec<Sample>, SeriesError> {
    schedule
        .iter()
        .map(|&n| {
            let log_t = seq.log_term_at(n);
            if log_t.is_nan() || log_t == f64::INFINITY {
                Err(SeriesError::InvalidTerm { index: n, value: log_t })
            } else {
                Ok(Sample { n, log_t })
            }
        })
        .collect()
}

/// Whether the terms tend to zero on the sampled tail.
///
/// Used to check hypotheses such as `P(A_n) -> 0`.
pub fn terms_vanish(seq: &TermSequence, budget: &Budget) -> Result<bool, SeriesError> {
    let schedule = geometric_schedule(seq.first_index, budget.max_index, budget.growth);
    let samples = sample(seq, &schedule)?;
    let tail = &samples[samples.len().saturating_sub(TAIL_SAMPLES)..];
    Ok(!tail_non_vanishing(tail, budget))
}

/// Classifies `seq` as convergent, divergent or indeterminate.
pub fn classify(seq: &TermSequence, budget: &Budget) -> Result<SeriesVerdict, SeriesError> {
    let schedule = geometric_schedule(seq.first_index, budget.max_index, budget.growth);
    let checkpoints: Vec<u64> = schedule.iter().copied().filter(|&n| n <= budget.sum_limit).collect();
    let partial_sums = partial_sums_at(seq, &checkpoints)?;

    let mut tests = Vec::new();
    if let Some(decl) = &seq.declared {
        tests.push(TestVote { test: format!("declared ({})", decl.note), vote: Some(decl.class) });
    }

    if schedule.len() < MIN_SAMPLES {
        let verdict = seq.declared.as_ref().map_or(SeriesClass::Indeterminate, |d| d.class);
        return Ok(SeriesVerdict {
            verdict,
            fitted_exponents: None,
            partial_sums,
            tests_applied: tests,
            diagnostic: Some(format!("budget too small: {} scheduled samples, need {MIN_SAMPLES}", schedule.len())),
        });
    }

    let samples = sample(seq, &schedule)?;
    let heuristic = run_battery(seq, &samples, budget, &mut tests);
    let (verdict, fitted, diagnostic) = match (&seq.declared, heuristic) {
        (Some(d), (_, fit, diag)) => (d.class, fit, diag),
        (None, (v, fit, diag)) => (v, fit, diag),
    };
    Ok(SeriesVerdict { verdict, fitted_exponents: fitted, partial_sums, tests_applied: tests, diagnostic })
}

fn run_battery(
    seq: &TermSequence,
    samples: &[Sample],
    budget: &Budget,
    tests: &mut Vec<TestVote>,
) -> (SeriesClass, Option<Exponents>, Option<String>) {
    let tail = &samples[samples.len() - TAIL_SAMPLES.min(samples.len())..];

    if tail.iter().all(|s| s.log_t == f64::NEG_INFINITY) {
        tests.push(TestVote { test: "zero-tail".into(), vote: Some(SeriesClass::Convergent) });
        return (SeriesClass::Convergent, None, Some("all trailing samples are zero".into()));
    }

    let positive: Vec<&Sample> = samples.iter().filter(|s| s.log_t.is_finite()).collect();
    let pos_tail: Vec<Sample> = positive[positive.len().saturating_sub(TAIL_SAMPLES)..]
        .iter()
        .map(|s| Sample { n: s.n, log_t: s.log_t })
        .collect();

    let non_vanishing = tail.len() == pos_tail.len() && tail_non_vanishing(tail, budget);
    tests.push(TestVote { test: "non-vanishing".into(), vote: non_vanishing.then_some(SeriesClass::Divergent) });
    if non_vanishing {
        return (SeriesClass::Divergent, None, Some("terms do not tend to zero".into()));
    }

    // Ratio test on the trailing positive samples.
    let ratios: Vec<f64> = pos_tail.iter().map(|s| (seq.log_term_at(s.n + 1) - s.log_t).exp()).collect();
    let ratio_vote = if ratios.iter().any(|r| r.is_nan()) {
        None
    } else if ratios.iter().all(|&r| r < 1.0 - budget.delta) {
        Some(SeriesClass::Convergent)
    } else if ratios.iter().all(|&r| r >= 1.0) {
        Some(SeriesClass::Divergent)
    } else {
        None
    };
    tests.push(TestVote { test: "ratio".into(), vote: ratio_vote });
    if let Some(v) = ratio_vote {
        return (v, None, None);
    }

    // Top decade of the positive samples.
    let last_n = positive.last().map_or(0, |s| s.n);
    let window: Vec<Sample> = positive
        .iter()
        .filter(|s| s.n >= 3 && (s.n as f64) * 10.0 >= last_n as f64)
        .map(|s| Sample { n: s.n, log_t: s.log_t })
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        tests.push(TestVote { test: "log-scale fit".into(), vote: None });
        return (SeriesClass::Indeterminate, None, Some(format!("only {} samples in the fit window", window.len())));
    }
    match log_scale_fit(&window, budget.delta) {
        Some((exps, v)) => {
            tests.push(TestVote { test: "log-scale fit".into(), vote: (v != SeriesClass::Indeterminate).then_some(v) });
            let diag = (v == SeriesClass::Indeterminate).then(|| {
                format!("fitted exponents p={:.4}, q={:.4}, r={:.4} fall in the boundary band", exps.p, exps.q, exps.r)
            });
            (v, Some(exps), diag)
        }
        None => {
            tests.push(TestVote { test: "log-scale fit".into(), vote: None });
            (SeriesClass::Indeterminate, None, Some("regression failed".into()))
        }
    }
}

/// Named reference series with analytically known classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesFamily {
    /// `n^{-p}`.
    PSeries { p: f64 },
    /// `ratio^n`.
    Geometric { ratio: f64 },
    /// `1 / (n (ln n)^q)` from `n = 2`.
    LogPower { q: f64 },
    /// `n / (n + 1)`.
    NOverNPlusOne,
}

impl fmt::Display for SeriesFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesFamily::PSeries { p } => write!(f, "p({p})"),
            SeriesFamily::Geometric { ratio } => write!(f, "geometric({ratio})"),
            SeriesFamily::LogPower { q } => write!(f, "logpower({q})"),
            SeriesFamily::NOverNPlusOne => f.write_str("n_over_n_plus_1"),
        }
    }
}

impl std::str::FromStr for SeriesFamily {
    type Err = String;

    /// Parses the forms produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "n_over_n_plus_1" {
            return Ok(SeriesFamily::NOverNPlusOne);
        }
        let (name, arg) = s
            .strip_suffix(')')
            .and_then(|r| r.split_once('('))
            .ok_or_else(|| format!("unknown series family `{s}`"))?;
        let v: f64 = arg.trim().parse().map_err(|_| format!("bad parameter in `{s}`"))?;
        let fam = match name.trim() {
            "p" => SeriesFamily::PSeries { p: v },
            "geometric" => SeriesFamily::Geometric { ratio: v },
            "logpower" => SeriesFamily::LogPower { q: v },
            other => return Err(format!("unknown series family `{other}`")),
        };
        fam.validate()?;
        Ok(fam)
    }
}

impl SeriesFamily {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            SeriesFamily::PSeries { p } => p.is_finite(),
            SeriesFamily::Geometric { ratio } => ratio.is_finite() && ratio > 0.0,
            SeriesFamily::LogPower { q } => q.is_finite(),
            SeriesFamily::NOverNPlusOne => true,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid parameter for {self}"))
        }
    }

    pub fn exact_class(&self) -> SeriesClass {
        let conv = match *self {
            SeriesFamily::PSeries { p } => p > 1.0,
            SeriesFamily::Geometric { ratio } => ratio < 1.0,
            SeriesFamily::LogPower { q } => q > 1.0,
            SeriesFamily::NOverNPlusOne => false,
        };
        if conv {
            SeriesClass::Convergent
        } else {
            SeriesClass::Divergent
        }
    }

    /// Terms without a declared class.
    pub fn terms(&self) -> TermSequence {
        match *self {
            SeriesFamily::PSeries { p } => TermSequence::from_log(1, move |n| -p * (n as f64).ln()),
            SeriesFamily::Geometric { ratio } => TermSequence::from_log(1, move |n| n as f64 * ratio.ln()),
            SeriesFamily::LogPower { q } => TermSequence::from_log(2, move |n| {
                let x = n as f64;
                -x.ln() - q * x.ln().ln()
            }),
            SeriesFamily::NOverNPlusOne => {
                TermSequence::new(1, |n| n as f64 / (n + 1) as f64).with_log_term(|n| -(1.0 / n as f64).ln_1p())
            }
        }
    }

    /// Terms carrying the analytic class.
    pub fn declared_terms(&self) -> TermSequence {
        self.terms().with_declared(self.exact_class(), format!("{self}: closed-form comparison"))
    }
}

/// The eight reference families the classifier is calibrated on.
pub fn calibration_suite() -> Vec<SeriesFamily> {
    vec![
        SeriesFamily::PSeries { p: 0.5 },
        SeriesFamily::PSeries { p: 1.0 },
        SeriesFamily::PSeries { p: 1.5 },
        SeriesFamily::PSeries { p: 2.0 },
        SeriesFamily::Geometric { ratio: 0.9 },
        SeriesFamily::LogPower { q: 2.0 },
        SeriesFamily::LogPower { q: 1.0 },
        SeriesFamily::NOverNPlusOne,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_series(p: f64) -> TermSequence {
        TermSequence::new(1, move |n| (n as f64).powf(-p))
    }

    #[test]
    fn geometric_partial_sum() {
        let seq = TermSequence::new(1, |n| 0.5f64.powi(n as i32));
        assert!((partial_sum(&seq, 3).unwrap() - 0.875).abs() < 1e-15);
    }

    #[test]
    fn zeta_two_partial_sum() {
        let s = partial_sum(&p_series(2.0), 1000).unwrap();
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((s - zeta2).abs() <= 1e-3);
        assert!((1.6439..=1.6450).contains(&s));
    }

    #[test]
    fn negative_term_is_invalid() {
        let seq = TermSequence::new(1, |n| if n == 4 { -1.0 } else { 1.0 });
        assert_eq!(partial_sum(&seq, 10), Err(SeriesError::InvalidTerm { index: 4, value: -1.0 }));
        assert!(matches!(partial_sum(&seq, 0), Err(SeriesError::BelowFirstIndex { .. })));
    }

    #[test]
    fn log_domain_rescues_overflowing_terms() {
        // exp(800 - n) overflows for small n but the log form is exact.
        let seq = TermSequence::new(1, |n| (800.0 - n as f64).exp()).with_log_term(|n| 800.0 - n as f64);
        let l = log_partial_sum(&seq, 2000).unwrap();
        let exact = 799.0 - (1.0 - (-1f64).exp()).ln();
        assert!((l - exact).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_geometric_and_deduplicated() {
        let s = geometric_schedule(1, 100, 1.25);
        assert_eq!(&s[..6], &[1, 2, 3, 4, 5, 6]);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(*s.last().unwrap() <= 100);
    }

    #[test]
    fn p_series_verdicts() {
        let budget = Budget::default().with_sum_limit(10_000);
        for (p, want) in [
            (0.5, SeriesClass::Divergent),
            (1.0, SeriesClass::Divergent),
            (1.5, SeriesClass::Convergent),
            (2.0, SeriesClass::Convergent),
        ] {
            let v = classify(&p_series(p), &budget).unwrap();
            assert_eq!(v.verdict, want, "p = {p}: {v:?}");
        }
    }

    #[test]
    fn boundary_band_is_indeterminate() {
        let budget = Budget::default().with_sum_limit(100);
        // p = 1.02 with no log factors: p-band, then q-band near zero -> q < 1 -> Divergent
        // is the best the heuristic can do; a pure log factor on the q boundary
        // with r inside its band must be indeterminate.
        let seq = TermSequence::new(3, |n| {
            let l = (n as f64).ln();
            1.0 / (n as f64 * l * l.ln().powf(1.0))
        });
        let v = classify(&seq, &budget).unwrap();
        assert_eq!(v.verdict, SeriesClass::Indeterminate, "{v:?}");
    }

    #[test]
    fn declared_class_overrides() {
        let seq = p_series(2.0).with_declared(SeriesClass::Divergent, "test override");
        let v = classify(&seq, &Budget::default().with_sum_limit(10)).unwrap();
        assert_eq!(v.verdict, SeriesClass::Divergent);
        assert!(v.tests_applied[0].test.starts_with("declared"));
        assert_eq!(
            v.tests_applied.iter().find(|t| t.test == "log-scale fit").unwrap().vote,
            Some(SeriesClass::Convergent)
        );
    }

    #[test]
    fn tiny_budget_is_indeterminate() {
        let v = classify(&p_series(2.0), &Budget::default().with_max_index(5)).unwrap();
        assert_eq!(v.verdict, SeriesClass::Indeterminate);
        assert!(v.diagnostic.unwrap().contains("budget too small"));
    }

    #[test]
    fn non_vanishing_terms_diverge() {
        let seq = TermSequence::new(1, |n| n as f64 / (n as f64 + 1.0));
        let v = classify(&seq, &Budget::default().with_sum_limit(100)).unwrap();
        assert_eq!(v.verdict, SeriesClass::Divergent);
        assert!(!terms_vanish(&seq, &Budget::default()).unwrap());
        assert!(terms_vanish(&p_series(0.2), &Budget::default()).unwrap());
    }

    #[test]
    fn zero_tail_converges() {
        let seq = TermSequence::new(1, |n| if n < 50 { 1.0 } else { 0.0 });
        let v = classify(&seq, &Budget::default().with_sum_limit(100)).unwrap();
        assert_eq!(v.verdict, SeriesClass::Convergent);
    }

    #[test]
    fn exp_of_log_view_matches() {
        let seq = TermSequence::new(2, |n| 1.0 / (n as f64 * (n as f64).ln().powi(2)));
        let view = seq.exp_of_log();
        for n in [2u64, 10, 1000] {
            assert!((seq.term_at(n) - view.term_at(n)).abs() <= 1e-12 * seq.term_at(n).max(1.0));
        }
    }

    #[test]
    fn log_add_exp_basics() {
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
    #[test]
    fn calibration_suite_heuristic() {
        let budget = Budget::default();
        for fam in calibration_suite() {
            let v = classify(&fam.terms(), &budget).unwrap();
            if fam == (SeriesFamily::LogPower { q: 1.0 }) {
                assert_ne!(v.verdict, SeriesClass::Convergent, "{fam}");
            } else {
                assert_eq!(v.verdict, fam.exact_class(), "{fam}: {v:?}");
            }
            assert_eq!(classify(&fam.declared_terms(), &budget).unwrap().verdict, fam.exact_class());
        }
    }

    #[test]
    fn family_parsing() {
        for fam in calibration_suite() {
            assert_eq!(fam.to_string().parse::<SeriesFamily>().unwrap(), fam);
        }
        assert!("geometric(-1)".parse::<SeriesFamily>().is_err());
    }
}
