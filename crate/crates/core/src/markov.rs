//! Markov sequences of events: indicator chains of order `k`.
//!
//! A history is the last `k` indicators packed into an integer, oldest bit
//! most significant, so the newest indicator is bit 0. The kernel gives
//! `P(A_{n+1} = 1 | history at n)` for every `n >= k`, and `initial` is the
//! law of `(I_{A_1}, ..., I_{A_k})` in the same encoding.
//!
//! Forward state distributions are computed once per kernel and cached; the
//! cache is shared by clones of the kernel and never changes a result.

use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{open_uniform, rng_from_seed};
use crate::series::{self, Budget, SeriesClass, SeriesError, SeriesVerdict, TermSequence};

/// Conditioning events below this probability make a conditional term undefined.
pub const CONDITIONING_FLOOR: f64 = 1e-300;

/// Widest window (`T - n`) the path-enumeration oracle accepts.
pub const BRUTE_FORCE_MAX_WIDTH: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("order must be between 1 and 16, got {0}")]
    InvalidOrder(usize),
    #[error(
        "initial distribution must have {expected} nonnegative entries summing to 1 (got {len} entries, sum {sum})"
    )]
    InitialDistribution { expected: usize, len: usize, sum: f64 },
    #[error("kernel value {value} at n = {index}, history {history:#b} is outside [0, 1]")]
    KernelOutOfRange { index: u64, history: usize, value: f64 },
    #[error("index {index} is below the chain order {order}")]
    BelowOrder { index: u64, order: usize },
    #[error("index {index} precedes the safe start index {safe_start}")]
    BeforeSafeStart { index: u64, safe_start: u64 },
    #[error("empty window [{start}, {end}]")]
    EmptyWindow { start: u64, end: u64 },
    #[error("degenerate window: P(A_{index}) = 1")]
    DegenerateWindow { index: u64 },
    #[error("term at n = {index} conditions on an event of probability {probability:e}")]
    UndefinedTerm { index: u64, probability: f64 },
    #[error("window width {width} exceeds the enumeration budget {BRUTE_FORCE_MAX_WIDTH}")]
    WindowTooWide { width: u64 },
    #[error("criterion {kind} needs an order-1 chain, kernel has order {order}")]
    IncompatibleKind { kind: CriterionKind, order: usize },
    #[error("trajectory of length {len} is shorter than the chain order {order}")]
    LengthMismatch { len: usize, order: usize },
    #[error("trajectory has probability zero under the initial law")]
    ImpossibleTrajectory,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

type Transition = Arc<dyn Fn(u64, usize) -> f64 + Send + Sync>;

/// Time-inhomogeneous order-`k` transition law of an indicator chain.
#[derive(Clone)]
pub struct IndicatorKernel {
    order: usize,
    transition: Transition,
    initial: Vec<f64>,
    safe_start: u64,
    cache: Arc<Mutex<Vec<f64>>>,
}

impl fmt::Debug for IndicatorKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorKernel")
            .field("order", &self.order)
            .field("initial", &self.initial)
            .field("safe_start", &self.safe_start)
            .finish()
    }
}

impl IndicatorKernel {
    pub fn new(
        order: usize,
        initial: Vec<f64>,
        transition: impl Fn(u64, usize) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, MarkovError> {
        if order == 0 || order > 16 {
            return Err(MarkovError::InvalidOrder(order));
        }
        let expected = 1usize << order;
        let sum: f64 = initial.iter().sum();
        if initial.len() != expected || initial.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-12 {
            return Err(MarkovError::InitialDistribution { expected, len: initial.len(), sum });
        }
        Ok(Self {
            order,
            transition: Arc::new(transition),
            initial,
            safe_start: 1,
            cache: Arc::new(Mutex::new(Vec::new())),
        })
    }

    /// Order-1 chain with `p_n = P(A_{n+1} | A_n)`, `q_n = P(A_{n+1} | A_n^c)`
    /// and `P(A_1) = p1`.
    pub fn two_state(
        p: impl Fn(u64) -> f64 + Send + Sync + 'static,
        q: impl Fn(u64) -> f64 + Send + Sync + 'static,
        p1: f64,
    ) -> Result<Self, MarkovError> {
        Self::new(1, vec![1.0 - p1, p1], move |n, h| if h & 1 == 1 { p(n) } else { q(n) })
    }

    /// Kernel read from a table: `rows[m - order][history]` is the kernel at
    /// index `m`; the last row repeats beyond the table.
    pub fn from_table(order: usize, initial: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let width = 1usize << order.min(16);
        if rows.is_empty() || rows.iter().any(|r| r.len() != width) {
            return Err(MarkovError::InitialDistribution {
                expected: width,
                len: rows.first().map_or(0, Vec::len),
                sum: f64::NAN,
            });
        }
        let k = order as u64;
        Self::new(order, initial, move |m, h| {
            let idx = (m.saturating_sub(k) as usize).min(rows.len() - 1);
            rows[idx][h]
        })
    }

    /// Sets the index from which `P(A_n) != 1` is guaranteed.
    pub fn with_safe_start(mut self, safe_start: u64) -> Self {
        self.safe_start = safe_start.max(1);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn safe_start(&self) -> u64 {
        self.safe_start
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    fn histories(&self) -> usize {
        1 << self.order
    }

    fn mask(&self) -> usize {
        self.histories() - 1
    }

    /// Kernel value, validated.
    pub fn transition(&self, n: u64, history: usize) -> Result<f64, MarkovError> {
        let v = (self.transition)(n, history);
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(MarkovError::KernelOutOfRange { index: n, history, value: v })
        }
    }

    /// Locks the forward cache after extending it through index `n`.
    fn states_through(&self, n: u64) -> Result<MutexGuard<'_, Vec<f64>>, MarkovError> {
        let k = self.order as u64;
        if n < k {
            return Err(MarkovError::BelowOrder { index: n, order: self.order });
        }
        let width = self.histories();
        let mask = self.mask();
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if cache.is_empty() {
            cache.extend_from_slice(&self.initial);
        }
        let mut have = k + (cache.len() / width) as u64 - 1;
        let mut next = vec![0.0; width];
        while have < n {
            let base = (have - k) as usize * width;
            next.iter_mut().for_each(|x| *x = 0.0);
            for h in 0..width {
                let w = cache[base + h];
                if w == 0.0 {
                    continue;
                }
                let p = self.transition(have, h)?;
                let shifted = (h << 1) & mask;
                next[shifted | 1] += w * p;
                next[shifted] += w * (1.0 - p);
            }
            cache.extend_from_slice(&next);
            have += 1;
        }
        Ok(cache)
    }

    fn state_slice(cache: &[f64], k: u64, width: usize, n: u64) -> &[f64] {
        let base = (n - k) as usize * width;
        &cache[base..base + width]
    }

    /// `P(A_n)` for any `n >= 1`.
    pub fn marginal(&self, n: u64) -> Result<f64, MarkovError> {
        let k = self.order as u64;
        if n == 0 {
            return Err(MarkovError::BelowOrder { index: 0, order: self.order });
        }
        if n < k {
            let bit = (k - n) as usize;
            return Ok(self.initial.iter().enumerate().filter(|(h, _)| (h >> bit) & 1 == 1).map(|(_, p)| p).sum());
        }
        Ok(forward_marginals(self, n)?.marginal)
    }
}

/// State distribution over the `2^k` histories ending at `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMarginals {
    pub index: u64,
    pub state_probs: Vec<f64>,
    pub marginal: f64,
}

/// Exact forward recursion up to index `n >= k`.
pub fn forward_marginals(kernel: &IndicatorKernel, n: u64) -> Result<ChainMarginals, MarkovError> {
    let cache = kernel.states_through(n)?;
    let states = IndicatorKernel::state_slice(&cache, kernel.order as u64, kernel.histories(), n).to_vec();
    let marginal = states.iter().skip(1).step_by(2).sum();
    Ok(ChainMarginals { index: n, state_probs: states, marginal })
}

fn check_window(kernel: &IndicatorKernel, start: u64, end: u64) -> Result<(), MarkovError> {
    if start < kernel.order as u64 {
        return Err(MarkovError::BelowOrder { index: start, order: kernel.order });
    }
    if start < kernel.safe_start {
        return Err(MarkovError::BeforeSafeStart { index: start, safe_start: kernel.safe_start });
    }
    if end < start {
        return Err(MarkovError::EmptyWindow { start, end });
    }
    Ok(())
}

/// `log P(A_start^c ... A_end^c)` by the chain rule through all-zero histories.
pub fn log_prob_no_occurrence(kernel: &IndicatorKernel, start: u64, end: u64) -> Result<f64, MarkovError> {
    check_window(kernel, start, end)?;
    let k = kernel.order as u64;
    let width = kernel.histories();
    let cache = kernel.states_through(end)?;
    for i in start..=end {
        let s = IndicatorKernel::state_slice(&cache, k, width, i);
        let miss: f64 = s.iter().step_by(2).sum();
        if miss <= 0.0 {
            return Err(MarkovError::DegenerateWindow { index: i });
        }
    }
    let len = end - start + 1;
    if len <= k {
        let low = (1usize << len) - 1;
        let s = IndicatorKernel::state_slice(&cache, k, width, end);
        let p: f64 = s.iter().enumerate().filter(|(h, _)| h & low == 0).map(|(_, p)| p).sum();
        return Ok(p.ln());
    }
    let first_full = start + k - 1;
    let mut log_p = IndicatorKernel::state_slice(&cache, k, width, first_full)[0].ln();
    drop(cache);
    for i in first_full..end {
        log_p += (-kernel.transition(i, 0)?).ln_1p();
    }
    Ok(log_p)
}

/// `P(A_start ∪ ... ∪ A_end)`, from the product of conditional complements.
pub fn tail_union_window(kernel: &IndicatorKernel, start: u64, end: u64) -> Result<f64, MarkovError> {
    let log_none = log_prob_no_occurrence(kernel, start, end)?;
    Ok(-log_none.exp_m1())
}

/// Union probability over `[start, end]` by enumerating every trajectory.
pub fn brute_force_window(kernel: &IndicatorKernel, start: u64, end: u64) -> Result<f64, MarkovError> {
    if start == 0 {
        return Err(MarkovError::BelowOrder { index: 0, order: kernel.order });
    }
    if end < start {
        return Err(MarkovError::EmptyWindow { start, end });
    }
    if end - start > BRUTE_FORCE_MAX_WIDTH {
        return Err(MarkovError::WindowTooWide { width: end - start });
    }
    let k = kernel.order as u64;
    let mask = kernel.mask();

    // Paths from index `from + 1` through `end`, given the history at `from`.
    fn walk(
        kernel: &IndicatorKernel,
        mask: usize,
        from: u64,
        end: u64,
        start: u64,
        history: usize,
        weight: f64,
        hit: bool,
    ) -> Result<f64, MarkovError> {
        if weight == 0.0 {
            return Ok(0.0);
        }
        if from == end {
            return Ok(if hit { weight } else { 0.0 });
        }
        let p = kernel.transition(from, history)?;
        let idx = from + 1;
        let shifted = (history << 1) & mask;
        let one = walk(kernel, mask, idx, end, start, shifted | 1, weight * p, hit || idx >= start)?;
        let zero = walk(kernel, mask, idx, end, start, shifted, weight * (1.0 - p), hit)?;
        Ok(one + zero)
    }

    let mut total = 0.0;
    if start > k {
        let states = forward_marginals(kernel, start - 1)?.state_probs;
        for (h, &w) in states.iter().enumerate() {
            total += walk(kernel, mask, start - 1, end, start, h, w, false)?;
        }
    } else {
        // The window reaches into the initial block.
        for (h, &w) in kernel.initial.iter().enumerate() {
            let hit_initial = (start..=end.min(k)).any(|i| (h >> (k - i)) & 1 == 1);
            if end <= k {
                if hit_initial {
                    total += w;
                }
            } else {
                total += walk(kernel, mask, k, end, start, h, w, hit_initial)?;
            }
        }
    }
    Ok(total)
}

/// Which criterion series to build from a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    /// `sum P(A_n)`; convergence alone gives no occurrences eventually.
    Marginal,
    /// `sum P(A_{n+1} | A_n^c ... A_{n-k+1}^c)`.
    CondPrevComplement,
    /// `sum P(A_n^c A_{n+1})`, order 1.
    JointComplementThen,
    /// `sum P(A_n A_{n+1}^c)`, order 1.
    JointThenComplement,
    /// `sum P(A_n^c ... A_{n+k-1}^c A_{n+k})`.
    OrderK,
    /// `sum P(A_n^c ... A_{n+m-1}^c A_{n+m})` for a fixed `m >= 0`; one-sided.
    ShiftedRun(u32),
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionKind::Marginal => f.write_str("MARGINAL"),
            CriterionKind::CondPrevComplement => f.write_str("COND_PREV_COMPLEMENT"),
            CriterionKind::JointComplementThen => f.write_str("JOINT_COMPLEMENT_THEN"),
            CriterionKind::JointThenComplement => f.write_str("JOINT_THEN_COMPLEMENT"),
            CriterionKind::OrderK => f.write_str("ORDER_K"),
            CriterionKind::ShiftedRun(m) => write!(f, "BN_SHIFTED({m})"),
        }
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Ok(match upper.as_str() {
            "MARGINAL" => CriterionKind::Marginal,
            "COND_PREV_COMPLEMENT" => CriterionKind::CondPrevComplement,
            "JOINT_COMPLEMENT_THEN" => CriterionKind::JointComplementThen,
            "JOINT_THEN_COMPLEMENT" => CriterionKind::JointThenComplement,
            "ORDER_K" => CriterionKind::OrderK,
            _ => {
                let inner = upper
                    .strip_prefix("BN_SHIFTED(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown criterion kind `{s}`"))?;
                CriterionKind::ShiftedRun(inner.parse().map_err(|_| format!("bad shift in `{s}`"))?)
            }
        })
    }
}

impl CriterionKind {
    /// Whether both halves of the 0/1 dichotomy follow from this series.
    pub fn is_two_sided(self) -> bool {
        !matches!(self, CriterionKind::Marginal | CriterionKind::ShiftedRun(_))
    }

    fn first_index(self, kernel: &IndicatorKernel) -> u64 {
        let k = kernel.order as u64;
        match self {
            CriterionKind::Marginal => 1,
            CriterionKind::CondPrevComplement => k.max(kernel.safe_start),
            CriterionKind::JointComplementThen | CriterionKind::JointThenComplement => 1,
            CriterionKind::OrderK => 1,
            CriterionKind::ShiftedRun(0) => 1,
            CriterionKind::ShiftedRun(m) => (k + 1).saturating_sub(m as u64).max(1),
        }
    }
}

/// The n-th criterion term, computed exactly.
pub fn criterion_term(kernel: &IndicatorKernel, kind: CriterionKind, n: u64) -> Result<f64, MarkovError> {
    let k = kernel.order as u64;
    let width = kernel.histories();
    match kind {
        CriterionKind::Marginal | CriterionKind::ShiftedRun(0) => kernel.marginal(n),
        CriterionKind::CondPrevComplement => {
            check_window(kernel, n, n)?;
            let cond = forward_marginals(kernel, n)?.state_probs[0];
            if cond < CONDITIONING_FLOOR {
                return Err(MarkovError::UndefinedTerm { index: n, probability: cond });
            }
            kernel.transition(n, 0)
        }
        CriterionKind::JointComplementThen | CriterionKind::JointThenComplement => {
            if k != 1 {
                return Err(MarkovError::IncompatibleKind { kind, order: kernel.order });
            }
            let s = forward_marginals(kernel, n)?.state_probs;
            if kind == CriterionKind::JointComplementThen {
                Ok(s[0] * kernel.transition(n, 0)?)
            } else {
                Ok(s[1] * (1.0 - kernel.transition(n, 1)?))
            }
        }
        CriterionKind::OrderK => {
            let e = n + k - 1;
            let s = forward_marginals(kernel, e)?.state_probs;
            Ok(s[0] * kernel.transition(e, 0)?)
        }
        CriterionKind::ShiftedRun(m) => {
            let m = m as u64;
            let e = n + m - 1;
            if e < k {
                return Err(MarkovError::BelowOrder { index: e, order: kernel.order });
            }
            if m >= k {
                let zeros = log_prob_no_occurrence_unchecked(kernel, n, e)?;
                Ok(zeros.exp() * kernel.transition(e, 0)?)
            } else {
                let low = (1usize << m) - 1;
                let s = forward_marginals(kernel, e)?.state_probs;
                let mut acc = 0.0;
                for (h, &w) in s.iter().enumerate().take(width) {
                    if h & low == 0 && w > 0.0 {
                        acc += w * kernel.transition(e, h)?;
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// Like [`log_prob_no_occurrence`] but without the safe-start and degeneracy
/// checks, for one-sided criteria that are defined everywhere.
fn log_prob_no_occurrence_unchecked(kernel: &IndicatorKernel, start: u64, end: u64) -> Result<f64, MarkovError> {
    let k = kernel.order as u64;
    let width = kernel.histories();
    let first_full = start + k - 1;
    let cache = kernel.states_through(end.max(first_full))?;
    let mut log_p = IndicatorKernel::state_slice(&cache, k, width, first_full)[0].ln();
    drop(cache);
    for i in first_full..end {
        log_p += (-kernel.transition(i, 0)?).ln_1p();
    }
    Ok(log_p)
}

/// The criterion series of `kind` as a lazily evaluated term sequence.
///
/// A term that cannot be evaluated shows up as `NaN`, which the series engine
/// reports as an invalid term; use [`criterion_term`] for the typed error.
pub fn criterion_terms(kernel: &IndicatorKernel, kind: CriterionKind) -> Result<TermSequence, MarkovError> {
    if matches!(kind, CriterionKind::JointComplementThen | CriterionKind::JointThenComplement) && kernel.order != 1 {
        return Err(MarkovError::IncompatibleKind { kind, order: kernel.order });
    }
    let first = kind.first_index(kernel);
    // Evaluate the first term now so structural errors surface here.
    criterion_term(kernel, kind, first)?;
    let kernel = kernel.clone();
    Ok(TermSequence::new(first, move |n| criterion_term(&kernel, kind, n).unwrap_or(f64::NAN)))
}

/// Samples `(I_{A_1}, ..., I_{A_T})`.
pub fn simulate_chain(kernel: &IndicatorKernel, horizon: usize, seed: u64) -> Result<Vec<bool>, MarkovError> {
    let mut rng = rng_from_seed(seed);
    simulate_chain_with(kernel, horizon, &mut rng)
}

pub fn simulate_chain_with<R: Rng + ?Sized>(
    kernel: &IndicatorKernel,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<bool>, MarkovError> {
    let k = kernel.order;
    if horizon < k {
        return Err(MarkovError::LengthMismatch { len: horizon, order: k });
    }
    let mask = kernel.mask();
    let u = open_uniform(rng);
    let mut acc = 0.0;
    let mut history = kernel.initial.len() - 1;
    for (h, &p) in kernel.initial.iter().enumerate() {
        acc += p;
        if u < acc {
            history = h;
            break;
        }
    }
    let mut out = Vec::with_capacity(horizon);
    for i in (0..k).rev() {
        out.push((history >> i) & 1 == 1);
    }
    for m in k as u64..horizon as u64 {
        let p = kernel.transition(m, history)?;
        let bit = open_uniform(rng) < p;
        history = ((history << 1) | bit as usize) & mask;
        out.push(bit);
    }
    Ok(out)
}

/// `sum_n P(A_n | realized past)` along a trajectory, including the initial
/// block's conditionals.
pub fn levy_conditional_sum(kernel: &IndicatorKernel, trajectory: &[bool]) -> Result<f64, MarkovError> {
    let k = kernel.order;
    if trajectory.len() < k {
        return Err(MarkovError::LengthMismatch { len: trajectory.len(), order: k });
    }
    let mut total = 0.0;
    // Initial block: condition the initial law on the bits seen so far.
    for j in 0..k {
        let shift = k - 1 - j;
        let consistent = |h: usize| (0..j).all(|i| ((h >> (k - 1 - i)) & 1 == 1) == trajectory[i]);
        let (mut num, mut den) = (0.0, 0.0);
        for (h, &p) in kernel.initial.iter().enumerate() {
            if consistent(h) {
                den += p;
                if (h >> shift) & 1 == 1 {
                    num += p;
                }
            }
        }
        if den <= 0.0 {
            return Err(MarkovError::ImpossibleTrajectory);
        }
        total += num / den;
    }
    let mask = kernel.mask();
    let mut history = trajectory[..k].iter().fold(0usize, |h, &b| (h << 1) | b as usize);
    let mut acc = crate::series::CompensatedSum::default();
    acc.add(total);
    for (m, &bit) in (k as u64..).zip(&trajectory[k..]) {
        acc.add(kernel.transition(m, history)?);
        history = ((history << 1) | bit as usize) & mask;
    }
    Ok(acc.value())
}

/// Outcome of a Borel-Cantelli criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dichotomy {
    #[serde(rename = "IO_Zero")]
    IoZero,
    #[serde(rename = "IO_One")]
    IoOne,
    NotApplicable,
    Indeterminate,
}

impl fmt::Display for Dichotomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dichotomy::IoZero => "IO_Zero",
            Dichotomy::IoOne => "IO_One",
            Dichotomy::NotApplicable => "NotApplicable",
            Dichotomy::Indeterminate => "Indeterminate",
        })
    }
}

/// Verdict plus the series classification behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub verdict: Dichotomy,
    pub series: Option<SeriesVerdict>,
}

/// Maps a series class to the lemma's conclusion.
pub fn dichotomy_from_class(kind: CriterionKind, class: SeriesClass) -> Dichotomy {
    match (class, kind.is_two_sided()) {
        (SeriesClass::Convergent, _) => Dichotomy::IoZero,
        (SeriesClass::Divergent, true) => Dichotomy::IoOne,
        _ => Dichotomy::Indeterminate,
    }
}

pub fn dichotomy_report(
    kernel: &IndicatorKernel,
    kind: CriterionKind,
    budget: &Budget,
) -> Result<DichotomyReport, MarkovError> {
    let marg_kernel = kernel.clone();
    let marginals = TermSequence::new(1, move |n| marg_kernel.marginal(n).unwrap_or(f64::NAN));
    if !series::terms_vanish(&marginals, budget)? {
        return Ok(DichotomyReport { verdict: Dichotomy::NotApplicable, series: None });
    }
    let terms = criterion_terms(kernel, kind)?;
    let verdict = series::classify(&terms, budget)?;
    Ok(DichotomyReport { verdict: dichotomy_from_class(kind, verdict.verdict), series: Some(verdict) })
}

/// `IO_Zero` / `IO_One` from the criterion series, or `NotApplicable` when
/// `P(A_n)` does not tend to zero (then `P(A_n i.o.) > 0` regardless).
pub fn dichotomy_verdict(
    kernel: &IndicatorKernel,
    kind: CriterionKind,
    budget: &Budget,
) -> Result<Dichotomy, MarkovError> {
    Ok(dichotomy_report(kernel, kind, budget)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair_coin() -> IndicatorKernel {
        IndicatorKernel::two_state(|_| 0.5, |_| 0.5, 0.5).unwrap()
    }

    fn sparse(q: fn(u64) -> f64) -> IndicatorKernel {
        IndicatorKernel::two_state(|_| 0.0, q, 0.0).unwrap()
    }

    #[test]
    fn iid_marginals_stay_put() {
        let k = fair_coin();
        for n in [1, 2, 10, 1000] {
            assert!((k.marginal(n).unwrap() - 0.5).abs() < 1e-15);
        }
        let absorbing = IndicatorKernel::two_state(|_| 1.0, |_| 0.0, 0.3).unwrap();
        assert!((absorbing.marginal(500).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn one_step_recursion() {
        let k = IndicatorKernel::two_state(|_| 0.5, |n| 1.0 / ((n + 1) as f64).powi(2), 0.0).unwrap();
        assert!((k.marginal(2).unwrap() - 0.25).abs() < 1e-15);
        let m = forward_marginals(&k, 7).unwrap();
        assert!((m.state_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            forward_marginals(&IndicatorKernel::new(2, vec![0.25; 4], |_, _| 0.5).unwrap(), 1),
            Err(MarkovError::BelowOrder { .. })
        ));
    }

    #[test]
    fn window_examples() {
        assert_eq!(tail_union_window(&sparse(|_| 0.0), 1, 10).unwrap(), 0.0);
        assert!((tail_union_window(&fair_coin(), 1, 3).unwrap() - 0.875).abs() < 1e-15);
        let k = IndicatorKernel::two_state(|_| 0.2, |_| 0.1, 0.5).unwrap();
        let w = tail_union_window(&k, 2, 4).unwrap();
        assert!((w - 0.3115).abs() < 1e-12, "{w}");
        assert!((brute_force_window(&k, 2, 4).unwrap() - w).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let certain = IndicatorKernel::two_state(|_| 1.0, |_| 1.0, 1.0).unwrap();
        assert_eq!(tail_union_window(&certain, 1, 4), Err(MarkovError::DegenerateWindow { index: 1 }));
        let k = fair_coin().with_safe_start(5);
        assert!(matches!(tail_union_window(&k, 2, 9), Err(MarkovError::BeforeSafeStart { .. })));
        assert!(matches!(brute_force_window(&fair_coin(), 1, 30), Err(MarkovError::WindowTooWide { .. })));
        assert!(matches!(tail_union_window(&fair_coin(), 5, 4), Err(MarkovError::EmptyWindow { .. })));
    }

    #[test]
    fn brute_force_initial_block() {
        // Order 2 with windows touching the initial pair.
        let k = IndicatorKernel::new(2, vec![0.4, 0.1, 0.3, 0.2], |n, h| 0.1 + 0.05 * h as f64 + 0.01 * (n % 3) as f64)
            .unwrap();
        // P(I_1 or I_2) = 1 - P(00).
        assert!((brute_force_window(&k, 1, 2).unwrap() - 0.6).abs() < 1e-15);
        assert!((brute_force_window(&k, 2, 2).unwrap() - 0.3).abs() < 1e-15);
        for (s, e) in [(2, 2), (2, 3), (2, 9), (3, 12), (5, 5)] {
            let a = tail_union_window(&k, s, e).unwrap();
            let b = brute_force_window(&k, s, e).unwrap();
            assert!((a - b).abs() < 1e-12, "[{s},{e}] {a} vs {b}");
        }
    }

    #[test]
    fn criterion_term_examples() {
        let iid = criterion_terms(&fair_coin(), CriterionKind::JointComplementThen).unwrap();
        for n in [1, 5, 40] {
            assert!((iid.term_at(n) - 0.25).abs() < 1e-15);
        }
        let k = IndicatorKernel::two_state(|_| 0.5, |n| 1.0 / ((n + 1) as f64).powi(2), 0.0).unwrap();
        let cond = criterion_terms(&k, CriterionKind::CondPrevComplement).unwrap();
        for n in [1u64, 2, 30] {
            assert_eq!(cond.term_at(n), 1.0 / ((n + 1) as f64).powi(2));
        }
    }

    #[test]
    fn order_two_run_term_matches_enumeration() {
        let k =
            IndicatorKernel::new(2, vec![0.3, 0.2, 0.25, 0.25], |_, h| if h == 0 { 0.1 } else { 0.3 + 0.1 * h as f64 })
                .unwrap();
        let t = criterion_term(&k, CriterionKind::OrderK, 2).unwrap();
        // P(A_2^c A_3^c A_4) by enumeration over I_1.
        let mut brute = 0.0;
        for i1 in 0..2usize {
            let h12 = i1 << 1; // I_2 = 0
            let p12 = k.initial()[h12];
            let p3 = 1.0 - k.transition(2, h12).unwrap();
            let h23 = 0; // I_2 = I_3 = 0
            let p4 = k.transition(3, h23).unwrap();
            brute += p12 * p3 * p4;
        }
        assert!((t - brute).abs() < 1e-12, "{t} vs {brute}");
    }

    #[test]
    fn shifted_runs() {
        let k = IndicatorKernel::two_state(|_| 0.3, |n| 0.2 / n as f64, 0.1).unwrap();
        // m = 0 is the marginal, m = 1 is the joint complement-then term.
        for n in [1u64, 4, 17] {
            let m0 = criterion_term(&k, CriterionKind::ShiftedRun(0), n).unwrap();
            assert!((m0 - k.marginal(n).unwrap()).abs() < 1e-15);
            let m1 = criterion_term(&k, CriterionKind::ShiftedRun(1), n).unwrap();
            let j = criterion_term(&k, CriterionKind::JointComplementThen, n).unwrap();
            assert!((m1 - j).abs() < 1e-15);
        }
        // m = 3: P(A_n^c A_{n+1}^c A_{n+2}^c A_{n+3}) by enumeration.
        let n = 4;
        let t = criterion_term(&k, CriterionKind::ShiftedRun(3), n).unwrap();
        let miss = 1.0 - k.marginal(n).unwrap();
        let brute = miss * (1.0 - 0.2 / 4.0) * (1.0 - 0.2 / 5.0) * (0.2 / 6.0);
        assert!((t - brute).abs() < 1e-15);
    }

    #[test]
    fn kind_order_compatibility() {
        let k2 = IndicatorKernel::new(2, vec![0.25; 4], |_, _| 0.5).unwrap();
        assert!(matches!(
            criterion_terms(&k2, CriterionKind::JointThenComplement),
            Err(MarkovError::IncompatibleKind { .. })
        ));
        assert!(criterion_terms(&k2, CriterionKind::OrderK).is_ok());
    }

    #[test]
    fn undefined_conditional_term() {
        let k = IndicatorKernel::two_state(|_| 1.0, |_| 1.0, 1.0).unwrap();
        assert!(matches!(
            criterion_term(&k, CriterionKind::CondPrevComplement, 3),
            Err(MarkovError::UndefinedTerm { .. })
        ));
    }

    #[test]
    fn simulation_examples() {
        let ones = IndicatorKernel::two_state(|_| 1.0, |_| 1.0, 0.5).unwrap();
        for seed in 0..5 {
            let t = simulate_chain(&ones, 50, seed).unwrap();
            assert!(t[1..].iter().all(|&b| b));
        }
        let zeros = IndicatorKernel::two_state(|_| 0.0, |_| 0.0, 0.0).unwrap();
        assert!(simulate_chain(&zeros, 50, 9).unwrap().iter().all(|&b| !b));
        let n = 100_000;
        let t = simulate_chain(&fair_coin(), n, 42).unwrap();
        let frac = t.iter().filter(|&&b| b).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt());
        assert_eq!(t, simulate_chain(&fair_coin(), n, 42).unwrap());
    }

    #[test]
    fn levy_sum_examples() {
        let k = sparse(|n| 1.0 / ((n + 1) as f64).powi(2));
        let s = levy_conditional_sum(&k, &vec![false; 1000]).unwrap();
        let direct: f64 = (1..=999).map(|n| 1.0 / ((n + 1) as f64).powi(2)).sum();
        assert!((s - direct).abs() < 1e-14);
        assert!(s > 0.60 && s < 0.65);

        let traj = simulate_chain(&fair_coin(), 101, 1).unwrap();
        assert!((levy_conditional_sum(&fair_coin(), &traj).unwrap() - 50.5).abs() < 1e-12);

        let sure = IndicatorKernel::two_state(|_| 1.0, |_| 1.0, 1.0).unwrap();
        assert_eq!(levy_conditional_sum(&sure, &[true; 64]).unwrap(), 64.0);

        let k2 = IndicatorKernel::new(2, vec![0.25; 4], |_, _| 0.5).unwrap();
        assert!(matches!(levy_conditional_sum(&k2, &[true]), Err(MarkovError::LengthMismatch { .. })));
    }

    #[test]
    fn dichotomy_examples() {
        let budget = Budget::default().with_max_index(100_000).with_sum_limit(10_000);
        let conv = sparse(|n| 1.0 / ((n + 1) as f64).powi(2));
        let div = sparse(|n| 1.0 / (n + 1) as f64);
        assert_eq!(dichotomy_verdict(&conv, CriterionKind::CondPrevComplement, &budget).unwrap(), Dichotomy::IoZero);
        assert_eq!(dichotomy_verdict(&div, CriterionKind::CondPrevComplement, &budget).unwrap(), Dichotomy::IoOne);
        assert_eq!(
            dichotomy_verdict(&fair_coin(), CriterionKind::JointComplementThen, &budget).unwrap(),
            Dichotomy::NotApplicable
        );
        // The classic series is one-sided: divergence decides nothing.
        assert_eq!(dichotomy_verdict(&div, CriterionKind::Marginal, &budget).unwrap(), Dichotomy::Indeterminate);
    }

    #[test]
    fn kind_parsing() {
        for kind in [
            CriterionKind::Marginal,
            CriterionKind::CondPrevComplement,
            CriterionKind::JointComplementThen,
            CriterionKind::JointThenComplement,
            CriterionKind::OrderK,
            CriterionKind::ShiftedRun(3),
        ] {
            assert_eq!(kind.to_string().parse::<CriterionKind>().unwrap(), kind);
        }
        assert!("nope".parse::<CriterionKind>().is_err());
    }
}
