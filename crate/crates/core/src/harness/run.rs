//! Seeded replications plus the exact quantities each scenario admits.
//!
//! Replication `r` draws from its own generator seeded with
//! `derive_seed(master_seed, r)`. Results are collected in replication order
//! and reduced sequentially, so the output does not depend on the number of
//! worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use super::HarnessError;
use crate::copula::{self, concomitant_levels_with};
use crate::falpha::{self, FalphaError, FalphaSeries};
use crate::markov::{self, dichotomy_from_class, CriterionKind, Dichotomy};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::series::{self, Budget, SeriesClass};

/// One emitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub n_or_window: String,
    pub exact_value: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub verdict: Option<String>,
}

impl ResultRow {
    fn exact(scenario: impl Into<String>, at: impl Into<String>, value: Option<f64>, verdict: Option<String>) -> Self {
        Self {
            scenario: scenario.into(),
            n_or_window: at.into(),
            exact_value: value,
            mc_estimate: None,
            mc_stderr: None,
            verdict,
        }
    }
}

/// Occurrences of the scenario's event along one trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationOccurrences {
    pub total: u64,
    /// Last index `n <= T` with an occurrence, `0` if none.
    pub last: u64,
    pub window_counts: Vec<u64>,
}

impl ReplicationOccurrences {
    pub fn from_indicators(indicators: &[bool], windows: &[[u64; 2]]) -> Self {
        let total = indicators.iter().filter(|&&b| b).count() as u64;
        let last = indicators.iter().rposition(|&b| b).map_or(0, |i| i as u64 + 1);
        let window_counts = windows
            .iter()
            .map(|&[a, b]| indicators[(a - 1) as usize..b as usize].iter().filter(|&&x| x).count() as u64)
            .collect();
        Self { total, last, window_counts }
    }
}

/// Finite-horizon summary standing in for "infinitely often".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceStats {
    pub event: String,
    pub replications: u64,
    pub horizon: u64,
    pub windows: Vec<[u64; 2]>,
    pub mean_total: f64,
    pub mean_last: f64,
    /// `(q, value)` for the last-occurrence index.
    pub last_quantiles: Vec<(f64, u64)>,
    pub window_mean_count: Vec<f64>,
    /// Fraction of replications with at least one occurrence in the window.
    pub window_hit_fraction: Vec<f64>,
    #[serde(skip)]
    pub per_replication: Vec<ReplicationOccurrences>,
}

pub const LAST_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

impl OccurrenceStats {
    pub fn aggregate(event: &str, horizon: u64, windows: &[[u64; 2]], reps: Vec<ReplicationOccurrences>) -> Self {
        let r = reps.len() as f64;
        let mean_total = reps.iter().map(|o| o.total as f64).sum::<f64>() / r;
        let mean_last = reps.iter().map(|o| o.last as f64).sum::<f64>() / r;
        let mut lasts: Vec<u64> = reps.iter().map(|o| o.last).collect();
        lasts.sort_unstable();
        let last_quantiles = LAST_QUANTILES
            .iter()
            .map(|&q| {
                let rank = ((q * r).ceil() as usize).clamp(1, lasts.len());
                (q, lasts[rank - 1])
            })
            .collect();
        let window_mean_count =
            (0..windows.len()).map(|w| reps.iter().map(|o| o.window_counts[w] as f64).sum::<f64>() / r).collect();
        let window_hit_fraction =
            (0..windows.len()).map(|w| reps.iter().filter(|o| o.window_counts[w] > 0).count() as f64 / r).collect();
        Self {
            event: event.to_string(),
            replications: reps.len() as u64,
            horizon,
            windows: windows.to_vec(),
            mean_total,
            mean_last,
            last_quantiles,
            window_mean_count,
            window_hit_fraction,
            per_replication: reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub horizon: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub rows: Vec<ResultRow>,
    pub occurrence: Option<OccurrenceStats>,
    pub notes: Vec<String>,
}

/// Flagged point estimated by simulation, with its exact value if known.
struct Point {
    scenario: String,
    at: String,
    exact: Option<f64>,
}

type Simulator<'a> = Box<dyn Fn(&mut SimRng) -> Result<(Vec<bool>, Vec<bool>), HarnessError> + Sync + 'a>;

struct Plan<'a> {
    event: String,
    verdict_rows: Vec<ResultRow>,
    points: Vec<Point>,
    window_exact: Vec<Option<f64>>,
    simulate: Option<Simulator<'a>>,
    notes: Vec<String>,
}

fn runtime(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Powers of ten up to `horizon`, and `horizon` itself.
pub fn checkpoints(first: u64, horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |&n| n.checked_mul(10))
        .take_while(|&n| n <= horizon)
        .filter(|&n| n >= first)
        .collect();
    if out.last() != Some(&horizon) && horizon >= first {
        out.push(horizon);
    }
    out
}

/// Binomial standard error of `hits / reps`. At 0 or `reps` hits the
/// Agresti-Coull proportion `(hits + 2) / (reps + 4)` is used instead, so the
/// error is never reported as zero.
pub fn binomial_stderr(hits: f64, reps: f64) -> f64 {
    let p = if hits == 0.0 || hits == reps { (hits + 2.0) / (reps + 4.0) } else { hits / reps };
    (p * (1.0 - p) / reps).sqrt()
}

fn window_label(w: [u64; 2]) -> String {
    format!("[{},{}]", w[0], w[1])
}

fn class_name(c: SeriesClass) -> String {
    c.to_string()
}

/// Runs the experiment described by `config`.
pub fn run_replications(config: &ExperimentConfig) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let plan = plan(config)?;
    let kind = config.scenario.kind();
    let mut rows = plan.verdict_rows;
    let mut occurrence = None;

    if let Some(sim) = &plan.simulate {
        let windows = &config.windows;
        let outcomes = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_from_seed(derive_seed(config.master_seed, r));
                let (ind, flags) = sim(&mut rng)?;
                Ok((ReplicationOccurrences::from_indicators(&ind, windows), flags))
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let reps = config.replications as f64;
        for (i, p) in plan.points.iter().enumerate() {
            let hits = outcomes.iter().filter(|(_, f)| f[i]).count() as f64;
            let est = hits / reps;
            rows.push(ResultRow {
                scenario: p.scenario.clone(),
                n_or_window: p.at.clone(),
                exact_value: p.exact,
                mc_estimate: Some(est),
                mc_stderr: Some(binomial_stderr(hits, reps)),
                verdict: None,
            });
        }
        let stats = OccurrenceStats::aggregate(
            &plan.event,
            config.horizon,
            windows,
            outcomes.into_iter().map(|(o, _)| o).collect(),
        );
        for (w, &win) in windows.iter().enumerate() {
            let est = stats.window_hit_fraction[w];
            let hits = stats.per_replication.iter().filter(|o| o.window_counts[w] > 0).count() as f64;
            rows.push(ResultRow {
                scenario: format!("{kind}/window"),
                n_or_window: window_label(win),
                exact_value: plan.window_exact[w],
                mc_estimate: Some(est),
                mc_stderr: Some(binomial_stderr(hits, reps)),
                verdict: None,
            });
        }
        occurrence = Some(stats);
    }

    Ok(RunResult {
        scenario: kind.to_string(),
        horizon: config.horizon,
        replications: config.replications,
        master_seed: config.master_seed,
        rows,
        occurrence,
        notes: plan.notes,
    })
}

fn plan(config: &ExperimentConfig) -> Result<Plan<'_>, HarnessError> {
    let horizon = config.horizon;
    match &config.scenario {
        Scenario::MarkovChain(m) => {
            let kernel = m.kernel()?;
            let mut verdict_rows = Vec::new();
            for kind in m.criterion_kinds()? {
                let report = markov::dichotomy_report(&kernel, kind, &Budget::default()).map_err(runtime)?;
                let last = report.series.as_ref().and_then(|s| s.partial_sums.last().map(|p| p.1));
                verdict_rows.push(ResultRow::exact(
                    format!("markov_chain/{kind}"),
                    "series",
                    last,
                    Some(report.verdict.to_string()),
                ));
            }
            let cps = checkpoints(1, horizon);
            let points = cps
                .iter()
                .map(|&n| {
                    Ok(Point {
                        scenario: "markov_chain/P(A_n)".into(),
                        at: n.to_string(),
                        exact: Some(kernel.marginal(n).map_err(runtime)?),
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let mut notes = Vec::new();
            let window_exact = config
                .windows
                .iter()
                .map(|&[a, b]| match markov::tail_union_window(&kernel, a, b) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(format!("window [{a},{b}]: {e}"));
                        None
                    }
                })
                .collect();
            let t = horizon as usize;
            Ok(Plan {
                event: "A_n".into(),
                verdict_rows,
                points,
                window_exact,
                simulate: Some(Box::new(move |rng| {
                    let traj = markov::simulate_chain_with(&kernel, t, rng).map_err(runtime)?;
                    let flags = cps.iter().map(|&n| traj[n as usize - 1]).collect();
                    Ok((traj, flags))
                })),
                notes,
            })
        }
        Scenario::FalphaMaxima(f) => {
            let sc = f.scenario()?;
            let kernel = falpha::maxima_event_kernel(&sc).map_err(runtime)?;
            let mut verdict_rows = Vec::new();
            for kind in f.series_kinds()? {
                let (class, io) = match falpha::series_terms(&sc, kind) {
                    Ok(terms) => {
                        let v = series::classify(&terms, &Budget::default()).map_err(runtime)?;
                        let io = match kind {
                            FalphaSeries::Prop41 => {
                                Some(dichotomy_from_class(CriterionKind::JointThenComplement, v.verdict))
                            }
                            FalphaSeries::BcClassic => Some(dichotomy_from_class(CriterionKind::Marginal, v.verdict)),
                            _ => None,
                        };
                        (class_name(v.verdict), io.map(|d| d.to_string()))
                    }
                    Err(FalphaError::Precondition(_)) => {
                        let na = Dichotomy::NotApplicable.to_string();
                        (na.clone(), Some(na))
                    }
                    Err(e) => return Err(runtime(e)),
                };
                verdict_rows.push(ResultRow::exact(
                    format!("falpha_maxima/series:{kind}"),
                    "series",
                    None,
                    Some(class),
                ));
                if let Some(io) = io {
                    verdict_rows.push(ResultRow::exact(format!("falpha_maxima/io:{kind}"), "series", None, Some(io)));
                }
            }
            let cps = checkpoints(1, horizon);
            let points = cps
                .iter()
                .map(|&n| Point {
                    scenario: "falpha_maxima/P(M_n<=x_n)".into(),
                    at: n.to_string(),
                    exact: Some(sc.prob_max_leq(n)),
                })
                .collect();
            let mut notes = Vec::new();
            let window_exact = config
                .windows
                .iter()
                .map(|&[a, b]| match markov::tail_union_window(&kernel, a, b) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        notes.push(format!("window [{a},{b}]: {e}"));
                        None
                    }
                })
                .collect();
            let t = horizon as usize;
            Ok(Plan {
                event: "M_n <= x_n".into(),
                verdict_rows,
                points,
                window_exact,
                simulate: Some(Box::new(move |rng| {
                    let traj = falpha::simulate_scheme_with(&sc, t, rng);
                    let ind: Vec<bool> = traj.steps.iter().map(|s| s.a).collect();
                    let flags = cps.iter().map(|&n| ind[n as usize - 1]).collect();
                    Ok((ind, flags))
                })),
                notes,
            })
        }
        Scenario::FalphaNewcomer(f) => {
            let sc = f.scenario()?;
            let kind = f.kind()?;
            let mut verdict_rows = Vec::new();
            let mut notes =
                vec!["window rows count replications with at least one occurrence of the event".to_string()];
            let (class, io) = match falpha::series_terms(&sc, kind) {
                Ok(terms) => {
                    let v = series::classify(&terms, &Budget::default()).map_err(runtime)?;
                    let io = dichotomy_from_class(CriterionKind::JointThenComplement, v.verdict);
                    (class_name(v.verdict), io.to_string())
                }
                Err(FalphaError::Precondition(p)) => {
                    notes.push(format!("{kind}: precondition violated: {p}"));
                    let na = Dichotomy::NotApplicable.to_string();
                    (na.clone(), na)
                }
                Err(e) => return Err(runtime(e)),
            };
            verdict_rows.push(ResultRow::exact(format!("falpha_newcomer/series:{kind}"), "series", None, Some(class)));
            verdict_rows.push(ResultRow::exact(format!("falpha_newcomer/io:{kind}"), "series", None, Some(io)));

            let idx: Vec<u64> = f.indices.iter().copied().filter(|&n| n < horizon).collect();
            let mut points = Vec::new();
            for &n in &idx {
                let (b, joint) = falpha::exact_event_probs(&sc, n).map_err(runtime)?;
                points.push(Point { scenario: "falpha_newcomer/P(B_n)".into(), at: n.to_string(), exact: Some(b) });
                points.push(Point {
                    scenario: "falpha_newcomer/P(B_n B_n+1^c)".into(),
                    at: n.to_string(),
                    exact: Some(joint),
                });
            }
            let use_b = kind == FalphaSeries::Prop51;
            let window_exact = config
                .windows
                .iter()
                .map(|&[a, b]| {
                    falpha::newcomer_window_probs(&sc, a, b).ok().map(|(pb, pc)| if use_b { pb } else { pc })
                })
                .collect();
            let t = horizon as usize;
            Ok(Plan {
                event: if use_b { "B_n = {M_n > X_n}".into() } else { "C_n = {M_n = X_n}".into() },
                verdict_rows,
                points,
                window_exact,
                simulate: Some(Box::new(move |rng| {
                    let traj = falpha::simulate_scheme_with(&sc, t, rng);
                    let b: Vec<bool> = traj.steps.iter().map(|s| s.b).collect();
                    let mut flags = Vec::with_capacity(2 * idx.len());
                    for &n in &idx {
                        let i = n as usize - 1;
                        flags.push(b[i]);
                        flags.push(b[i] && !b[i + 1]);
                    }
                    let ind = if use_b { b } else { traj.steps.iter().map(|s| s.c).collect() };
                    Ok((ind, flags))
                })),
                notes,
            })
        }
        Scenario::Concomitant(c) => {
            let model = c.model()?;
            let report = copula::theorem31_verdict(&model, &c.y_grid).map_err(runtime)?;
            let mut verdict_rows = Vec::new();
            for lv in &report.levels {
                verdict_rows.push(ResultRow::exact(
                    "concomitant/criterion_integral_slope",
                    format!("y={}", lv.y),
                    lv.integral.as_ref().map(|i| i.slope),
                    Some(lv.verdict.to_string()),
                ));
                let beta = copula::beta_limit(&model, lv.y).map_err(runtime)?;
                verdict_rows.push(ResultRow::exact(
                    "concomitant/beta",
                    format!("y={}", lv.y),
                    Some(beta.estimate),
                    None,
                ));
            }
            verdict_rows.push(ResultRow::exact(
                "concomitant/overall",
                "y_grid",
                None,
                Some(report.overall.to_string()),
            ));

            let levels: Vec<f64> = c.y_grid.iter().map(|&y| model.marginal_y.cdf(y)).collect();
            let mut points = Vec::new();
            let mut specs = Vec::new();
            for (yi, &y) in c.y_grid.iter().enumerate() {
                for &n in c.n_values.iter().filter(|&&n| n <= horizon) {
                    points.push(Point {
                        scenario: format!("concomitant/P(Y[n,n]<=y)@y={y}"),
                        at: n.to_string(),
                        exact: Some(copula::prob_concomitant_leq(&model, n, y).map_err(runtime)?),
                    });
                    specs.push((yi, n, false));
                }
                for &n in c.n_values.iter().filter(|&&n| n < horizon) {
                    points.push(Point {
                        scenario: format!("concomitant/P(Y[n,n]>y,Y[n+1,n+1]<=y)@y={y}"),
                        at: n.to_string(),
                        exact: Some(copula::criterion_term(&model, n, y).map_err(runtime)?),
                    });
                    specs.push((yi, n, true));
                }
            }
            let copula = model.copula;
            let t = horizon as usize;
            let v0 = levels[0];
            Ok(Plan {
                event: format!("Y[n,n] <= {}", c.y_grid[0]),
                verdict_rows,
                points,
                window_exact: vec![None; config.windows.len()],
                simulate: Some(Box::new(move |rng| {
                    let lv = concomitant_levels_with(&copula, t, rng).map_err(runtime)?;
                    let flags = specs
                        .iter()
                        .map(|&(yi, n, joint)| {
                            let i = n as usize - 1;
                            if joint {
                                lv[i] > levels[yi] && lv[i + 1] <= levels[yi]
                            } else {
                                lv[i] <= levels[yi]
                            }
                        })
                        .collect();
                    Ok((lv.iter().map(|&v| v <= v0).collect(), flags))
                })),
                notes: vec![
                    "simulation runs on the copula scale; events {Y <= y} are {V <= G(y)}".into(),
                    "the criterion is certified on the listed y values only".into(),
                ],
            })
        }
        Scenario::Series(s) => {
            let terms = if s.declared { s.family.declared_terms() } else { s.family.terms() };
            let budget = match s.max_index {
                Some(m) => Budget::default().with_max_index(m),
                None => Budget::default(),
            };
            let v = series::classify(&terms, &budget).map_err(runtime)?;
            let mut verdict_rows = vec![ResultRow::exact(
                format!("series/{}", s.family),
                "series",
                v.partial_sums.last().map(|p| p.1),
                Some(class_name(v.verdict)),
            )];
            verdict_rows.extend(v.partial_sums.iter().map(|&(n, sum)| {
                ResultRow::exact(format!("series/{}/partial_sum", s.family), n.to_string(), Some(sum), None)
            }));
            let notes = v
                .tests_applied
                .iter()
                .map(|t| format!("{}: {}", t.test, t.vote.map_or("abstain".into(), |c| c.to_string())))
                .chain(v.diagnostic.clone())
                .collect();
            Ok(Plan {
                event: String::new(),
                verdict_rows,
                points: Vec::new(),
                window_exact: Vec::new(),
                simulate: None,
                notes,
            })
        }
    }
}
