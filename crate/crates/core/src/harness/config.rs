//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::copula::{BivariateModel, Copula};
use crate::distributions::Univariate;
use crate::falpha::{ExponentSequence, FalphaSeries, MaximaScenario, Thresholds};
use crate::markov::{CriterionKind, IndicatorKernel};
use crate::series::SeriesFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

fn default_horizon() -> u64 {
    1_000
}

fn default_replications() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub format: OutputFormat,
    /// Inclusive index intervals `[a, b]` for occurrence counting.
    #[serde(default)]
    pub windows: Vec<[u64; 2]>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    MarkovChain(MarkovChainScenario),
    FalphaMaxima(FalphaMaximaScenario),
    FalphaNewcomer(FalphaNewcomerScenario),
    Concomitant(ConcomitantScenario),
    Series(SeriesScenario),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::MarkovChain(_) => "markov_chain",
            Scenario::FalphaMaxima(_) => "falpha_maxima",
            Scenario::FalphaNewcomer(_) => "falpha_newcomer",
            Scenario::Concomitant(_) => "concomitant",
            Scenario::Series(_) => "series",
        }
    }
}

/// Transition probability as a function of the index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rate {
    Constant {
        value: f64,
    },
    /// `scale / (n + shift)^power`, capped at 1.
    InversePower {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        shift: f64,
        power: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Rate {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            Rate::Constant { value } => value,
            Rate::InversePower { scale, shift, power } => (scale / (n as f64 + shift).powf(power)).min(1.0),
        }
    }

    fn validate(&self, name: &str) -> Result<(), HarnessError> {
        let ok = match *self {
            Rate::Constant { value } => (0.0..=1.0).contains(&value),
            Rate::InversePower { scale, shift, power } => {
                scale >= 0.0 && scale.is_finite() && shift > -1.0 && shift.is_finite() && power.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("invalid rate `{name}`: {self:?}")))
        }
    }
}

/// Order-`k` kernel given as a table, see [`IndicatorKernel::from_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTable {
    pub order: usize,
    pub initial: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

fn default_criteria() -> Vec<String> {
    vec!["COND_PREV_COMPLEMENT".into(), "JOINT_COMPLEMENT_THEN".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovChainScenario {
    /// `P(A_{n+1} | A_n)`.
    #[serde(default)]
    pub p: Option<Rate>,
    /// `P(A_{n+1} | A_n^c)`.
    #[serde(default)]
    pub q: Option<Rate>,
    /// `P(A_1)`.
    #[serde(default)]
    pub p1: f64,
    #[serde(default)]
    pub table: Option<KernelTable>,
    #[serde(default)]
    pub safe_start: Option<u64>,
    /// Criterion kinds, e.g. `COND_PREV_COMPLEMENT` or `BN_SHIFTED(2)`.
    #[serde(default = "default_criteria")]
    pub criteria: Vec<String>,
}

impl MarkovChainScenario {
    pub fn kernel(&self) -> Result<IndicatorKernel, HarnessError> {
        let kernel = match (&self.table, self.p, self.q) {
            (Some(t), None, None) => IndicatorKernel::from_table(t.order, t.initial.clone(), t.rows.clone()),
            (None, p, Some(q)) => {
                let p = p.unwrap_or(Rate::Constant { value: 0.0 });
                p.validate("p")?;
                q.validate("q")?;
                if !(0.0..=1.0).contains(&self.p1) {
                    return Err(HarnessError::Config(format!("p1 = {} is not a probability", self.p1)));
                }
                IndicatorKernel::two_state(move |n| p.at(n), move |n| q.at(n), self.p1)
            }
            _ => {
                return Err(HarnessError::Config(
                    "markov_chain needs either `q` (and optionally `p`, `p1`) or `table`".into(),
                ))
            }
        }
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(match self.safe_start {
            Some(s) => kernel.with_safe_start(s),
            None => kernel,
        })
    }

    pub fn criterion_kinds(&self) -> Result<Vec<CriterionKind>, HarnessError> {
        self.criteria.iter().map(|c| c.parse::<CriterionKind>().map_err(HarnessError::Config)).collect()
    }
}

fn uniform() -> Univariate {
    Univariate::Uniform
}

fn default_falpha_series() -> Vec<String> {
    vec!["BC_CLASSIC".into(), "PROP41".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalphaMaximaScenario {
    #[serde(default = "uniform")]
    pub base: Univariate,
    pub exponents: ExponentSequence,
    pub thresholds: Thresholds,
    #[serde(default = "default_falpha_series")]
    pub series: Vec<String>,
}

impl FalphaMaximaScenario {
    pub fn example41(gamma: f64) -> Self {
        Self {
            base: Univariate::Uniform,
            exponents: ExponentSequence::Example41 { gamma },
            thresholds: Thresholds::Example41,
            series: default_falpha_series(),
        }
    }

    pub fn scenario(&self) -> Result<MaximaScenario, HarnessError> {
        MaximaScenario::new(self.base, self.exponents.clone(), self.thresholds.clone())
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn series_kinds(&self) -> Result<Vec<FalphaSeries>, HarnessError> {
        self.series.iter().map(|s| s.parse().map_err(HarnessError::Config)).collect()
    }
}

fn default_indices() -> Vec<u64> {
    vec![2, 3, 5, 10]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalphaNewcomerScenario {
    #[serde(default = "uniform")]
    pub base: Univariate,
    pub exponents: ExponentSequence,
    /// `PROP51` (newcomer not maximal, `B_n`) or `PROP52` (newcomer maximal, `C_n`).
    pub proposition: String,
    /// Indices `n` at which `P(B_n)` and `P(B_n B_{n+1}^c)` are reported.
    #[serde(default = "default_indices")]
    pub indices: Vec<u64>,
}

impl FalphaNewcomerScenario {
    pub fn scenario(&self) -> Result<MaximaScenario, HarnessError> {
        MaximaScenario::new(self.base, self.exponents.clone(), Thresholds::Constant { value: f64::MAX })
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn kind(&self) -> Result<FalphaSeries, HarnessError> {
        match self.proposition.parse().map_err(HarnessError::Config)? {
            k @ (FalphaSeries::Prop51 | FalphaSeries::Prop52) => Ok(k),
            other => Err(HarnessError::Config(format!("proposition must be PROP51 or PROP52, got {other}"))),
        }
    }
}

fn default_n_values() -> Vec<u64> {
    vec![1, 2, 5, 10]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcomitantScenario {
    pub copula: Copula,
    #[serde(default = "uniform")]
    pub marginal_x: Univariate,
    #[serde(default = "uniform")]
    pub marginal_y: Univariate,
    pub y_grid: Vec<f64>,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<u64>,
}

impl ConcomitantScenario {
    pub fn model(&self) -> Result<BivariateModel, HarnessError> {
        BivariateModel::new(self.copula, self.marginal_x, self.marginal_y)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesScenario {
    pub family: SeriesFamily,
    /// Attach the closed-form class to the sequence.
    #[serde(default)]
    pub declared: bool,
    #[serde(default)]
    pub max_index: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            horizon: default_horizon(),
            replications: default_replications(),
            master_seed: 0,
            format: OutputFormat::Csv,
            windows: Vec::new(),
            scenario,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every invariant that can be checked without running.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(HarnessError::Config("horizon must be at least 1".into()));
        }
        if self.replications < 1 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        for &[a, b] in &self.windows {
            if a < 1 || a > b || b > self.horizon {
                return Err(HarnessError::Config(format!("window [{a}, {b}] is not inside [1, {}]", self.horizon)));
            }
        }
        match &self.scenario {
            Scenario::MarkovChain(m) => {
                let k = m.kernel()?;
                m.criterion_kinds()?;
                if (self.horizon as usize) < k.order() {
                    return Err(HarnessError::Config("horizon is shorter than the chain order".into()));
                }
            }
            Scenario::FalphaMaxima(f) => {
                f.scenario()?;
                f.series_kinds()?;
            }
            Scenario::FalphaNewcomer(f) => {
                f.scenario()?;
                f.kind()?;
                if f.indices.iter().any(|&n| n < 2) {
                    return Err(HarnessError::Config("newcomer indices must be at least 2".into()));
                }
                if self.windows.iter().any(|w| w[0] < 2) {
                    return Err(HarnessError::Config("newcomer windows must start at 2 or later".into()));
                }
            }
            Scenario::Concomitant(c) => {
                let model = c.model()?;
                let top = model.marginal_y.extremities().1;
                if c.y_grid.is_empty() || c.y_grid.iter().any(|&y| !(y < top) || !y.is_finite()) {
                    return Err(HarnessError::Config(
                        "y_grid must be nonempty and below the right extremity of G".into(),
                    ));
                }
                if c.n_values.iter().any(|&n| n < 1) {
                    return Err(HarnessError::Config("n_values must be at least 1".into()));
                }
            }
            Scenario::Series(s) => {
                s.family.validate().map_err(HarnessError::Config)?;
                if s.max_index.is_some_and(|m| m < 1_000) {
                    return Err(HarnessError::Config("max_index must be at least 1000".into()));
                }
            }
        }
        Ok(())
    }
}
