//! `bcmarkov`: exact criteria and Monte Carlo runs for Markov sequences of
//! events, maxima of `F^alpha` schemes and concomitants of maxima.

use std::path::PathBuf;
use std::process::ExitCode;

use bcmarkov_core::copula::Copula;
use bcmarkov_core::distributions::Univariate;
use bcmarkov_core::falpha::ExponentSequence;
use bcmarkov_core::harness::config::{
    ConcomitantScenario, FalphaMaximaScenario, FalphaNewcomerScenario, MarkovChainScenario, Rate, SeriesScenario,
};
use bcmarkov_core::harness::{emit, run_replications, ExperimentConfig, HarnessError, OutputFormat, Scenario};
use bcmarkov_core::series::SeriesFamily;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bcmarkov", version, about = "Borel-Cantelli criteria for Markov sequences of events")]
struct Cli {
    /// Experiment file (TOML). Required by `simulate`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `csv` or `json`.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Master seed, overriding the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Horizon T.
    #[arg(long)]
    horizon: Option<u64>,
    /// Replications R.
    #[arg(long)]
    reps: Option<u64>,
    /// Occurrence window `a,b` (repeatable).
    #[arg(long = "window", value_parser = parse_window)]
    windows: Vec<[u64; 2]>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a built-in series family, e.g. `p(1.5)` or `logpower(1)`.
    ClassifySeries {
        family: SeriesFamily,
        /// Attach the closed-form class instead of relying on the heuristic.
        #[arg(long)]
        declared: bool,
        #[arg(long)]
        max_index: Option<u64>,
    },
    /// Two-state chain with `q_n = scale/(n+shift)^power` and constant `p`.
    MarkovTail {
        #[arg(long, default_value_t = 2.0)]
        q_power: f64,
        #[arg(long, default_value_t = 1.0)]
        q_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        q_shift: f64,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        p1: f64,
        /// Criterion kinds, e.g. `COND_PREV_COMPLEMENT`.
        #[arg(long = "criterion")]
        criteria: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Uniform base with the gamma-indexed exponents and thresholds; the maxima criterion switches at gamma = 1.
    FalphaMaxima {
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Newcomer events `{M_n > X_n}` for a given exponent family.
    FalphaNewcomer {
        /// `constant(c)`, `power(c)`, `superexp` or `example41(g)`.
        #[arg(long)]
        alpha_family: ExponentSequence,
        /// `PROP51` or `PROP52`.
        #[arg(long, default_value = "PROP51")]
        prop: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Concomitant of the maximum for uniform marginals.
    Concomitant {
        /// `independence`, `fgm` or `comonotone`.
        #[arg(long)]
        copula: String,
        #[arg(long)]
        lambda: Option<f64>,
        /// Level (repeatable).
        #[arg(long = "y", required = true)]
        y: Vec<f64>,
        /// Sample size at which `P(Y[n,n] <= y)` is reported (repeatable).
        #[arg(long = "n")]
        n: Vec<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the experiment in `--config`.
    Simulate,
}

fn parse_window(s: &str) -> Result<[u64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("window `{s}` is not of the form a,b"))?;
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("window `{s}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

fn apply(cfg: &mut ExperimentConfig, run: &RunArgs) {
    if let Some(h) = run.horizon {
        cfg.horizon = h;
    }
    if let Some(r) = run.reps {
        cfg.replications = r;
    }
    if !run.windows.is_empty() {
        cfg.windows = run.windows.clone();
    }
}

fn build(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.command {
        Command::Simulate => {
            let path = cli.config.as_ref().ok_or_else(|| HarnessError::Config("simulate requires --config".into()))?;
            ExperimentConfig::from_path(path)?
        }
        Command::ClassifySeries { family, declared, max_index } => {
            ExperimentConfig::new(Scenario::Series(SeriesScenario {
                family: *family,
                declared: *declared,
                max_index: *max_index,
            }))
        }
        Command::MarkovTail { q_power, q_scale, q_shift, p, p1, criteria, run } => {
            let m = MarkovChainScenario {
                p: Some(Rate::Constant { value: *p }),
                q: Some(Rate::InversePower { scale: *q_scale, shift: *q_shift, power: *q_power }),
                p1: *p1,
                table: None,
                safe_start: None,
                criteria: if criteria.is_empty() {
                    vec!["COND_PREV_COMPLEMENT".into(), "JOINT_COMPLEMENT_THEN".into()]
                } else {
                    criteria.clone()
                },
            };
            let mut cfg = ExperimentConfig::new(Scenario::MarkovChain(m));
            apply(&mut cfg, run);
            cfg
        }
        Command::FalphaMaxima { gamma, run } => {
            let mut cfg = ExperimentConfig::new(Scenario::FalphaMaxima(FalphaMaximaScenario::example41(*gamma)));
            apply(&mut cfg, run);
            cfg
        }
        Command::FalphaNewcomer { alpha_family, prop, run } => {
            let mut cfg = ExperimentConfig::new(Scenario::FalphaNewcomer(FalphaNewcomerScenario {
                base: Univariate::Uniform,
                exponents: alpha_family.clone(),
                proposition: prop.clone(),
                indices: vec![2, 3, 5, 10],
            }));
            apply(&mut cfg, run);
            cfg
        }
        Command::Concomitant { copula, lambda, y, n, run } => {
            let copula = Copula::from_name(copula, *lambda).map_err(HarnessError::Config)?;
            let mut cfg = ExperimentConfig::new(Scenario::Concomitant(ConcomitantScenario {
                copula,
                marginal_x: Univariate::Uniform,
                marginal_y: Univariate::Uniform,
                y_grid: y.clone(),
                n_values: if n.is_empty() { vec![1, 2, 5, 10] } else { n.clone() },
            }));
            apply(&mut cfg, run);
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(&cli).and_then(|cfg| {
        let result = run_replications(&cfg)?;
        emit(&result, cfg.format, cli.out.as_deref())
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bcmarkov: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
