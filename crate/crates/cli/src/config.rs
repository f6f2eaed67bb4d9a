//! Command line arguments and the validated [`RunConfig`] they produce.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsdlab_core::model::ModelFamily;
use qsdlab_core::simulate::SurvivalFit;
use qsdlab_core::spectral::DecayMethod;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qsdlab", version, about = "Decay parameters, lambda-classification and quasi-stationary distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Decay parameter, classification and the QSD when one exists.
    Compute(CommonArgs),
    /// Decay parameter and lambda-recurrence classification.
    Classify(CommonArgs),
    /// Hitting probabilities and the moment bound at the anchor state.
    Bound(CommonArgs),
    /// Monte Carlo estimates: lambda_0, the Yaglom law and holding times.
    Simulate(SimulateArgs),
    /// Residual report for a supplied distribution and lambda.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    FeedbackChain,
    BdLine,
    BdHalfline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bisection,
    Eigen,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    Exponential,
    PowerLaw,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Triplet file or JSON manifest.
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Truncation level; required for families.
    #[arg(long)]
    pub trunc: Option<usize>,
    /// Tolerance for lambda.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub series_tol: f64,
    /// Largest accepted `‖uQ + λu‖_∞ / max q_i`.
    #[arg(long, default_value_t = 1e-8)]
    pub residual_gate: f64,
    #[arg(long, value_enum, default_value = "bisection")]
    pub method: MethodArg,
    /// Anchor state, by label.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<i64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    /// Record wall-clock time in the document (breaks byte reproducibility).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Observation time for the conditional law; defaults to the horizon.
    #[arg(long)]
    pub t: Option<f64>,
    /// Simulation horizon; defaults to `--t`, else 10.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum, default_value = "exponential")]
    pub fit: FitArg,
    /// Distribution to test for invariance (see `verify --u`).
    #[arg(long)]
    pub u: Option<PathBuf>,
    /// Writes a `path_id,time,state` trace of the first `--trace-paths` paths.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trace_paths: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Distribution over the model states: a JSON array, a result document
    /// with `outputs.qsd.u`, or numbers separated by whitespace or commas.
    #[arg(long)]
    pub u: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Compute,
    Classify,
    Bound,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSource {
    File { path: PathBuf },
    Family { family: ModelFamily },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub seed: u64,
    pub paths: usize,
    pub t: f64,
    pub horizon: f64,
    pub fit: SurvivalFit,
    pub u: Option<PathBuf>,
}

/// Everything that determines a run's outputs. Worker count and output
/// destinations are not echoed into documents, so results stay
/// byte-identical across them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub source: ModelSource,
    pub trunc: Option<usize>,
    pub tol: f64,
    pub series_tol: f64,
    pub residual_gate: f64,
    pub method: DecayMethod,
    pub anchor: Option<i64>,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySettings>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub timing: bool,
    #[serde(skip)]
    pub trace: Option<(PathBuf, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub u: PathBuf,
    pub lambda: f64,
}

fn need(name: &str, value: Option<f64>, family: FamilyName) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::bad_parameters(format!("--{name} is required for {}", family_label(family))))
}

fn family_label(f: FamilyName) -> &'static str {
    match f {
        FamilyName::FeedbackChain => "feedback-chain",
        FamilyName::BdLine => "bd-line",
        FamilyName::BdHalfline => "bd-halfline",
    }
}

impl CommonArgs {
    fn source(&self) -> Result<ModelSource, CliError> {
        if let Some(path) = &self.model {
            if self.p.or(self.r).or(self.w).or(self.c).is_some() {
                return Err(CliError::bad_parameters("family parameters given together with --model".into()));
            }
            return Ok(ModelSource::File { path: path.clone() });
        }
        let f = self.family.ok_or_else(|| CliError::bad_parameters("one of --model or --family is required".into()))?;
        if self.trunc.is_none() {
            return Err(CliError::bad_parameters("--trunc is required with --family".into()));
        }
        let family = match f {
            FamilyName::FeedbackChain => {
                if self.c.is_some() {
                    return Err(CliError::bad_parameters("--c does not apply to feedback-chain".into()));
                }
                ModelFamily::FeedbackChain { p: need("p", self.p, f)?, r: need("r", self.r, f)?, w: need("w", self.w, f)? }
            }
            FamilyName::BdLine | FamilyName::BdHalfline => {
                if self.r.or(self.w).is_some() {
                    return Err(CliError::bad_parameters(format!("--r and --w do not apply to {}", family_label(f))));
                }
                let (p, c) = (need("p", self.p, f)?, need("c", self.c, f)?);
                if f == FamilyName::BdLine {
                    ModelFamily::BdLine { p, c }
                } else {
                    ModelFamily::BdHalfline { p, c }
                }
            }
        };
        family.validate()?;
        Ok(ModelSource::Family { family })
    }

    fn config(&self, command: Command) -> Result<RunConfig, CliError> {
        for (name, v) in [("tol", self.tol), ("series-tol", self.series_tol), ("residual-gate", self.residual_gate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::bad_parameters(format!("--{name} must be positive, got {v}")));
            }
        }
        if self.workers == 0 {
            return Err(CliError::bad_parameters("--workers must be at least 1".into()));
        }
        Ok(RunConfig {
            command,
            source: self.source()?,
            trunc: self.trunc,
            tol: self.tol,
            series_tol: self.series_tol,
            residual_gate: self.residual_gate,
            method: match self.method {
                MethodArg::Bisection => DecayMethod::BisectionOnR,
                MethodArg::Eigen => DecayMethod::FiniteEigen,
                MethodArg::ClosedForm => DecayMethod::ClosedForm,
            },
            anchor: self.k,
            format: self.format,
            simulation: None,
            verify: None,
            workers: self.workers,
            out: self.out.clone(),
            timing: self.timing,
            trace: None,
        })
    }
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        match self.command {
            CommandArgs::Compute(a) => a.config(Command::Compute),
            CommandArgs::Classify(a) => a.config(Command::Classify),
            CommandArgs::Bound(a) => a.config(Command::Bound),
            CommandArgs::Simulate(s) => {
                let mut cfg = s.common.config(Command::Simulate)?;
                let horizon = s.horizon.or(s.t).unwrap_or(10.0);
                let t = s.t.unwrap_or(horizon);
                if !(t > 0.0 && t <= horizon && horizon.is_finite()) {
                    return Err(CliError::bad_parameters(format!("need 0 < t <= horizon < inf, got t={t}, horizon={horizon}")));
                }
                cfg.simulation = Some(SimulationSettings {
                    seed: s.seed,
                    paths: s.paths,
                    t,
                    horizon,
                    fit: match s.fit {
                        FitArg::Exponential => SurvivalFit::Exponential,
                        FitArg::PowerLaw => SurvivalFit::ExponentialPowerLaw,
                    },
                    u: s.u,
                });
                cfg.trace = s.trace.map(|p| (p, s.trace_paths));
                Ok(cfg)
            }
            CommandArgs::Verify(v) => {
                let mut cfg = v.common.config(Command::Verify)?;
                cfg.verify = Some(VerifySettings { u: v.u, lambda: v.lambda });
                Ok(cfg)
            }
        }
    }
}
