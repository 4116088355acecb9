//! Command-line arguments and the validated experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regdiag_core::bidiag::Reorth;
use regdiag_core::problems::{DecayModel, ProblemKind};
use regdiag_core::solvers::Method;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "regdiag", version, about = "Krylov regularization experiments and subspace diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one noisy problem bundle per seed.
    Generate(ProblemArgs),
    /// Solver error series, TSVD curve, Picard data and a semi-convergence summary.
    Semiconv(SemiconvArgs),
    /// Krylov/singular subspace distances, Lagrange factors and Ritz-value conditions.
    Diagnose(DiagnoseArgs),
    /// Merge the tables of a run directory into `report.json`.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Synthetic,
    Shaw,
    Deriv2,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Synthetic => ProblemKind::Synthetic,
            KindArg::Shaw => ProblemKind::Shaw,
            KindArg::Deriv2 => ProblemKind::Deriv2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReorthArg {
    None,
    Full,
}

impl From<ReorthArg> for Reorth {
    fn from(r: ReorthArg) -> Self {
        match r {
            ReorthArg::None => Reorth::None,
            ReorthArg::Full => Reorth::Full,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Row count; synthetic problems only (defaults to n).
    #[arg(long)]
    pub m: Option<usize>,
    /// `geometric:RHO` or `power:ZETA:ALPHA`.
    #[arg(long, value_parser = parse_decay)]
    pub decay: Option<DecayModel>,
    /// Picard exponent of the synthetic right-hand side.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Relative noise level ‖e‖/‖b_true‖.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Repeatable; each seed gets its own run directory.
    #[arg(long = "seed", default_values_t = [0u64])]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SemiconvArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Iteration count; defaults to min(n-1, 3*k0).
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReorthArg::Full)]
    pub reorth: ReorthArg,
    /// Comma-separated subset of lsqr,cgls,cgme,lsmr,tsvd.
    #[arg(long, default_value = "lsqr")]
    pub methods: String,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Largest k to diagnose; always capped by the σ_1/σ_k < 1e12 window.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Slack in the small-angle Ritz condition.
    #[arg(long, default_value_t = regdiag_core::subspace::DEFAULT_DELTA)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory written by semiconv/diagnose.
    #[arg(long)]
    pub out: PathBuf,
}

/// `geometric:RHO` or `power:ZETA:ALPHA`. Parameter ranges are checked later.
pub fn parse_decay(s: &str) -> std::result::Result<DecayModel, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| f64::from_str(t.trim()).map_err(|_| format!("not a number: {t:?}"));
    match parts.as_slice() {
        ["geometric", rho] => Ok(DecayModel::Geometric { rho: num(rho)? }),
        ["power", zeta, alpha] => Ok(DecayModel::PowerLaw { zeta: num(zeta)?, alpha: num(alpha)? }),
        _ => Err(format!("expected geometric:RHO or power:ZETA:ALPHA, got {s:?}")),
    }
}

/// Comma-separated method list, duplicates dropped, order kept.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for name in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m = Method::from_str(name).map_err(|e| CliError::Validation(e.to_string()))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Validation("methods list is empty".into()));
    }
    Ok(methods)
}

/// Problem part of a validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    pub reorth: Reorth,
    pub methods: Vec<Method>,
    pub delta: f64,
    /// Decay model behind the closed-form estimates (diagnose only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<DecayModel>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl ProblemConfig {
    /// `allow_model_decay`: a `--decay` on shaw/deriv2 names the estimate model
    /// instead of a generator parameter.
    fn from_args(a: &ProblemArgs, allow_model_decay: bool) -> Result<Self> {
        let kind = ProblemKind::from(a.kind);
        let invalid = |msg: String| Err(CliError::Validation(msg));
        if a.n < 2 {
            return invalid(format!("--n must be at least 2, got {}", a.n));
        }
        if !(a.eps > 0.0 && a.eps < 1.0) {
            return invalid(format!("--eps must lie in (0, 1), got {}", a.eps));
        }
        if let Some(d) = &a.decay {
            d.validate()?;
        }
        let mut seeds = Vec::new();
        for s in &a.seeds {
            if !seeds.contains(s) {
                seeds.push(*s);
            }
        }
        match kind {
            ProblemKind::Synthetic => {
                let Some(decay) = a.decay else {
                    return invalid("--kind synthetic requires --decay".into());
                };
                let m = a.m.unwrap_or(a.n);
                if m < a.n {
                    return invalid(format!("--m must be at least --n, got m = {m}, n = {}", a.n));
                }
                if !(a.beta.is_finite() && a.beta > 0.0) {
                    return invalid(format!("--beta must be positive, got {}", a.beta));
                }
                Ok(ProblemConfig { kind, m, n: a.n, decay: Some(decay), beta: Some(a.beta), epsilon: a.eps, seeds })
            }
            ProblemKind::Shaw | ProblemKind::Deriv2 => {
                if a.m.is_some_and(|m| m != a.n) {
                    return invalid(format!("--kind {} is square, --m must equal --n", kind.as_str()));
                }
                if a.decay.is_some() && !allow_model_decay {
                    return invalid(format!("--decay does not apply to --kind {}", kind.as_str()));
                }
                Ok(ProblemConfig { kind, m: a.n, n: a.n, decay: None, beta: None, epsilon: a.eps, seeds })
            }
        }
    }
}

impl ExperimentConfig {
    pub fn for_generate(a: &ProblemArgs) -> Result<Self> {
        Ok(ExperimentConfig {
            problem: ProblemConfig::from_args(a, false)?,
            kmax: None,
            reorth: Reorth::Full,
            methods: Vec::new(),
            delta: regdiag_core::subspace::DEFAULT_DELTA,
            model: None,
            out: a.out.clone(),
        })
    }

    pub fn for_semiconv(a: &SemiconvArgs) -> Result<Self> {
        let problem = ProblemConfig::from_args(&a.problem, false)?;
        check_kmax(a.kmax, problem.n)?;
        if a.kmax == Some(1) {
            return Err(CliError::Validation("--kmax must be at least 2 to locate semi-convergence".into()));
        }
        Ok(ExperimentConfig {
            problem,
            kmax: a.kmax,
            reorth: a.reorth.into(),
            methods: parse_methods(&a.methods)?,
            delta: regdiag_core::subspace::DEFAULT_DELTA,
            model: None,
            out: a.problem.out.clone(),
        })
    }

    pub fn for_diagnose(a: &DiagnoseArgs) -> Result<Self> {
        let problem = ProblemConfig::from_args(&a.problem, true)?;
        check_kmax(a.kmax, problem.n)?;
        if !(a.delta.is_finite() && a.delta > 0.0) {
            return Err(CliError::Validation(format!("--delta must be positive, got {}", a.delta)));
        }
        let model = a.problem.decay.unwrap_or(default_model(problem.kind));
        Ok(ExperimentConfig {
            problem,
            kmax: a.kmax,
            reorth: Reorth::Full,
            methods: Vec::new(),
            delta: a.delta,
            model: Some(model),
            out: a.problem.out.clone(),
        })
    }
}

/// Estimate model for the quadrature problems when none is given: `shaw`
/// decays geometrically, `deriv2` like `k^{-2}`.
pub fn default_model(kind: ProblemKind) -> DecayModel {
    match kind {
        ProblemKind::Deriv2 => DecayModel::PowerLaw { zeta: 1.0, alpha: 2.0 },
        _ => DecayModel::Geometric { rho: 2f64.exp() },
    }
}

fn check_kmax(kmax: Option<usize>, n: usize) -> Result<()> {
    match kmax {
        Some(k) if k == 0 || k >= n => {
            Err(CliError::Validation(format!("--kmax must lie in [1, n-1] = [1, {}], got {k}", n - 1)))
        }
        _ => Ok(()),
    }
}
