//! `generate`, `semiconv` and `diagnose`. Every seed runs in its own
//! directory `OUT/seed_<seed>`; multi-seed aggregates go to `OUT`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use regdiag_core::bidiag::{lanczos_bidiag, orthogonality_history, ritz_values, BidiagState};
use regdiag_core::problems::{add_noise, gen_deriv2, gen_shaw, gen_synthetic, write_bundle, DecayModel, NoisyProblem, ProblemKind, SyntheticSpec};
use regdiag_core::solvers::{
    cgls_series, cgme_from_state, default_kmax, filter_matrix, lsmr_from_state, lsqr_from_state, semi_convergence,
    Method, SemiConvergenceFlag, SeriesEntry, SolutionSeries,
};
use regdiag_core::subspace::{diagnose, DiagnoseOptions, SubspaceDiagnostics};
use regdiag_core::svdtools::{compute_svd, picard_data, transition_index, tsvd_error_curve, SvdFactors, TransitionRule, TsvdCurve};
use regdiag_core::table::Table;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const SEMICONV_SUMMARY: &str = "semiconv_summary.json";
pub const DIAGNOSE_SUMMARY: &str = "diagnose_summary.json";
pub const SEMICONV_RUN: &str = "semiconv.json";
pub const DIAGNOSE_RUN: &str = "diagnose.json";

pub fn run_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Worker pool sized by `REGDIAG_THREADS` (rayon's default when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("REGDIAG_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => t,
            _ => return Err(CliError::Threads(format!("expected a positive integer, got {v:?}"))),
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))
}

/// Runs `f` for every seed on the pool; the first error in seed order wins.
fn per_seed<T: Send>(cfg: &ExperimentConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let pool = thread_pool()?;
    let results: Vec<Result<T>> = pool.install(|| cfg.problem.seeds.par_iter().map(|&s| f(s)).collect());
    results.into_iter().collect()
}

pub fn build_problem(cfg: &ExperimentConfig, seed: u64) -> Result<NoisyProblem> {
    let p = &cfg.problem;
    let base = match p.kind {
        ProblemKind::Synthetic => {
            let decay = p.decay.ok_or_else(|| CliError::Validation("synthetic problem without decay".into()))?;
            gen_synthetic(&SyntheticSpec { m: p.m, n: p.n, decay, beta: p.beta.unwrap_or(1.0), seed })?
        }
        ProblemKind::Shaw => gen_shaw(p.n)?,
        ProblemKind::Deriv2 => gen_deriv2(p.n)?,
    };
    Ok(add_noise(&base, p.epsilon, seed)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn geometric_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v.ln(), c + 1));
    (sum / count as f64).exp()
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    per_seed(cfg, |seed| {
        let np = build_problem(cfg, seed)?;
        write_bundle(&run_dir(&cfg.out, seed), &np.base, Some(&np))?;
        Ok(())
    })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub iterations: usize,
    pub kstar: usize,
    pub best_rel_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<SemiConvergenceFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiconvRun {
    pub seed: u64,
    pub epsilon: f64,
    pub eta: f64,
    pub kmax: usize,
    /// Noise-aware transition index.
    pub k0_transition: usize,
    pub k0_rule: TransitionRule,
    /// Argmin of the TSVD error curve over all truncation indices.
    pub k0_best_tsvd: usize,
    pub best_tsvd_rel_error: f64,
    pub methods: Vec<MethodSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kstar_lsqr_le_k0_best_tsvd: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_lsqr_over_best_tsvd: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiconvSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub runs: Vec<SemiconvRun>,
    /// Per method, over seeds.
    pub geometric_mean_best_rel_error: BTreeMap<String, f64>,
    pub geometric_mean_best_tsvd_rel_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_kstar_lsqr_le_k0_best_tsvd: Option<bool>,
}

fn series_table(entries: &[SeriesEntry]) -> Table {
    let mut t = Table::new(&["k", "rel_error", "residual_norm", "solution_norm"]);
    for e in entries {
        t.push(vec![e.k.into(), e.rel_error.into(), e.residual_norm.into(), e.solution_norm.into()]);
    }
    t
}

/// TSVD as an iterate series over `k = 1..=kmax`.
fn tsvd_series(svd: &SvdFactors, np: &NoisyProblem, curve: &TsvdCurve, kmax: usize) -> Result<SolutionSeries> {
    let c = svd.coefficients(&np.b);
    let n = svd.n();
    let mut normal_tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        normal_tail[i] = normal_tail[i + 1] + (svd.sigma[i] * c[i]).powi(2);
    }
    let mut norm2 = 0.0;
    let entries: Vec<SeriesEntry> = curve.points[..kmax]
        .iter()
        .map(|p| {
            norm2 += (c[p.k - 1] / svd.sigma[p.k - 1]).powi(2);
            SeriesEntry {
                k: p.k,
                rel_error: p.rel_error,
                residual_norm: p.residual_norm,
                solution_norm: f64::sqrt(norm2),
                normal_residual_norm: normal_tail[p.k].sqrt(),
            }
        })
        .collect();
    let kstar = regdiag_core::solvers::semi_convergence_of(&entries.iter().map(|e| e.rel_error).collect::<Vec<_>>())?.kstar;
    Ok(SolutionSeries { method: Method::Tsvd, entries, iterates: Vec::new(), kstar, breakdown: None })
}

fn write_bidiag_tables(dir: &Path, state: &BidiagState, sigma: &[f64], kmax: usize) -> Result<()> {
    let mut ritz = Table::new(&["k", "i", "theta_i_k"]);
    for k in 1..=state.k {
        for (i, theta) in ritz_values(state, k)?.into_iter().enumerate() {
            ritz.push(vec![k.into(), (i + 1).into(), theta.into()]);
        }
    }
    ritz.write(&dir.join("ritz.csv"))?;

    let mut diag = Table::new(&["k", "alpha_k", "beta_kplus1", "orth_defect_P", "orth_defect_Q"]);
    for (j, (dp, dq)) in orthogonality_history(state).into_iter().enumerate() {
        diag.push(vec![(j + 1).into(), state.alphas[j].into(), state.betas[j + 1].into(), dp.into(), dq.into()]);
    }
    diag.write(&dir.join("bidiag_diag.csv"))?;

    let mut filters = Table::new(&["k", "i", "f_i_k"]);
    for (k, row) in filter_matrix(state, sigma, kmax)?.into_iter().enumerate() {
        for (i, f) in row.into_iter().enumerate() {
            filters.push(vec![(k + 1).into(), (i + 1).into(), f.into()]);
        }
    }
    filters.write(&dir.join("filters.csv"))?;
    Ok(())
}

fn semiconv_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SemiconvRun> {
    let dir = run_dir(&cfg.out, seed);
    create_dir(&dir)?;
    let np = build_problem(cfg, seed)?;
    let n = np.base.n();
    let svd = compute_svd(&np.base.a)?;
    let sigma: Vec<f64> = svd.sigma.iter().copied().collect();

    let pic = picard_data(&svd, &np.b);
    let mut picard = Table::new(&["i", "sigma_i", "coeff_i", "ratio_i"]);
    for i in 0..n {
        picard.push(vec![(i + 1).into(), pic.sigma[i].into(), pic.coeff[i].into(), pic.ratio[i].into()]);
    }
    picard.write(&dir.join("picard.csv"))?;

    let curve = tsvd_error_curve(&svd, &np.b, &np.base.x_true, n)?;
    let mut tsvd = Table::new(&["k", "rel_error", "residual_norm"]);
    for p in &curve.points {
        tsvd.push(vec![p.k.into(), p.rel_error.into(), p.residual_norm.into()]);
    }
    tsvd.write(&dir.join("tsvd_curve.csv"))?;

    let transition = transition_index(&pic, np.eta)?;
    let kmax = cfg.kmax.unwrap_or_else(|| default_kmax(n, transition.k0).max(2).min(n - 1));
    let state = lanczos_bidiag(&np.base.a, &np.b, kmax, cfg.reorth)?;
    write_bidiag_tables(&dir, &state, &sigma, kmax)?;

    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut lsqr_best = None;
    for &method in &cfg.methods {
        let series = match method {
            Method::Lsqr => lsqr_from_state(&np, &state, kmax, 0)?,
            Method::Cgls => cgls_series(&np, kmax, 0)?,
            Method::Cgme => cgme_from_state(&np, &state, kmax, 0)?,
            Method::Lsmr => lsmr_from_state(&np, &state, kmax, 0)?,
            Method::Tsvd => tsvd_series(&svd, &np, &curve, kmax)?,
        };
        series_table(&series.entries).write(&dir.join(format!("series_{}.csv", method.as_str())))?;
        let sc = semi_convergence(&series)?;
        if method == Method::Lsqr {
            lsqr_best = Some((sc.kstar, sc.best_rel_error));
        }
        methods.push(MethodSummary {
            method,
            iterations: series.entries.len(),
            kstar: sc.kstar,
            best_rel_error: sc.best_rel_error,
            flag: sc.flag,
            breakdown: series.breakdown,
        });
    }

    let run = SemiconvRun {
        seed,
        epsilon: np.epsilon,
        eta: np.eta,
        kmax,
        k0_transition: transition.k0,
        k0_rule: transition.rule,
        k0_best_tsvd: curve.best_k,
        best_tsvd_rel_error: curve.best_rel_error,
        methods,
        kstar_lsqr_le_k0_best_tsvd: lsqr_best.map(|(kstar, _)| kstar <= curve.best_k),
        best_lsqr_over_best_tsvd: lsqr_best.map(|(_, err)| err / curve.best_rel_error),
    };
    write_json(&dir.join(SEMICONV_RUN), &run)?;
    Ok(run)
}

pub fn cmd_semiconv(cfg: &ExperimentConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let runs = per_seed(cfg, |seed| semiconv_seed(cfg, seed))?;
    let geometric_mean_best_rel_error = cfg
        .methods
        .iter()
        .map(|m| {
            let errs = runs.iter().flat_map(|r| r.methods.iter().filter(|s| s.method == *m).map(|s| s.best_rel_error));
            (m.as_str().to_string(), geometric_mean(errs))
        })
        .collect();
    let verdicts: Option<Vec<bool>> = runs.iter().map(|r| r.kstar_lsqr_le_k0_best_tsvd).collect();
    let summary = SemiconvSummary {
        config: cfg,
        geometric_mean_best_rel_error,
        geometric_mean_best_tsvd_rel_error: geometric_mean(runs.iter().map(|r| r.best_tsvd_rel_error)),
        all_kstar_lsqr_le_k0_best_tsvd: verdicts.map(|v| v.into_iter().all(|x| x)),
        runs,
    };
    write_json(&cfg.out.join(SEMICONV_SUMMARY), &summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseRun {
    pub seed: u64,
    pub model: DecayModel,
    pub delta: f64,
    pub diagnosable_kmax: usize,
    pub kmax: usize,
    pub geometric_mean_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Number of leading k for which `ε_k ≥ σ_{k+1}/σ_k` holds.
    pub large_cond_prefix: usize,
    /// First k with `θ_k^(k) < σ_{k+1}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_theta_below_sigma: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub runs: Vec<DiagnoseRun>,
    /// Over every diagnosed k of every seed.
    pub geometric_mean_ratio: f64,
}

fn write_diagnostics(dir: &Path, d: &SubspaceDiagnostics) -> Result<()> {
    let mut sintheta = Table::new(&["k", "sin_exact", "sin_estimate", "ratio", "tan_theta", "lagrange_max", "k1"]);
    let mut ritz = Table::new(&[
        "k",
        "eps_k",
        "sigma_ratio",
        "large_cond",
        "small_cond",
        "theta_k",
        "sigma_kplus1",
        "theta_gt_sigma",
    ]);
    let mut lagrange = Table::new(&["k", "j", "lagrange_j"]);
    for row in &d.per_k {
        sintheta.push(vec![
            row.k.into(),
            row.sin_theta_exact.into(),
            row.sin_theta_estimate.into(),
            row.ratio.into(),
            row.tan_theta.into(),
            row.lagrange.max().into(),
            row.lagrange.k1.into(),
        ]);
        let r = &row.ritz;
        ritz.push(vec![
            row.k.into(),
            r.epsilon.into(),
            r.sigma_ratio.into(),
            r.sufficient_large_holds.into(),
            r.sufficient_small_holds.into(),
            r.theta_k.into(),
            r.sigma_kplus1.into(),
            r.theta_exceeds_sigma.into(),
        ]);
        for (j, f) in row.lagrange.factors.iter().enumerate() {
            lagrange.push(vec![row.k.into(), (j + 1).into(), (*f).into()]);
        }
    }
    sintheta.write(&dir.join("sintheta.csv"))?;
    ritz.write(&dir.join("ritz_check.csv"))?;
    lagrange.write(&dir.join("lagrange.csv"))?;
    Ok(())
}

fn diagnose_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(DiagnoseRun, Vec<f64>)> {
    let dir = run_dir(&cfg.out, seed);
    create_dir(&dir)?;
    let np = build_problem(cfg, seed)?;
    let n = np.base.n();
    let svd = compute_svd(&np.base.a)?;
    let window = regdiag_core::subspace::diagnosable_kmax(svd.sigma.as_slice());
    let kmax = cfg.kmax.unwrap_or(n - 1).min(window).max(1);
    let state = lanczos_bidiag(&np.base.a, &np.b, kmax, cfg.reorth)?;
    let model = cfg.model.ok_or_else(|| CliError::Validation("diagnose needs an estimate model".into()))?;
    let d = diagnose(&svd, &np.b, &state, &DiagnoseOptions { kmax, delta: cfg.delta, model })?;
    write_diagnostics(&dir, &d)?;

    let ratios: Vec<f64> = d.per_k.iter().map(|r| r.ratio).collect();
    let run = DiagnoseRun {
        seed,
        model,
        delta: cfg.delta,
        diagnosable_kmax: d.diagnosable_kmax,
        kmax: d.per_k.len(),
        geometric_mean_ratio: geometric_mean(ratios.iter().copied()),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        large_cond_prefix: d.per_k.iter().take_while(|r| r.ritz.sufficient_large_holds).count(),
        first_theta_below_sigma: d.per_k.iter().find(|r| !r.ritz.theta_exceeds_sigma).map(|r| r.k),
    };
    write_json(&dir.join(DIAGNOSE_RUN), &run)?;
    Ok((run, ratios))
}

pub fn cmd_diagnose(cfg: &ExperimentConfig) -> Result<()> {
    create_dir(&cfg.out)?;
    let results = per_seed(cfg, |seed| diagnose_seed(cfg, seed))?;
    let geometric_mean_ratio = geometric_mean(results.iter().flat_map(|(_, r)| r.iter().copied()));
    let summary = DiagnoseSummary { config: cfg, runs: results.into_iter().map(|(run, _)| run).collect(), geometric_mean_ratio };
    write_json(&cfg.out.join(DIAGNOSE_SUMMARY), &summary)
}
