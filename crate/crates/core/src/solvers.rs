//! Krylov regularizing solvers built on one bidiagonalization.
//!
//! LSQR, CGME and LSMR all take their k-th iterate from `span(Q_k)`; they
//! differ only in the small projected problem solved with `B_k`:
//!
//! | method | projected problem                                   |
//! |--------|-----------------------------------------------------|
//! | LSQR   | `min ‖B_k y − β_1 e_1‖`                              |
//! | CGME   | `L_k z = β_1 e_1` (leading `k × k` block of `B_k`)   |
//! | LSMR   | `min ‖L_{k+1}ᵀ (β_1 e_1 − B_k y)‖` = `min ‖Aᵀ r_k‖`  |
//!
//! CGLS is the classical conjugate gradient recurrence on `AᵀA x = Aᵀb`; it
//! shares nothing with the other three and serves as an independent check
//! that LSQR and CGLS generate the same iterates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bidiag::{lanczos_bidiag, ritz_values, BidiagState, Reorth};
use crate::linalg::givens;
use crate::problems::NoisyProblem;
use crate::svdtools::SvdFactors;
use crate::{Error, Result};

/// Dense iterates are kept only up to this `k` by default.
pub const DEFAULT_ITERATE_CAP: usize = 64;

/// Clamp for a single filter-product factor.
const FACTOR_CLAMP: f64 = 1e300;
/// Gaps `|θ_j − σ_i|` below this many ulps of `σ_1` are treated as zero.
pub const GAP_RESOLUTION: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsqr,
    Cgls,
    Cgme,
    Lsmr,
    Tsvd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lsqr => "lsqr",
            Method::Cgls => "cgls",
            Method::Cgme => "cgme",
            Method::Lsmr => "lsmr",
            Method::Tsvd => "tsvd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lsqr" => Ok(Method::Lsqr),
            "cgls" => Ok(Method::Cgls),
            "cgme" => Ok(Method::Cgme),
            "lsmr" => Ok(Method::Lsmr),
            "tsvd" => Ok(Method::Tsvd),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEntry {
    pub k: usize,
    pub rel_error: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    /// `‖Aᵀ(b − A x_k)‖`.
    pub normal_residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SolutionSeries {
    pub method: Method,
    pub entries: Vec<SeriesEntry>,
    /// `x_1, x_2, …` up to the iterate cap.
    pub iterates: Vec<DVector<f64>>,
    /// Argmin of `rel_error` (ties toward smaller k).
    pub kstar: usize,
    /// Set when the series stopped early because the bidiagonalization broke down.
    pub breakdown: Option<usize>,
}

impl SolutionSeries {
    pub fn iterate(&self, k: usize) -> Option<&DVector<f64>> {
        self.iterates.get(k.checked_sub(1)?)
    }

    pub fn best_rel_error(&self) -> f64 {
        self.entries[self.kstar - 1].rel_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOptions {
    pub kmax: usize,
    pub reorth: Reorth,
    pub iterate_cap: usize,
}

impl SeriesOptions {
    pub fn new(kmax: usize) -> Self {
        SeriesOptions { kmax, reorth: Reorth::Full, iterate_cap: DEFAULT_ITERATE_CAP }
    }
}

/// `min(n − 1, 3·k0)`, at least 1.
pub fn default_kmax(n: usize, k0: usize) -> usize {
    (3 * k0).min(n - 1).max(1)
}

struct SeriesBuilder<'a> {
    problem: &'a NoisyProblem,
    xnorm: f64,
    cap: usize,
    entries: Vec<SeriesEntry>,
    iterates: Vec<DVector<f64>>,
}

impl<'a> SeriesBuilder<'a> {
    fn new(problem: &'a NoisyProblem, cap: usize) -> Result<Self> {
        let xnorm = problem.base.x_true.norm();
        if xnorm == 0.0 {
            return Err(Error::DegenerateTruth);
        }
        Ok(SeriesBuilder { problem, xnorm, cap, entries: Vec::new(), iterates: Vec::new() })
    }

    fn push(&mut self, x: DVector<f64>) {
        let a = &self.problem.base.a;
        let r = &self.problem.b - a * &x;
        let k = self.entries.len() + 1;
        self.entries.push(SeriesEntry {
            k,
            rel_error: (&x - &self.problem.base.x_true).norm() / self.xnorm,
            residual_norm: r.norm(),
            solution_norm: x.norm(),
            normal_residual_norm: a.tr_mul(&r).norm(),
        });
        if k <= self.cap {
            self.iterates.push(x);
        }
    }

    fn finish(self, method: Method, breakdown: Option<usize>) -> Result<SolutionSeries> {
        if self.entries.is_empty() {
            return Err(Error::SeriesTooShort(0));
        }
        let kstar = argmin_first(self.entries.iter().map(|e| e.rel_error));
        Ok(SolutionSeries { method, entries: self.entries, iterates: self.iterates, kstar, breakdown })
    }
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (1, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i + 1, v);
        }
    }
    best.0
}

fn check_kmax(problem: &NoisyProblem, kmax: usize) -> Result<()> {
    let n = problem.base.n();
    if kmax == 0 || kmax > n {
        return Err(Error::InvalidDimension(format!("kmax must be in 1..={n}, got {kmax}")));
    }
    Ok(())
}

/// Incremental QR of `B_k` by Givens rotations, as in LSQR.
struct ProjectedQr {
    rho: Vec<f64>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    rhobar: f64,
    phibar: f64,
}

impl ProjectedQr {
    fn new(alpha1: f64, beta1: f64) -> Self {
        ProjectedQr { rho: Vec::new(), theta: Vec::new(), phi: Vec::new(), rhobar: alpha1, phibar: beta1 }
    }

    /// Absorbs column `k` (needs `β_{k+1}` and, when available, `α_{k+1}`).
    fn step(&mut self, beta_next: f64, alpha_next: f64) {
        let (c, s, rho) = givens(self.rhobar, beta_next);
        self.rho.push(rho);
        self.phi.push(c * self.phibar);
        self.phibar *= s;
        self.theta.push(s * alpha_next);
        self.rhobar = -c * alpha_next;
    }

    /// Solves `R_k y = f_k`.
    fn solve(&self) -> DVector<f64> {
        let k = self.rho.len();
        let mut y = DVector::zeros(k);
        for i in (0..k).rev() {
            let mut t = self.phi[i];
            if i + 1 < k {
                t -= self.theta[i] * y[i + 1];
            }
            y[i] = t / self.rho[i];
        }
        y
    }
}

/// LSQR iterates `x_k = Q_k B_k† β_1 e_1` from an existing bidiagonalization.
pub fn lsqr_from_state(problem: &NoisyProblem, state: &BidiagState, kmax: usize, cap: usize) -> Result<SolutionSeries> {
    let kmax = kmax.min(state.k);
    let mut builder = SeriesBuilder::new(problem, cap)?;
    let mut qr = ProjectedQr::new(state.alphas[0], state.betas[0]);
    for k in 1..=kmax {
        qr.step(state.betas[k], state.alpha(k + 1));
        let y = qr.solve();
        builder.push(state.q.columns(0, k) * y);
    }
    builder.finish(Method::Lsqr, state.breakdown.filter(|&b| b <= kmax + 1))
}

pub fn lsqr_series(problem: &NoisyProblem, opts: SeriesOptions) -> Result<SolutionSeries> {
    check_kmax(problem, opts.kmax)?;
    let state = lanczos_bidiag(&problem.base.a, &problem.b, opts.kmax, opts.reorth)?;
    lsqr_from_state(problem, &state, opts.kmax, opts.iterate_cap)
}

/// CGME (Craig) iterates: `x_k = Q_k z` with `L_k z = β_1 e_1`.
pub fn cgme_from_state(problem: &NoisyProblem, state: &BidiagState, kmax: usize, cap: usize) -> Result<SolutionSeries> {
    let kmax = kmax.min(state.k);
    let mut builder = SeriesBuilder::new(problem, cap)?;
    let mut z: Vec<f64> = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let next = if k == 1 {
            state.betas[0] / state.alphas[0]
        } else {
            -state.betas[k - 1] * z[k - 2] / state.alphas[k - 1]
        };
        z.push(next);
        builder.push(state.q.columns(0, k) * DVector::from_column_slice(&z));
    }
    builder.finish(Method::Cgme, state.breakdown.filter(|&b| b <= kmax + 1))
}

pub fn cgme_series(problem: &NoisyProblem, opts: SeriesOptions) -> Result<SolutionSeries> {
    check_kmax(problem, opts.kmax)?;
    let state = lanczos_bidiag(&problem.base.a, &problem.b, opts.kmax, opts.reorth)?;
    cgme_from_state(problem, &state, opts.kmax, opts.iterate_cap)
}

/// LSMR iterates: the minimizer of `‖Aᵀ(b − A x)‖` over `span(Q_k)`.
///
/// With `B_k = Ĝ [R_k; 0]` the objective becomes
/// `‖L_{k+1}ᵀ Ĝ [f − R_k y; φ̄]‖`, a least-squares problem whose matrix has
/// the conditioning of `L_{k+1}` rather than of `B_kᵀB_k`.
pub fn lsmr_from_state(problem: &NoisyProblem, state: &BidiagState, kmax: usize, cap: usize) -> Result<SolutionSeries> {
    let kmax = kmax.min(state.k);
    let mut builder = SeriesBuilder::new(problem, cap)?;
    for k in 1..=kmax {
        let y = lsmr_projected(state, k);
        builder.push(state.q.columns(0, k) * y);
    }
    builder.finish(Method::Lsmr, state.breakdown.filter(|&b| b <= kmax + 1))
}

fn lsmr_projected(state: &BidiagState, k: usize) -> DVector<f64> {
    // Accumulate Ĝᵀ as the product of the QR reflections applied to I_{k+1}.
    let mut gt = DMatrix::<f64>::identity(k + 1, k + 1);
    let mut qr = ProjectedQr::new(state.alphas[0], state.betas[0]);
    let mut rhobar = state.alphas[0];
    for i in 0..k {
        let (c, s, _) = givens(rhobar, state.betas[i + 1]);
        rhobar = -c * state.alpha(i + 2);
        for col in 0..=k {
            let top = gt[(i, col)];
            let bot = gt[(i + 1, col)];
            gt[(i, col)] = c * top + s * bot;
            gt[(i + 1, col)] = s * top - c * bot;
        }
        qr.step(state.betas[i + 1], state.alpha(i + 2));
    }
    // L_{k+1}ᵀ: upper bidiagonal, α_1..α_{k+1} on the diagonal, β_2..β_{k+1} above.
    let lt = DMatrix::from_fn(k + 1, k + 1, |r, c| {
        if r == c {
            state.alpha(r + 1)
        } else if c == r + 1 {
            state.betas[c]
        } else {
            0.0
        }
    });
    let g = lt * gt.transpose();
    let g1 = g.columns(0, k).into_owned();
    // Ĝᵀ β_1 e_1 = [f; φ̄]
    let phibar = state.betas[0] * gt[(k, 0)];
    let rhs = -(g.column(k) * phibar);
    // t = f − R y minimizes ‖G_1 t + g_{k+1} φ̄‖
    let t = g1
        .svd(true, true)
        .solve(&rhs, 0.0)
        .unwrap_or_else(|_| DVector::zeros(k));
    let f = DVector::from_column_slice(&qr.phi);
    let w = f - t;
    // y = R⁻¹ w
    let mut y = DVector::zeros(k);
    for i in (0..k).rev() {
        let mut s = w[i];
        if i + 1 < k {
            s -= qr.theta[i] * y[i + 1];
        }
        y[i] = s / qr.rho[i];
    }
    y
}

pub fn lsmr_series(problem: &NoisyProblem, opts: SeriesOptions) -> Result<SolutionSeries> {
    check_kmax(problem, opts.kmax)?;
    let state = lanczos_bidiag(&problem.base.a, &problem.b, opts.kmax, opts.reorth)?;
    lsmr_from_state(problem, &state, opts.kmax, opts.iterate_cap)
}

/// Classical CGLS recurrence from `x_0 = 0`.
pub fn cgls_series(problem: &NoisyProblem, kmax: usize, cap: usize) -> Result<SolutionSeries> {
    check_kmax(problem, kmax)?;
    let a = &problem.base.a;
    let n = a.ncols();
    let mut builder = SeriesBuilder::new(problem, cap)?;
    let mut x = DVector::<f64>::zeros(n);
    let mut r = problem.b.clone();
    let mut s = a.tr_mul(&r);
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    if gamma == 0.0 {
        return Err(Error::DegenerateStart);
    }
    let mut breakdown = None;
    for k in 1..=kmax {
        let q = a * &p;
        let qq = q.norm_squared();
        if qq == 0.0 || gamma == 0.0 {
            breakdown = Some(k);
            break;
        }
        let step = gamma / qq;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &q, 1.0);
        s = a.tr_mul(&r);
        let gamma_next = s.norm_squared();
        p = &s + &p * (gamma_next / gamma);
        gamma = gamma_next;
        builder.push(x.clone());
    }
    builder.finish(Method::Cgls, breakdown)
}

/// Filter factors `f_i^(k) = 1 − Π_j (1 − σ_i²/θ_j²)` for every `σ_i`.
///
/// The product is accumulated in sign/log-magnitude form with each factor
/// clamped to `|·| ≤ 10^300`. A Ritz value within rounding distance of
/// `σ_i` (`|θ_j − σ_i| ≤ RESOLUTION·ε·σ_1`) contributes an exact zero.
pub fn filter_factors(ritz: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    if ritz.is_empty() || ritz.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidSpectrum);
    }
    let max_log = f64::MAX.ln();
    let scale = sigma.iter().chain(ritz).fold(0.0f64, |m, v| m.max(v.abs()));
    let resolution = GAP_RESOLUTION * f64::EPSILON * scale;
    Ok(sigma
        .iter()
        .map(|&s| {
            let mut log_mag = 0.0;
            let mut negative = false;
            for &t in ritz {
                let gap = t - s;
                if gap.abs() <= resolution {
                    return 1.0;
                }
                let factor = (gap * (t + s)) / (t * t);
                if factor == 0.0 {
                    return 1.0;
                }
                let factor = factor.clamp(-FACTOR_CLAMP, FACTOR_CLAMP);
                log_mag += factor.abs().ln();
                negative ^= factor < 0.0;
            }
            let mag = log_mag.min(max_log).exp();
            let prod = if negative { -mag } else { mag };
            let f = 1.0 - prod;
            if f.is_finite() { f } else { f64::MAX.copysign(f) }
        })
        .collect())
}

/// Rows `f^(k)` for `k = 1..=kmax` from a bidiagonalization.
pub fn filter_matrix(state: &BidiagState, sigma: &[f64], kmax: usize) -> Result<Vec<Vec<f64>>> {
    (1..=kmax.min(state.k)).map(|k| filter_factors(&ritz_values(state, k)?, sigma)).collect()
}

/// `Σ_i f_i (u_iᵀb/σ_i) v_i`.
pub fn filtered_expansion(svd: &SvdFactors, b: &DVector<f64>, filters: &[f64]) -> DVector<f64> {
    let c = svd.coefficients(b);
    let mut x = DVector::zeros(svd.n());
    for i in 0..svd.n() {
        if filters[i] != 0.0 {
            x.axpy(filters[i] * c[i] / svd.sigma[i], &svd.v.column(i), 1.0);
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemiConvergenceFlag {
    NoSemiConvergenceWithinKmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiConvergence {
    pub kstar: usize,
    pub best_rel_error: f64,
    pub flag: Option<SemiConvergenceFlag>,
}

/// Global argmin of the relative error; a minimum at the last computed `k`
/// is flagged since the error may still be decreasing.
pub fn semi_convergence_of(rel_errors: &[f64]) -> Result<SemiConvergence> {
    if rel_errors.len() < 2 {
        return Err(Error::SeriesTooShort(rel_errors.len()));
    }
    let kstar = argmin_first(rel_errors.iter().copied());
    let flag = (kstar == rel_errors.len()).then_some(SemiConvergenceFlag::NoSemiConvergenceWithinKmax);
    Ok(SemiConvergence { kstar, best_rel_error: rel_errors[kstar - 1], flag })
}

pub fn semi_convergence(series: &SolutionSeries) -> Result<SemiConvergence> {
    let errs: Vec<f64> = series.entries.iter().map(|e| e.rel_error).collect();
    semi_convergence_of(&errs)
}
