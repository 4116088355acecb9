//! Distance between the Krylov subspace `K_k(AᵀA, Aᵀb)` and the dominant
//! right singular subspace `span{v_1, …, v_k}`, with closed-form estimates
//! of that distance and the Ritz-value conditions derived from it.
//!
//! The angle is always measured from orthonormal bases. The matrix whose
//! norm equals `tan Θ` is never formed explicitly since it involves the
//! inverse of a Vandermonde matrix in the `σ_i²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bidiag::{ritz_values, BidiagState};
use crate::linalg::orthogonality_defect;
use crate::problems::DecayModel;
use crate::svdtools::SvdFactors;
use crate::{Error, Result};

/// Diagnostics stop once `σ_1/σ_k` reaches this value.
pub const DIAGNOSABLE_RANGE: f64 = 1e12;
/// Default `δ` of the small-angle Ritz condition.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Largest tolerated `‖QᵀQ − I‖`.
pub const BASIS_TOL: f64 = 1e-10;
/// Explicit Krylov columns whose orthogonal remainder falls below this are rank deficient.
pub const KRYLOV_RANK_TOL: f64 = 1e-13;

fn check_basis(svd: &SvdFactors, q: &DMatrix<f64>) -> Result<usize> {
    let n = svd.n();
    let k = q.ncols();
    if q.nrows() != n {
        return Err(Error::InvalidDimension(format!("basis has {} rows, expected {n}", q.nrows())));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidTruncation { k, n });
    }
    let defect = orthogonality_defect(q);
    if defect > BASIS_TOL {
        return Err(Error::InvalidBasis(defect));
    }
    Ok(k)
}

/// Sine of the largest principal angle between `span(Q)` and `span{v_1..v_k}`.
pub fn sin_theta_exact(svd: &SvdFactors, q: &DMatrix<f64>) -> Result<f64> {
    let k = check_basis(svd, q)?;
    let n = svd.n();
    let cross = svd.v.columns(k, n - k).tr_mul(q);
    let s = cross.singular_values().max();
    Ok(s.clamp(0.0, 1.0))
}

/// Cosine of the same angle, `σ_min(V_kᵀ Q)`.
///
/// Computed directly rather than as `√(1 − sin²)`, which loses all
/// accuracy once the sine is close to one.
pub fn epsilon_complement(svd: &SvdFactors, q: &DMatrix<f64>) -> Result<f64> {
    let k = check_basis(svd, q)?;
    let gram = svd.v.columns(0, k).tr_mul(q);
    Ok(gram.singular_values().min().clamp(0.0, 1.0))
}

/// `tan Θ = s/√(1 − s²)`; infinite at `s = 1`.
pub fn delta_norm_from_sin(sin_theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&sin_theta) {
        return Err(Error::Domain(sin_theta));
    }
    if sin_theta == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sin_theta / ((1.0 - sin_theta) * (1.0 + sin_theta)).sqrt())
}

/// `Δ/√(1 + Δ²)`; one at infinity.
pub fn sin_from_delta_norm(delta: f64) -> f64 {
    if delta.is_infinite() {
        1.0
    } else if delta > 1.0 {
        1.0 / (1.0 + (1.0 / delta).powi(2)).sqrt()
    } else {
        delta / (1.0 + delta * delta).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeFactors {
    /// `|L_j^(k)(0)|` for `j = 1..=k`.
    pub factors: Vec<f64>,
    /// 1-based argmax; ties go to the larger index.
    pub k1: usize,
}

impl LagrangeFactors {
    pub fn max(&self) -> f64 {
        self.factors[self.k1 - 1]
    }
}

/// `|L_j^(k)(0)| = Π_{i≠j} σ_i²/|σ_j² − σ_i²|` over the first `k` singular
/// values, each accumulated as a sum of logarithms.
pub fn lagrange_factors(sigma: &[f64], k: usize) -> Result<LagrangeFactors> {
    if k == 0 || k > sigma.len() {
        return Err(Error::InvalidTruncation { k, n: sigma.len() });
    }
    let s = &sigma[..k];
    if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSpectrum);
    }
    let mut factors = Vec::with_capacity(k);
    for j in 0..k {
        let mut log = 0.0;
        for i in 0..k {
            if i == j {
                continue;
            }
            let gap = (s[j] - s[i]).abs();
            if gap == 0.0 {
                return Err(Error::ZeroGap { i: i + 1, j: j + 1 });
            }
            log += 2.0 * s[i].ln() - gap.ln() - (s[j] + s[i]).ln();
        }
        factors.push(log.exp());
    }
    let mut k1 = 1;
    for (j, f) in factors.iter().enumerate() {
        if *f >= factors[k1 - 1] {
            k1 = j + 1;
        }
    }
    Ok(LagrangeFactors { factors, k1 })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(Error::InvalidDecay(format!("geometric decay needs rho > 1, got {rho}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(Error::InvalidDecay(format!("power-law decay needs alpha > 1/2, got {alpha}")));
    }
    Ok(())
}

/// Estimate of `tan Θ_k` for geometric decay `σ_j ~ ρ^{-j}`:
/// `(σ_{k+1}/σ_k)·ratio·(1 + 2ρ⁻²)` at `k = 1`, `(1 + 3ρ⁻²)` in place of
/// `(1 + 2ρ⁻²)` afterwards.
pub fn estimate_delta_severe(sigma: &[f64], coeff_ratio: f64, rho: f64, k: usize) -> Result<f64> {
    check_rho(rho)?;
    if k == 0 || k >= sigma.len() {
        return Err(Error::InvalidTruncation { k, n: sigma.len() });
    }
    let r2 = rho.powi(-2);
    let factor = if k == 1 { 1.0 + 2.0 * r2 } else { 1.0 + 3.0 * r2 };
    Ok(sigma[k] / sigma[k - 1] * coeff_ratio * factor)
}

/// Estimate of `tan Θ_k` for power-law decay `σ_j = ζ j^{-α}`.
///
/// `k = 1`: `ratio·√(1/(2α − 1))`.
/// `k ≥ 2`: `ratio·√(k²/(4α² − 1) + k/(2α − 1))·max_j |L_j^(k)(0)|`.
pub fn estimate_delta_moderate(coeff_ratio: f64, alpha: f64, k: usize, lagrange_max: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k == 1 {
        return Ok(coeff_ratio * (1.0 / (2.0 * alpha - 1.0)).sqrt());
    }
    let kf = k as f64;
    let growth = (kf * kf / (4.0 * alpha * alpha - 1.0) + kf / (2.0 * alpha - 1.0)).sqrt();
    Ok(coeff_ratio * growth * lagrange_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SevereLagrangeEstimate {
    pub max_estimate: f64,
    /// `(1 + 3ρ⁻²)·ρ^{-(k−j)(k−j+1)}` for `j = 1..=k`.
    pub per_j: Vec<f64>,
}

pub fn estimate_lagrange_severe(rho: f64, k: usize) -> Result<SevereLagrangeEstimate> {
    check_rho(rho)?;
    let max_estimate = 1.0 + 3.0 * rho.powi(-2);
    let per_j = (1..=k)
        .map(|j| {
            let d = (k - j) as f64;
            max_estimate * (-(d * (d + 1.0)) * rho.ln()).exp()
        })
        .collect();
    Ok(SevereLagrangeEstimate { max_estimate, per_j })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModerateLagrangeEstimate {
    /// `1 + k/(2α + 1)`.
    pub upper: f64,
    /// `k/(2α + 1)`.
    pub lower: f64,
    /// The lower bound only applies once `k ≥ 2α + 1`.
    pub lower_active: bool,
}

pub fn estimate_lagrange_moderate(alpha: f64, k: usize) -> Result<ModerateLagrangeEstimate> {
    check_alpha(alpha)?;
    let kf = k as f64;
    let lower = kf / (2.0 * alpha + 1.0);
    Ok(ModerateLagrangeEstimate { upper: 1.0 + lower, lower, lower_active: kf >= 2.0 * alpha + 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RitzConditionReport {
    pub k: usize,
    /// `ε_k = cos Θ_k`.
    pub epsilon: f64,
    /// `σ_{k+1}/σ_k`.
    pub sigma_ratio: f64,
    /// `ε_k ≥ σ_{k+1}/σ_k`.
    pub sufficient_large_holds: bool,
    pub delta_for_small: f64,
    /// `δ/((σ_1/σ_{k+1})² − 1)`.
    pub small_threshold: f64,
    /// `ε_k² ≤ small_threshold`.
    pub sufficient_small_holds: bool,
    /// `ε_k²σ_k² + (1 − ε_k²)σ_n²`.
    pub rayleigh_lower: f64,
    /// `ε_k²σ_1² + (1 − ε_k²)σ_{k+1}²`.
    pub rayleigh_upper: f64,
    pub theta_k: f64,
    pub sigma_kplus1: f64,
    pub theta_exceeds_sigma: bool,
}

/// Evaluates both sufficient conditions on `θ_k^(k)` for a given angle.
pub fn ritz_condition_check(
    sigma: &[f64],
    sin_theta: f64,
    theta_k: f64,
    k: usize,
    delta: f64,
) -> Result<RitzConditionReport> {
    if !(0.0..=1.0).contains(&sin_theta) {
        return Err(Error::Domain(sin_theta));
    }
    let eps = ((1.0 - sin_theta) * (1.0 + sin_theta)).sqrt();
    ritz_condition_from_complement(sigma, eps, theta_k, k, delta)
}

/// As [`ritz_condition_check`], from `ε_k` directly.
pub fn ritz_condition_from_complement(
    sigma: &[f64],
    epsilon: f64,
    theta_k: f64,
    k: usize,
    delta: f64,
) -> Result<RitzConditionReport> {
    let n = sigma.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidTruncation { k, n });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(epsilon));
    }
    if epsilon == 0.0 {
        return Err(Error::DegenerateAngle);
    }
    let (s1, sk, sk1, sn) = (sigma[0], sigma[k - 1], sigma[k], sigma[n - 1]);
    let e2 = epsilon * epsilon;
    let sigma_ratio = sk1 / sk;
    let small_threshold = delta / ((s1 / sk1).powi(2) - 1.0);
    Ok(RitzConditionReport {
        k,
        epsilon,
        sigma_ratio,
        sufficient_large_holds: epsilon >= sigma_ratio,
        delta_for_small: delta,
        small_threshold,
        sufficient_small_holds: e2 <= small_threshold,
        rayleigh_lower: e2 * sk * sk + (1.0 - e2) * sn * sn,
        rayleigh_upper: e2 * s1 * s1 + (1.0 - e2) * sk1 * sk1,
        theta_k,
        sigma_kplus1: sk1,
        theta_exceeds_sigma: theta_k > sk1,
    })
}

#[derive(Debug, Clone)]
pub struct ExplicitKrylov {
    pub basis: DMatrix<f64>,
    /// Smallest orthogonal remainder of a normalized power column.
    pub min_relative_residual: f64,
}

impl ExplicitKrylov {
    /// Remainders this small mean the basis is already losing digits.
    pub fn is_ill_conditioned(&self) -> bool {
        self.min_relative_residual < 1e-8
    }
}

/// Orthonormal basis of `span{Aᵀb, (AᵀA)Aᵀb, …}` from explicit powers.
///
/// Only meaningful at small `k`; the power columns become numerically
/// dependent quickly.
pub fn explicit_krylov_basis(a: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> Result<ExplicitKrylov> {
    let n = a.ncols();
    if b.len() != a.nrows() {
        return Err(Error::InvalidDimension(format!("b has length {}, expected {}", b.len(), a.nrows())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidTruncation { k, n });
    }
    let mut basis = DMatrix::<f64>::zeros(n, k);
    let mut power = a.tr_mul(b);
    let mut min_res = f64::INFINITY;
    for j in 0..k {
        if j > 0 {
            power = a.tr_mul(&(a * &power));
        }
        let norm = power.norm();
        if norm == 0.0 {
            return Err(Error::RankDeficientKrylov { column: j + 1, residual: 0.0 });
        }
        power /= norm;
        let mut w = power.clone();
        for _ in 0..2 {
            for i in 0..j {
                let qi = basis.column(i);
                let c = qi.dot(&w);
                w.axpy(-c, &qi, 1.0);
            }
        }
        let res = w.norm();
        if res < KRYLOV_RANK_TOL {
            return Err(Error::RankDeficientKrylov { column: j + 1, residual: res });
        }
        min_res = min_res.min(res);
        basis.set_column(j, &(w / res));
    }
    Ok(ExplicitKrylov { basis, min_relative_residual: min_res })
}

/// Decay model used to pick the estimate family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub kmax: usize,
    pub delta: f64,
    pub model: DecayModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostics {
    pub k: usize,
    pub sin_theta_exact: f64,
    pub tan_theta: f64,
    pub delta_estimate: f64,
    pub sin_theta_estimate: f64,
    /// `sin_theta_estimate / sin_theta_exact`.
    pub ratio: f64,
    pub coeff_ratio: f64,
    pub lagrange: LagrangeFactors,
    pub epsilon_complement: f64,
    pub ritz: RitzConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceDiagnostics {
    pub per_k: Vec<KDiagnostics>,
    /// Largest `k` with `σ_1/σ_k` inside [`DIAGNOSABLE_RANGE`].
    pub diagnosable_kmax: usize,
}

/// Largest `k ≤ n − 1` with `σ_1/σ_k < 10^12`.
pub fn diagnosable_kmax(sigma: &[f64]) -> usize {
    let n = sigma.len();
    (1..n).take_while(|&k| sigma[0] / sigma[k - 1] < DIAGNOSABLE_RANGE).last().unwrap_or(0)
}

/// Per-k diagnostics from the SVD oracle and a reorthogonalized bidiagonalization.
pub fn diagnose(
    svd: &SvdFactors,
    b: &DVector<f64>,
    state: &BidiagState,
    opts: &DiagnoseOptions,
) -> Result<SubspaceDiagnostics> {
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {}", opts.delta)));
    }
    match opts.model {
        DecayModel::Geometric { rho } => check_rho(rho)?,
        DecayModel::PowerLaw { alpha, .. } => check_alpha(alpha)?,
    }
    let sigma: Vec<f64> = svd.sigma.iter().copied().collect();
    let coeff = svd.coefficients(b);
    let window = diagnosable_kmax(&sigma);
    let kmax = opts.kmax.min(state.k).min(window);
    let mut per_k = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let q = state.q.columns(0, k).into_owned();
        let sin = sin_theta_exact(svd, &q)?;
        let eps = epsilon_complement(svd, &q)?;
        let tan = if eps == 0.0 { f64::INFINITY } else { sin / eps };
        let coeff_ratio = coeff[k].abs() / coeff[k - 1].abs();
        let lagrange = lagrange_factors(&sigma, k)?;
        let delta_estimate = match opts.model {
            DecayModel::Geometric { rho } => estimate_delta_severe(&sigma, coeff_ratio, rho, k)?,
            DecayModel::PowerLaw { alpha, .. } => estimate_delta_moderate(coeff_ratio, alpha, k, lagrange.max())?,
        };
        let sin_theta_estimate = sin_from_delta_norm(delta_estimate);
        let theta = ritz_values(state, k)?;
        let ritz = ritz_condition_from_complement(&sigma, eps, theta[k - 1], k, opts.delta)?;
        per_k.push(KDiagnostics {
            k,
            sin_theta_exact: sin,
            tan_theta: tan,
            delta_estimate,
            sin_theta_estimate,
            ratio: sin_theta_estimate / sin,
            coeff_ratio,
            lagrange,
            epsilon_complement: eps,
            ritz,
        });
    }
    Ok(SubspaceDiagnostics { per_k, diagnosable_kmax: window })
}
