//! Direct SVD reference machinery: truncated SVD and Tikhonov solutions,
//! discrete Picard data and the noise transition index.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::argmax_abs;
use crate::{Error, Result};

/// Threshold multiplier separating `|u_iᵀb| > η` from `|u_iᵀb| ≈ η`.
pub const NOISE_THRESHOLD: f64 = 1.5;

/// Thin SVD `A = U diag(σ) Vᵀ` with `σ` descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub sigma: DVector<f64>,
    /// `m × n`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `n × n`, orthogonal.
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `u_iᵀ b` for all `i`.
    pub fn coefficients(&self, b: &DVector<f64>) -> DVector<f64> {
        self.u.tr_mul(b)
    }
}

/// Full thin SVD of an `m × n` matrix with `m ≥ n ≥ 2`.
///
/// Singular values are sorted descending and each right singular vector is
/// signed so that its largest-magnitude entry is positive (the matching left
/// vector is flipped with it).
pub fn compute_svd(a: &DMatrix<f64>) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if n < 2 || m < n {
        return Err(Error::InvalidDimension(format!("compute_svd needs m >= n >= 2, got {m} x {n}")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::InvalidMatrix),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut sigma = DVector::zeros(n);
    let mut uu = DMatrix::zeros(m, n);
    let mut vv = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = svd.singular_values[src];
        let mut vcol = vt.row(src).transpose();
        let mut ucol = u.column(src).into_owned();
        let lead = argmax_abs(vcol.iter().copied());
        if vcol[lead] < 0.0 {
            vcol.neg_mut();
            ucol.neg_mut();
        }
        vv.set_column(dst, &vcol);
        uu.set_column(dst, &ucol);
    }
    Ok(SvdFactors { sigma, u: uu, v: vv })
}

/// Discrete Picard data: `σ_i`, `|u_iᵀb|` and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardData {
    pub sigma: Vec<f64>,
    pub coeff: Vec<f64>,
    pub ratio: Vec<f64>,
}

pub fn picard_data(svd: &SvdFactors, b: &DVector<f64>) -> PicardData {
    let coeff: Vec<f64> = svd.coefficients(b).iter().map(|c| c.abs()).collect();
    let sigma: Vec<f64> = svd.sigma.iter().copied().collect();
    let ratio = coeff.iter().zip(&sigma).map(|(c, s)| c / s).collect();
    PicardData { sigma, coeff, ratio }
}

/// TSVD solution `Σ_{i≤k} (u_iᵀb/σ_i) v_i`.
pub fn tsvd_solve(svd: &SvdFactors, b: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    let n = svd.n();
    if k == 0 || k > n {
        return Err(Error::InvalidTruncation { k, n });
    }
    let c = svd.coefficients(b);
    let mut x = DVector::zeros(n);
    for i in 0..k {
        x.axpy(c[i] / svd.sigma[i], &svd.v.column(i), 1.0);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsvdPoint {
    pub k: usize,
    pub rel_error: f64,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsvdCurve {
    pub points: Vec<TsvdPoint>,
    /// Truncation index with the smallest relative error (ties toward smaller k).
    pub best_k: usize,
    pub best_rel_error: f64,
}

/// Relative error and residual of the TSVD solutions for `k = 1..=kmax`.
pub fn tsvd_error_curve(svd: &SvdFactors, b: &DVector<f64>, x_true: &DVector<f64>, kmax: usize) -> Result<TsvdCurve> {
    let n = svd.n();
    if kmax == 0 || kmax > n {
        return Err(Error::InvalidTruncation { k: kmax, n });
    }
    let xnorm = x_true.norm();
    if xnorm == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    let c = svd.coefficients(b);
    // Residual norms from the back: ‖(I − UUᵀ)b‖² + Σ_{i>k} c_i².
    let outside = (b - &svd.u * &c).norm_squared();
    let mut tail = vec![0.0; n + 1];
    tail[n] = outside;
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] + c[i] * c[i];
    }

    let mut x = DVector::zeros(n);
    let mut points = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        x.axpy(c[k - 1] / svd.sigma[k - 1], &svd.v.column(k - 1), 1.0);
        let rel_error = (&x - x_true).norm() / xnorm;
        points.push(TsvdPoint { k, rel_error, residual_norm: tail[k].sqrt() });
    }
    let best = points
        .iter()
        .fold(points[0], |best, p| if p.rel_error < best.rel_error { *p } else { best });
    Ok(TsvdCurve { points, best_k: best.k, best_rel_error: best.rel_error })
}

/// Tikhonov filter factors `σ_i² / (σ_i² + λ²)`.
pub fn tikhonov_filters(sigma: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("Tikhonov parameter must be positive, got {lambda}")));
    }
    let l2 = lambda * lambda;
    Ok(sigma.map(|s| {
        let s2 = s * s;
        s2 / (s2 + l2)
    }))
}

pub fn tikhonov_solve(svd: &SvdFactors, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    tikhonov_filters(&svd.sigma, lambda)?;
    let l2 = lambda * lambda;
    let c = svd.coefficients(b);
    let mut x = DVector::zeros(svd.n());
    for i in 0..svd.n() {
        let s = svd.sigma[i];
        x.axpy(s * c[i] / (s * s + l2), &svd.v.column(i), 1.0);
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionRule {
    /// Last index whose 3-point median coefficient clears `ν·η`.
    MedianThreshold,
    /// No coefficient clears the threshold.
    NoiseFloorEverywhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub k0: usize,
    pub eta_estimate: f64,
    pub rule: TransitionRule,
}

/// Transition index `k0`: the largest `k` such that the 3-point median of
/// `|u_iᵀb|` exceeds `ν·η` for every `i ≤ k`, clamped to `[1, n−1]`.
/// Endpoints use edge replication.
pub fn transition_index(pic: &PicardData, eta: f64) -> Result<TransitionReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("noise level eta must be positive, got {eta}")));
    }
    let c = &pic.coeff;
    let n = c.len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 coefficients, got {n}")));
    }
    let median3 = |i: usize| {
        let mut w = [c[i.saturating_sub(1)], c[i], c[(i + 1).min(n - 1)]];
        w.sort_by(f64::total_cmp);
        w[1]
    };
    let threshold = NOISE_THRESHOLD * eta;
    let above = (0..n).take_while(|&i| median3(i) > threshold).count();
    let report = if above == 0 {
        TransitionReport { k0: 1, eta_estimate: eta, rule: TransitionRule::NoiseFloorEverywhere }
    } else {
        TransitionReport { k0: above.min(n - 1), eta_estimate: eta, rule: TransitionRule::MedianThreshold }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{add_noise, gen_shaw, gen_synthetic, DecayModel, SyntheticSpec};

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(d))
    }

    #[test]
    fn svd_of_identity_and_diagonal() {
        let s = compute_svd(&DMatrix::identity(4, 4)).unwrap();
        assert!(s.sigma.iter().all(|x| (x - 1.0).abs() < 1e-15));

        let s = compute_svd(&diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(s.sigma.as_slice(), &[3.0, 2.0, 1.0]);
        // v_1 = e_2, v_2 = e_3, v_3 = e_1 with positive leading entries
        assert!((s.v[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((s.v[(2, 1)] - 1.0).abs() < 1e-15);
        assert!((s.v[(0, 2)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_factor_invariants_on_shaw() {
        let p = gen_shaw(32).unwrap();
        let s = compute_svd(&p.a).unwrap();
        let s1 = s.sigma[0];
        let recon = &s.u * DMatrix::from_diagonal(&s.sigma) * s.v.transpose();
        assert!((&p.a - recon).norm() <= 1e-10 * s1);
        assert!(crate::linalg::orthogonality_defect(&s.u) <= 1e-10);
        assert!(crate::linalg::orthogonality_defect(&s.v) <= 1e-10);
        for i in 0..32 {
            let col = s.v.column(i);
            let lead = argmax_abs(col.iter().copied());
            assert!(col[lead] > 0.0);
        }
    }

    #[test]
    fn svd_rejects_bad_input() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 1)] = f64::NAN;
        assert_eq!(compute_svd(&a).unwrap_err(), Error::InvalidMatrix);
        assert!(matches!(compute_svd(&DMatrix::zeros(2, 3)), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn tsvd_small_cases() {
        let s = compute_svd(&diag(&[2.0, 1.0])).unwrap();
        let b = DVector::from_row_slice(&[2.0, 1.0]);
        let x = tsvd_solve(&s, &b, 1).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!(matches!(tsvd_solve(&s, &b, 0), Err(Error::InvalidTruncation { .. })));
        assert!(matches!(tsvd_solve(&s, &b, 3), Err(Error::InvalidTruncation { .. })));
    }

    #[test]
    fn tsvd_full_expansion_solves_consistent_system() {
        let p = gen_synthetic(&SyntheticSpec {
            m: 16,
            n: 16,
            decay: DecayModel::PowerLaw { zeta: 1.0, alpha: 1.0 },
            beta: 1.0,
            seed: 5,
        })
        .unwrap();
        let s = compute_svd(&p.a).unwrap();
        let x = tsvd_solve(&s, &p.b_true, 16).unwrap();
        assert!((&p.a * x - &p.b_true).norm() <= 1e-8 * p.b_true.norm());
    }

    #[test]
    fn tsvd_increments_are_single_terms() {
        let p = gen_shaw(16).unwrap();
        let s = compute_svd(&p.a).unwrap();
        let c = s.coefficients(&p.b_true);
        for k in 2..=10 {
            let d = tsvd_solve(&s, &p.b_true, k).unwrap() - tsvd_solve(&s, &p.b_true, k - 1).unwrap();
            let want = s.v.column(k - 1) * (c[k - 1] / s.sigma[k - 1]);
            assert!((d - want).norm() <= 1e-12 * tsvd_solve(&s, &p.b_true, k).unwrap().norm());
        }
    }

    #[test]
    fn noise_free_error_curve_is_nonincreasing() {
        let p = gen_synthetic(&SyntheticSpec {
            m: 12,
            n: 12,
            decay: DecayModel::PowerLaw { zeta: 1.0, alpha: 1.0 },
            beta: 1.0,
            seed: 2,
        })
        .unwrap();
        let s = compute_svd(&p.a).unwrap();
        let curve = tsvd_error_curve(&s, &p.b_true, &p.x_true, 12).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].rel_error <= w[0].rel_error + 1e-8);
            assert!(w[1].residual_norm <= w[0].residual_norm + 1e-14);
        }
        assert!(matches!(
            tsvd_error_curve(&s, &p.b_true, &DVector::zeros(12), 4),
            Err(Error::DegenerateTruth)
        ));
    }

    #[test]
    fn shaw_best_tsvd_index_and_residual_plateau() {
        let p = gen_shaw(64).unwrap();
        let np = add_noise(&p, 1e-3, 2024).unwrap();
        let s = compute_svd(&p.a).unwrap();
        let curve = tsvd_error_curve(&s, &np.b, &p.x_true, 30).unwrap();
        assert!((6..=12).contains(&curve.best_k), "best k {}", curve.best_k);
        let enorm = np.e.norm();
        let after = curve.points[curve.best_k].residual_norm;
        assert!(after <= 2.0 * enorm && after >= 0.5 * enorm, "residual {after} vs {enorm}");
    }

    #[test]
    fn tikhonov_small_case_and_errors() {
        let s = compute_svd(&diag(&[2.0, 1.0])).unwrap();
        let b = DVector::from_row_slice(&[2.0, 1.0]);
        let x = tikhonov_solve(&s, &b, 1.0).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        assert!(matches!(tikhonov_solve(&s, &b, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(tikhonov_solve(&s, &b, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn tikhonov_matches_regularized_normal_equations() {
        let p = gen_shaw(24).unwrap();
        let np = add_noise(&p, 1e-2, 1).unwrap();
        let s = compute_svd(&p.a).unwrap();
        let lambda = 1e-2;
        let x = tikhonov_solve(&s, &np.b, lambda).unwrap();
        let lhs = p.a.transpose() * &p.a + DMatrix::identity(24, 24) * (lambda * lambda);
        let rhs = p.a.transpose() * &np.b;
        let y = lhs.cholesky().unwrap().solve(&rhs);
        assert!((&x - &y).norm() <= 1e-8 * y.norm());
    }

    #[test]
    fn tikhonov_tiny_lambda_matches_full_tsvd() {
        let p = gen_synthetic(&SyntheticSpec {
            m: 8,
            n: 8,
            decay: DecayModel::PowerLaw { zeta: 1.0, alpha: 1.0 },
            beta: 1.0,
            seed: 9,
        })
        .unwrap();
        let s = compute_svd(&p.a).unwrap();
        let x = tikhonov_solve(&s, &p.b_true, 1e-14 * s.sigma[7]).unwrap();
        let y = tsvd_solve(&s, &p.b_true, 8).unwrap();
        assert!((&x - &y).norm() <= 1e-6 * y.norm());
    }

    #[test]
    fn tikhonov_filters_are_in_unit_interval_and_monotone() {
        let sigma = DVector::from_iterator(20, (1..=20).map(|j| (j as f64).powi(-2)));
        let f = tikhonov_filters(&sigma, 0.01).unwrap();
        assert!(f.iter().all(|x| *x > 0.0 && *x < 1.0));
        assert!(f.as_slice().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn transition_examples() {
        let eta = 1.0;
        let pic = PicardData {
            sigma: vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0],
            coeff: vec![10.0, 5.0, 2.0, 1.0, 1.0, 1.0],
            ratio: vec![0.0; 6],
        };
        let r = transition_index(&pic, eta).unwrap();
        assert_eq!(r.k0, 3);
        assert_eq!(r.rule, TransitionRule::MedianThreshold);

        let low = PicardData { coeff: vec![1.0; 6], ..pic.clone() };
        let r = transition_index(&low, eta).unwrap();
        assert_eq!((r.k0, r.rule), (1, TransitionRule::NoiseFloorEverywhere));

        assert!(transition_index(&pic, 0.0).is_err());
    }

    #[test]
    fn noise_free_transition_is_n_minus_one() {
        let p = gen_synthetic(&SyntheticSpec {
            m: 20,
            n: 20,
            decay: DecayModel::Geometric { rho: 2.0_f64.exp() },
            beta: 1.0,
            seed: 3,
        })
        .unwrap();
        let pic = picard_data(p.exact_svd.as_ref().unwrap(), &p.b_true);
        let r = transition_index(&pic, 1e-300).unwrap();
        assert_eq!(r.k0, 19);
    }
}
