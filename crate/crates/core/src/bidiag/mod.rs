//! k-step Lanczos (Golub-Kahan) bidiagonalization started from `b`.
//!
//! With `P_{k+1} = [p_1, …, p_{k+1}]`, `Q_k = [q_1, …, q_k]` and the lower
//! bidiagonal `B_k` holding `α_1..α_k` on the diagonal and `β_2..β_{k+1}`
//! below it, the process maintains
//!
//! ```text
//! A Q_k      = P_{k+1} B_k
//! Aᵀ P_{k+1} = Q_k B_kᵀ + α_{k+1} q_{k+1} e_{k+1}ᵀ
//! ```
//!
//! and `span(Q_k)` is the Krylov subspace `K_k(AᵀA, Aᵀb)`. The Ritz values
//! `θ_i^(k)` are the singular values of `B_k`.

mod qr_svd;

pub use qr_svd::{lower_bidiagonal_singular_values, upper_bidiagonal_singular_values};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{orthogonality_defect, reorthogonalize, spectral_norm};
use crate::{Error, Result};

/// Breakdown threshold relative to the running estimate of `σ_1`.
pub const BREAKDOWN_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reorth {
    /// Three-term recurrence only.
    None,
    /// Two-pass modified Gram-Schmidt against every previous column.
    #[default]
    Full,
}

#[derive(Debug, Clone)]
pub struct BidiagState {
    /// `m × (k+1)`.
    pub p: DMatrix<f64>,
    /// `n × k`.
    pub q: DMatrix<f64>,
    /// `α_1..α_k`.
    pub alphas: Vec<f64>,
    /// `β_1..β_{k+1}`, with `β_1 = ‖b‖`.
    pub betas: Vec<f64>,
    pub k: usize,
    /// Step at which `α_j` or `β_{j+1}` fell below the breakdown tolerance.
    pub breakdown: Option<usize>,
    /// `α_{k+1}` (zero on breakdown or when `k = n`).
    pub alpha_next: f64,
    /// `q_{k+1}` when `α_{k+1}` is available.
    pub q_next: Option<DVector<f64>>,
    pub reorth: Reorth,
}

impl BidiagState {
    /// Leading `(j+1) × j` block `B_j` as a dense matrix.
    pub fn b_matrix(&self, j: usize) -> DMatrix<f64> {
        assert!(j <= self.k);
        DMatrix::from_fn(j + 1, j, |r, c| {
            if r == c {
                self.alphas[c]
            } else if r == c + 1 {
                self.betas[c + 1]
            } else {
                0.0
            }
        })
    }

    /// `α_j` for `j = 1..=k+1`.
    pub fn alpha(&self, j: usize) -> f64 {
        if j == self.k + 1 {
            self.alpha_next
        } else {
            self.alphas[j - 1]
        }
    }
}

/// Runs up to `kmax` steps of Lanczos bidiagonalization on `(A, b)`.
///
/// Breakdown is not an error: the state is truncated at the breakdown step
/// and the index recorded. A zero `b`, or `b` orthogonal to `range(A)`, is.
pub fn lanczos_bidiag(a: &DMatrix<f64>, b: &DVector<f64>, kmax: usize, reorth: Reorth) -> Result<BidiagState> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::InvalidDimension(format!("b has length {}, A has {m} rows", b.len())));
    }
    if kmax == 0 || kmax > n {
        return Err(Error::InvalidDimension(format!("kmax must be in 1..={n}, got {kmax}")));
    }
    let beta1 = b.norm();
    if beta1 == 0.0 || !beta1.is_finite() {
        return Err(Error::DegenerateStart);
    }

    let mut p = DMatrix::<f64>::zeros(m, kmax + 1);
    let mut q = DMatrix::<f64>::zeros(n, kmax + 1);
    let mut alphas = Vec::with_capacity(kmax + 1);
    let mut betas = vec![beta1];

    let p1 = b / beta1;
    p.set_column(0, &p1);
    let mut w = a.tr_mul(&p1);
    let alpha1 = w.norm();
    // Scale-free test: Aᵀb vanishing relative to ‖A‖‖b‖ means an empty Krylov space.
    if !(alpha1 > BREAKDOWN_RTOL * a.norm()) {
        return Err(Error::DegenerateStart);
    }
    w /= alpha1;
    q.set_column(0, &w);
    alphas.push(alpha1);

    let mut sigma1_est = alpha1;
    let mut breakdown = None;
    let mut k = 0;

    for j in 1..=kmax {
        // β_{j+1} p_{j+1} = A q_j − α_j p_j
        let mut u = a * q.column(j - 1) - p.column(j - 1) * alphas[j - 1];
        let beta = match reorth {
            Reorth::Full => reorthogonalize(&mut u, &p, j),
            Reorth::None => u.norm(),
        };
        k = j;
        let tol = BREAKDOWN_RTOL * sigma1_est;
        if !(beta > tol) {
            betas.push(0.0);
            p.set_column(j, &complement_vector(&p, j));
            breakdown = Some(j);
            break;
        }
        betas.push(beta);
        u /= beta;
        p.set_column(j, &u);

        // α_{j+1} q_{j+1} = Aᵀ p_{j+1} − β_{j+1} q_j
        if j == n {
            break;
        }
        let mut v = a.tr_mul(&u) - q.column(j - 1) * beta;
        let alpha = match reorth {
            Reorth::Full => reorthogonalize(&mut v, &q, j),
            Reorth::None => v.norm(),
        };
        sigma1_est = sigma1_est.max(largest_ritz(&alphas, &betas[1..]));
        if !(alpha > BREAKDOWN_RTOL * sigma1_est) {
            breakdown = Some(j + 1);
            break;
        }
        v /= alpha;
        q.set_column(j, &v);
        alphas.push(alpha);
    }

    // alphas may hold α_{k+1}; split it off.
    let (alpha_next, q_next) = if alphas.len() > k {
        let a_next = alphas.pop().unwrap_or(0.0);
        (a_next, Some(q.column(k).into_owned()))
    } else {
        (0.0, None)
    };
    Ok(BidiagState {
        p: p.columns(0, k + 1).into_owned(),
        q: q.columns(0, k).into_owned(),
        alphas,
        betas,
        k,
        breakdown,
        alpha_next,
        q_next,
        reorth,
    })
}

fn largest_ritz(alphas: &[f64], subdiag: &[f64]) -> f64 {
    let k = alphas.len().min(subdiag.len());
    lower_bidiagonal_singular_values(&alphas[..k], &subdiag[..k])
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or(0.0)
}

/// A unit vector orthogonal to the first `count` columns of `basis`,
/// taken from the standard basis vector with the largest remainder.
fn complement_vector(basis: &DMatrix<f64>, count: usize) -> DVector<f64> {
    let m = basis.nrows();
    let mut best = DVector::zeros(m);
    let mut best_norm = 0.0;
    for i in 0..m {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        let r = reorthogonalize(&mut v, basis, count);
        if r > best_norm {
            best_norm = r;
            best = v;
        }
        if best_norm > 0.5 {
            break;
        }
    }
    best / best_norm
}

/// Ritz values `θ_1^(k) > … > θ_k^(k)` (singular values of `B_k`).
pub fn ritz_values(state: &BidiagState, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > state.k {
        return Err(Error::TruncatedSpectrum { requested: k, available: state.k });
    }
    lower_bidiagonal_singular_values(&state.alphas[..k], &state.betas[1..=k])
}

/// Residuals of the two bidiagonalization relations and the orthogonality
/// defects of both frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    /// `‖A Q_k − P_{k+1} B_k‖`.
    pub forward: f64,
    /// `‖Aᵀ P_{k+1} − Q_k B_kᵀ − α_{k+1} q_{k+1} e_{k+1}ᵀ‖`.
    pub adjoint: f64,
    /// `‖P_{k+1}ᵀ P_{k+1} − I‖`.
    pub orth_p: f64,
    /// `‖Q_kᵀ Q_k − I‖`.
    pub orth_q: f64,
}

pub fn verify_relations(state: &BidiagState, a: &DMatrix<f64>) -> RelationReport {
    let k = state.k;
    let bk = state.b_matrix(k);
    let forward = spectral_norm(&(a * &state.q - &state.p * &bk));
    let mut adj = a.tr_mul(&state.p) - &state.q * bk.transpose();
    if let Some(qn) = &state.q_next {
        let mut col = adj.column_mut(k);
        col.axpy(-state.alpha_next, qn, 1.0);
    }
    RelationReport {
        forward,
        adjoint: spectral_norm(&adj),
        orth_p: orthogonality_defect(&state.p),
        orth_q: orthogonality_defect(&state.q),
    }
}

/// Orthogonality defect of `Q_j` for `j = 1..=k`.
pub fn orthogonality_history(state: &BidiagState) -> Vec<(f64, f64)> {
    (1..=state.k)
        .map(|j| {
            (
                orthogonality_defect(&state.p.columns(0, j + 1).into_owned()),
                orthogonality_defect(&state.q.columns(0, j).into_owned()),
            )
        })
        .collect()
}
