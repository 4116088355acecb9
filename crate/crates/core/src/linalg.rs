//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// `‖QᵀQ − I‖₂` for a matrix with (nominally) orthonormal columns.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    if k == 0 {
        return 0.0;
    }
    let gram = q.transpose() * q - DMatrix::<f64>::identity(k, k);
    spectral_norm(&gram)
}

/// Two passes of modified Gram-Schmidt of `v` against the first `count`
/// columns of `basis`. Returns the norm of `v` after projection.
pub fn reorthogonalize(v: &mut DVector<f64>, basis: &DMatrix<f64>, count: usize) -> f64 {
    for _ in 0..2 {
        for j in 0..count {
            let col = basis.column(j);
            let h = col.dot(v);
            v.axpy(-h, &col, 1.0);
        }
    }
    v.norm()
}

/// Orthonormalize the columns of `m` with two-pass modified Gram-Schmidt and
/// flip signs so the first nonzero entry of every column is positive.
///
/// Returns `None` when a column is numerically dependent on its predecessors.
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    let mut q = DMatrix::<f64>::zeros(rows, cols);
    for j in 0..cols {
        let mut v = m.column(j).into_owned();
        let before = v.norm();
        let after = reorthogonalize(&mut v, &q, j);
        if !(after > 1e-13 * before) || after == 0.0 {
            return None;
        }
        v /= after;
        if let Some(first) = v.iter().find(|x| **x != 0.0) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        q.set_column(j, &v);
    }
    Some(q)
}

/// Plane rotation `(c, s, r)` with `c·f + s·g = r` and `−s·f + c·g = 0`.
pub fn givens(f: f64, g: f64) -> (f64, f64, f64) {
    if g == 0.0 {
        (1.0, 0.0, f)
    } else if f == 0.0 {
        (0.0, 1.0, g)
    } else {
        let r = f.hypot(g);
        (f / r, g / r, r)
    }
}

/// Index of the entry with the largest magnitude; the first one on ties.
pub fn argmax_abs(v: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in v.into_iter().enumerate() {
        if x.abs() > best_val {
            best_val = x.abs();
            best = i;
        }
    }
    best
}
