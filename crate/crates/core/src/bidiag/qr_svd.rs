//! Singular values of bidiagonal matrices by implicit-shift QR.
//!
//! The sweep logic follows the Demmel-Kahan scheme: a zero-shift sweep is
//! used whenever the Wilkinson-type shift is negligible against the leading
//! diagonal entry, and deflation uses the relative forward criterion, so small
//! singular values of a graded matrix keep full relative accuracy.

use crate::linalg::givens;
use crate::{Error, Result};

const MAX_SWEEPS_PER_VALUE: usize = 60;

/// Singular values of the `(k+1) × k` lower-bidiagonal matrix with diagonal
/// `alphas` (length `k`) and subdiagonal `betas` (length `k`, i.e. β_2..β_{k+1}),
/// sorted descending.
pub fn lower_bidiagonal_singular_values(alphas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
    let k = alphas.len();
    assert_eq!(betas.len(), k, "need one subdiagonal entry per column");
    if k == 0 {
        return Ok(Vec::new());
    }
    // Left rotations reduce B to k × k upper bidiagonal R with the same
    // singular values.
    let mut d = vec![0.0; k];
    let mut e = vec![0.0; k.saturating_sub(1)];
    let mut rhobar = alphas[0];
    for i in 0..k {
        let (c, s, rho) = givens(rhobar, betas[i]);
        d[i] = rho;
        if i + 1 < k {
            e[i] = s * alphas[i + 1];
            rhobar = -c * alphas[i + 1];
        }
    }
    upper_bidiagonal_singular_values(d, e)
}

/// Singular values of the upper bidiagonal matrix `diag(d) + superdiag(e)`,
/// sorted descending.
pub fn upper_bidiagonal_singular_values(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    assert_eq!(e.len(), n.saturating_sub(1));
    if n == 0 {
        return Ok(Vec::new());
    }
    let eps = f64::EPSILON * 0.5;
    let tol = 10.0 * eps;
    let max_iter = MAX_SWEEPS_PER_VALUE * n * n;
    let mut iter = 0;

    // Active block is d[lo..=hi].
    let mut hi = n - 1;
    while hi > 0 {
        if iter > max_iter {
            return Err(Error::NoConvergence);
        }
        // Relative forward criterion over the whole unreduced prefix.
        let mut mu = d[0].abs();
        for i in 0..hi {
            if e[i].abs() <= tol * mu {
                e[i] = 0.0;
            }
            if e[i] != 0.0 {
                mu = d[i + 1].abs() * (mu / (mu + e[i].abs()));
            } else {
                mu = d[i + 1].abs();
            }
        }
        if e[hi - 1] == 0.0 {
            hi -= 1;
            continue;
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }

        if let Some(z) = (lo..=hi).find(|&i| d[i] == 0.0) {
            chase_zero_diagonal(&mut d, &mut e, lo, hi, z);
            iter += 1;
            continue;
        }

        if hi - lo == 1 {
            let (smin, smax) = singular_values_2x2(d[lo], e[lo], d[hi]);
            d[lo] = smax;
            d[hi] = smin;
            e[lo] = 0.0;
            hi = lo;
            continue;
        }

        let (shift, _) = singular_values_2x2(d[hi - 1], e[hi - 1], d[hi]);
        let lead = d[lo].abs();
        let shift = if lead > 0.0 && (shift / lead).powi(2) < eps { 0.0 } else { shift };
        if shift == 0.0 {
            zero_shift_sweep(&mut d, &mut e, lo, hi);
        } else {
            shifted_sweep(&mut d, &mut e, lo, hi, shift);
        }
        iter += 1;
    }

    let mut s: Vec<f64> = d.into_iter().map(f64::abs).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn zero_shift_sweep(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize) {
    let mut cs = 1.0;
    let mut oldcs = 1.0;
    let mut oldsn = 0.0;
    for i in lo..hi {
        let (c, s, r) = givens(d[i] * cs, e[i]);
        cs = c;
        if i > lo {
            e[i - 1] = oldsn * r;
        }
        let (oc, os, di) = givens(oldcs * r, d[i + 1] * s);
        oldcs = oc;
        oldsn = os;
        d[i] = di;
    }
    let h = d[hi] * cs;
    d[hi] = h * oldcs;
    e[hi - 1] = h * oldsn;
}

fn shifted_sweep(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize, shift: f64) {
    let mut f = (d[lo].abs() - shift) * (d[lo].signum() + shift / d[lo]);
    let mut g = e[lo];
    for i in lo..hi {
        let (cr, sr, r) = givens(f, g);
        if i > lo {
            e[i - 1] = r;
        }
        f = cr * d[i] + sr * e[i];
        e[i] = cr * e[i] - sr * d[i];
        g = sr * d[i + 1];
        d[i + 1] *= cr;
        let (cl, sl, r) = givens(f, g);
        d[i] = r;
        f = cl * e[i] + sl * d[i + 1];
        d[i + 1] = cl * d[i + 1] - sl * e[i];
        if i + 1 < hi {
            g = sl * e[i + 1];
            e[i + 1] *= cl;
        }
    }
    e[hi - 1] = f;
}

/// Zero diagonal entry at `z`: rotate its row (or, for the last row, its
/// column) so that the adjacent off-diagonal entries vanish and the block splits.
fn chase_zero_diagonal(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize, z: usize) {
    if z < hi {
        // Row z holds only e[z]; push it right with left rotations on rows (j, z).
        let mut bulge = e[z];
        e[z] = 0.0;
        for j in z + 1..=hi {
            let (c, s, r) = givens(d[j], bulge);
            d[j] = r;
            if j < hi {
                bulge = -s * e[j];
                e[j] *= c;
            }
        }
    } else {
        // Column hi holds only e[hi-1]; push it up with right rotations.
        let mut bulge = e[hi - 1];
        e[hi - 1] = 0.0;
        for j in (lo..hi).rev() {
            let (c, s, r) = givens(d[j], bulge);
            d[j] = r;
            if j > lo {
                bulge = -s * e[j - 1];
                e[j - 1] *= c;
            }
        }
    }
}

/// Singular values `(min, max)` of `[[f, g], [0, h]]`, computed without
/// cancellation.
pub(crate) fn singular_values_2x2(f: f64, g: f64, h: f64) -> (f64, f64) {
    let fa = f.abs();
    let ga = g.abs();
    let ha = h.abs();
    let fhmn = fa.min(ha);
    let fhmx = fa.max(ha);
    if fhmn == 0.0 {
        let smax = if fhmx == 0.0 {
            ga
        } else {
            let (big, small) = if fhmx > ga { (fhmx, ga) } else { (ga, fhmx) };
            big * (1.0 + (small / big).powi(2)).sqrt()
        };
        (0.0, smax)
    } else if ga < fhmx {
        let as_ = 1.0 + fhmn / fhmx;
        let at = (fhmx - fhmn) / fhmx;
        let au = (ga / fhmx).powi(2);
        let c = 2.0 / ((as_ * as_ + au).sqrt() + (at * at + au).sqrt());
        (fhmn * c, fhmx / c)
    } else {
        let au = fhmx / ga;
        if au == 0.0 {
            ((fhmn * fhmx) / ga, ga)
        } else {
            let as_ = 1.0 + fhmn / fhmx;
            let at = (fhmx - fhmn) / fhmx;
            let c = 1.0 / ((1.0 + (as_ * au).powi(2)).sqrt() + (1.0 + (at * au).powi(2)).sqrt());
            (2.0 * (fhmn * c) * au, ga / (c + c))
        }
    }
}
