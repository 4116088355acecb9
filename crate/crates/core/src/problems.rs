//! Test problems for discrete ill-posed least squares.
//!
//! Three generators are provided: a synthetic family whose SVD is prescribed
//! exactly (geometric or power-law singular value decay together with a
//! discrete Picard model for the right-hand side), and the classical `shaw`
//! and `deriv2` first-kind integral equations discretized by the midpoint
//! rule. Noise is Gaussian white noise rescaled to an exact relative level.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::orthonormalize_columns;
use crate::svdtools::SvdFactors;
use crate::table::{fmt_f64, read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
use crate::{Error, Result};

/// Singular value decay law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum DecayModel {
    /// `σ_j = ρ^{-j}` (severely ill-posed).
    Geometric { rho: f64 },
    /// `σ_j = ζ j^{-α}` (moderately ill-posed for `α > 1`, mildly for `1/2 < α ≤ 1`).
    PowerLaw { zeta: f64, alpha: f64 },
}

impl DecayModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecayModel::Geometric { rho } => {
                if !(rho > 1.0) || !rho.is_finite() {
                    return Err(Error::InvalidDecay(format!("geometric decay needs rho > 1, got {rho}")));
                }
            }
            DecayModel::PowerLaw { zeta, alpha } => {
                if !(zeta > 0.0) || !zeta.is_finite() {
                    return Err(Error::InvalidDecay(format!("power-law decay needs zeta > 0, got {zeta}")));
                }
                if !(alpha > 0.5) || !alpha.is_finite() {
                    return Err(Error::InvalidDecay(format!("power-law decay needs alpha > 1/2, got {alpha}")));
                }
            }
        }
        Ok(())
    }

    /// First `n` singular values, descending.
    pub fn singular_values(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let sigma: Vec<f64> = (1..=n)
            .map(|j| match *self {
                DecayModel::Geometric { rho } => rho.powi(-(j as i32)),
                DecayModel::PowerLaw { zeta, alpha } => zeta * (j as f64).powf(-alpha),
            })
            .collect();
        if sigma.iter().any(|s| !(s.is_normal() && *s > 0.0)) {
            return Err(Error::InvalidDecay(format!("singular values underflow at n = {n}")));
        }
        if sigma.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidDecay("singular values are not strictly decreasing".into()));
        }
        Ok(sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub decay: DecayModel,
    /// Picard exponent: `|u_jᵀ b_true| = σ_j^{1+β}`.
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Synthetic,
    Shaw,
    Deriv2,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Synthetic => "synthetic",
            ProblemKind::Shaw => "shaw",
            ProblemKind::Deriv2 => "deriv2",
        }
    }
}

/// Generator metadata as written to `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub kind: ProblemKind,
    pub m: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decay: Option<DecayModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct IllPosedProblem {
    pub a: DMatrix<f64>,
    pub b_true: DVector<f64>,
    pub x_true: DVector<f64>,
    pub kind: ProblemKind,
    pub meta: ProblemMeta,
    /// The SVD used to assemble a synthetic problem; `None` for quadrature problems.
    pub exact_svd: Option<SvdFactors>,
}

impl IllPosedProblem {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct NoisyProblem {
    pub base: IllPosedProblem,
    pub e: DVector<f64>,
    pub b: DVector<f64>,
    /// `‖e‖ / ‖b_true‖`.
    pub epsilon: f64,
    /// Per-component standard deviation, `‖e‖ / √m`.
    pub eta: f64,
    pub seed: u64,
}

impl NoisyProblem {
    /// Wraps a problem with zero noise. `epsilon` and `eta` are zero.
    pub fn noise_free(base: IllPosedProblem) -> Self {
        let m = base.m();
        let b = base.b_true.clone();
        NoisyProblem { base, e: DVector::zeros(m), b, epsilon: 0.0, eta: 0.0, seed: 0 }
    }
}

// Stream ids keep matrix generation and noise draws independent for one seed.
const MATRIX_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Column-major standard Gaussian matrix.
fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_vec(rows, cols, data)
}

fn haar_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // A Gaussian matrix is full rank with probability one; redraw on the
    // (practically impossible) rank-deficient sample.
    loop {
        if let Some(q) = orthonormalize_columns(&gaussian_matrix(rng, rows, cols)) {
            return q;
        }
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<IllPosedProblem> {
    let SyntheticSpec { m, n, decay, beta, seed } = *spec;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("n must be at least 2, got {n}")));
    }
    if m < n {
        return Err(Error::InvalidDimension(format!("need m >= n, got m = {m}, n = {n}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("Picard exponent beta must be positive, got {beta}")));
    }
    let sigma = decay.singular_values(n)?;
    let coeff: Vec<f64> = sigma.iter().map(|s| s.powf(1.0 + beta)).collect();
    if coeff.iter().any(|c| !c.is_normal()) {
        return Err(Error::InvalidDecay(format!("Picard coefficients underflow for beta = {beta}")));
    }

    let mut rng = rng_for(seed, MATRIX_STREAM);
    let u = haar_orthonormal(&mut rng, m, n);
    let v = haar_orthonormal(&mut rng, n, n);

    let sig = DVector::from_vec(sigma.clone());
    let us = DMatrix::from_fn(m, n, |i, j| u[(i, j)] * sig[j]);
    let a = &us * v.transpose();
    let b_true = &u * DVector::from_vec(coeff);
    let x_true = &v * DVector::from_iterator(n, sigma.iter().map(|s| s.powf(beta)));

    Ok(IllPosedProblem {
        a,
        b_true,
        x_true,
        kind: ProblemKind::Synthetic,
        meta: ProblemMeta { kind: ProblemKind::Synthetic, m, n, decay: Some(decay), beta: Some(beta), seed: Some(seed) },
        exact_svd: Some(SvdFactors { sigma: sig, u, v }),
    })
}

pub fn gen_shaw(n: usize) -> Result<IllPosedProblem> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidDimension(format!("shaw needs an even n >= 8, got {n}")));
    }
    let h = PI / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| -PI / 2.0 + (i as f64 + 0.5) * h).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (s, t) = (grid[i], grid[j]);
        let c = s.cos() + t.cos();
        let u = PI * (s.sin() + t.sin());
        let sinc = if u == 0.0 { 1.0 } else { u.sin() / u };
        h * c * c * sinc * sinc
    });
    let x_true = DVector::from_iterator(
        n,
        grid.iter().map(|&t| 2.0 * (-6.0 * (t - 0.8).powi(2)).exp() + (-2.0 * (t + 0.5).powi(2)).exp()),
    );
    let b_true = &a * &x_true;
    Ok(IllPosedProblem {
        a,
        b_true,
        x_true,
        kind: ProblemKind::Shaw,
        meta: ProblemMeta { kind: ProblemKind::Shaw, m: n, n, decay: None, beta: None, seed: None },
        exact_svd: None,
    })
}

pub fn gen_deriv2(n: usize) -> Result<IllPosedProblem> {
    if n < 8 {
        return Err(Error::InvalidDimension(format!("deriv2 needs n >= 8, got {n}")));
    }
    let h = 1.0 / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (s, t) = (grid[i], grid[j]);
        let k = if s < t { s * (t - 1.0) } else { t * (s - 1.0) };
        h * k
    });
    let x_true = DVector::from_vec(grid);
    let b_true = &a * &x_true;
    Ok(IllPosedProblem {
        a,
        b_true,
        x_true,
        kind: ProblemKind::Deriv2,
        meta: ProblemMeta { kind: ProblemKind::Deriv2, m: n, n, decay: None, beta: None, seed: None },
        exact_svd: None,
    })
}

/// Adds seeded Gaussian white noise scaled so that `‖e‖/‖b_true‖ = epsilon`.
pub fn add_noise(problem: &IllPosedProblem, epsilon: f64, seed: u64) -> Result<NoisyProblem> {
    if epsilon >= 1.0 {
        return Err(Error::NoiseDominates(epsilon));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("noise level must be positive, got {epsilon}")));
    }
    let bnorm = problem.b_true.norm();
    if bnorm == 0.0 {
        return Err(Error::DegenerateRhs);
    }
    let m = problem.m();
    let mut rng = rng_for(seed, NOISE_STREAM);
    let z: DVector<f64> = DVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng)));
    let e = &z * (epsilon * bnorm / z.norm());
    let b = &problem.b_true + &e;
    let eta = e.norm() / (m as f64).sqrt();
    Ok(NoisyProblem { base: problem.clone(), e, b, epsilon, eta, seed })
}

/// Noise description recorded in `meta.json` for noisy bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub epsilon: f64,
    pub eta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    #[serde(flatten)]
    pub problem: ProblemMeta,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise: Option<NoiseMeta>,
}

/// Writes `A.csv`, `b_true.csv`, `x_true.csv` and `meta.json` (plus `b.csv`
/// and `e.csv` when a noise realization is given).
pub fn write_bundle(dir: &Path, problem: &IllPosedProblem, noisy: Option<&NoisyProblem>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("A.csv"), &problem.a)?;
    write_vector_csv(&dir.join("b_true.csv"), "b_true", &problem.b_true)?;
    write_vector_csv(&dir.join("x_true.csv"), "x_true", &problem.x_true)?;
    let noise = noisy.map(|np| NoiseMeta { epsilon: np.epsilon, eta: np.eta, seed: np.seed });
    if let Some(np) = noisy {
        write_vector_csv(&dir.join("b.csv"), "b", &np.b)?;
        write_vector_csv(&dir.join("e.csv"), "e", &np.e)?;
    }
    let meta = BundleMeta { problem: problem.meta.clone(), noise };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

/// Reads a bundle written by [`write_bundle`]. The exact SVD of synthetic
/// problems is not stored and is regenerated from the recorded spec.
pub fn read_bundle(dir: &Path) -> Result<(IllPosedProblem, Option<NoisyProblem>)> {
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    let a = read_matrix_csv(&dir.join("A.csv"))?;
    let b_true = read_vector_csv(&dir.join("b_true.csv"))?;
    let x_true = read_vector_csv(&dir.join("x_true.csv"))?;
    if a.nrows() != b_true.len() || a.ncols() != x_true.len() {
        return Err(Error::Bundle("inconsistent dimensions".into()));
    }
    let exact_svd = match (meta.problem.kind, meta.problem.decay, meta.problem.beta, meta.problem.seed) {
        (ProblemKind::Synthetic, Some(decay), Some(beta), Some(seed)) => {
            let spec = SyntheticSpec { m: meta.problem.m, n: meta.problem.n, decay, beta, seed };
            gen_synthetic(&spec)?.exact_svd
        }
        _ => None,
    };
    let problem = IllPosedProblem { a, b_true, x_true, kind: meta.problem.kind, meta: meta.problem, exact_svd };
    let noisy = match meta.noise {
        Some(nm) => {
            let b = read_vector_csv(&dir.join("b.csv"))?;
            let e = read_vector_csv(&dir.join("e.csv"))?;
            Some(NoisyProblem { base: problem.clone(), e, b, epsilon: nm.epsilon, eta: nm.eta, seed: nm.seed })
        }
        None => None,
    };
    Ok((problem, noisy))
}

/// Short human-readable label, e.g. `geometric:7.389` or `power:1:3`.
pub fn describe_decay(decay: &DecayModel) -> String {
    match decay {
        DecayModel::Geometric { rho } => format!("geometric:{}", fmt_f64(*rho)),
        DecayModel::PowerLaw { zeta, alpha } => format!("power:{}:{}", fmt_f64(*zeta), fmt_f64(*alpha)),
    }
}
