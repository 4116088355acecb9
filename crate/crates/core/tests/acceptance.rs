//! Acceptance checks. Each test prints one `PASS`/`FAIL` line and fails when
//! its check does.
//!
//! Instance parameters not fixed by a check use `β = 1`, `ε = 10⁻³`, seed 0
//! for single instances and seeds `0..10` otherwise; the noise draw reuses
//! the problem seed.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use regdiag_core::bidiag::{lanczos_bidiag, ritz_values, Reorth};
use regdiag_core::problems::{
    add_noise, gen_deriv2, gen_shaw, gen_synthetic, DecayModel, IllPosedProblem, NoisyProblem, SyntheticSpec,
};
use regdiag_core::solvers::{cgls_series, filter_factors, filtered_expansion, lsqr_from_state};
use regdiag_core::subspace::{
    diagnosable_kmax, diagnose, estimate_lagrange_moderate, explicit_krylov_basis, lagrange_factors,
    sin_theta_exact, DiagnoseOptions, SubspaceDiagnostics, DEFAULT_DELTA,
};
use regdiag_core::svdtools::{compute_svd, tsvd_error_curve};

const SEEDS: std::ops::Range<u64> = 0..10;

fn verdict(id: u32, name: &str, ok: bool, detail: String) {
    println!("[{}] criterion {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn severe() -> DecayModel {
    DecayModel::Geometric { rho: 2f64.exp() }
}

fn power(alpha: f64) -> DecayModel {
    DecayModel::PowerLaw { zeta: 1.0, alpha }
}

fn synthetic(decay: DecayModel, n: usize, seed: u64) -> IllPosedProblem {
    gen_synthetic(&SyntheticSpec { m: n, n, decay, beta: 1.0, seed }).unwrap()
}

fn noisy(base: &IllPosedProblem, eps: f64, seed: u64) -> NoisyProblem {
    add_noise(base, eps, seed).unwrap()
}

fn diagnostics(np: &NoisyProblem, model: DecayModel, kcap: usize) -> SubspaceDiagnostics {
    let svd = compute_svd(&np.base.a).unwrap();
    let kmax = diagnosable_kmax(svd.sigma.as_slice()).min(kcap);
    let st = lanczos_bidiag(&np.base.a, &np.b, kmax, Reorth::Full).unwrap();
    diagnose(&svd, &np.b, &st, &DiagnoseOptions { kmax, delta: DEFAULT_DELTA, model }).unwrap()
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

#[test]
fn criterion_1_lagrange_table() {
    let start = Instant::now();
    let table = [(0.6, 3962.7), (1.0, 199.88), (3.0, 3.5103), (4.0, 2.2877)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, want) in table {
        let sigma: Vec<f64> = (1..=10).map(|i| (i as f64).powf(-alpha)).collect();
        let got = lagrange_factors(&sigma, 10).unwrap().max();
        let rel = (got / want - 1.0).abs();
        ok &= rel <= 5e-3;
        parts.push(format!("α={alpha}: {got:.5} (rel {rel:.1e})"));
    }
    let elapsed = start.elapsed();
    ok &= within(elapsed, Duration::from_secs(1));
    verdict(1, "lagrange-table", ok, format!("{} in {elapsed:.2?}", parts.join(", ")));
}

#[test]
fn criterion_2_moderate_upper_estimate() {
    let a3 = estimate_lagrange_moderate(3.0, 10).unwrap().upper;
    let a4 = estimate_lagrange_moderate(4.0, 10).unwrap().upper;
    let ok = (a3 - 2.4286).abs() <= 1e-3 && (a4 - 2.1111).abs() <= 1e-3;
    verdict(2, "moderate-upper-estimate", ok, format!("α=3: {a3:.6}, α=4: {a4:.6}"));
}

fn ratio_band(id: u32, name: &str, model: DecayModel, kcap: usize, geo_band: (f64, f64)) {
    let start = Instant::now();
    let mut logs = Vec::new();
    let mut outside = Vec::new();
    for seed in SEEDS {
        let np = noisy(&synthetic(model, 128, seed), 1e-3, seed);
        let d = diagnostics(&np, model, kcap);
        for row in &d.per_k {
            logs.push(row.ratio.ln());
            if !(0.5..=2.0).contains(&row.ratio) {
                outside.push(format!("seed {seed} k={} ratio {:.3}", row.k, row.ratio));
            }
        }
    }
    let geo = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let elapsed = start.elapsed();
    let geo_ok = geo >= geo_band.0 && geo <= geo_band.1;
    let ok = outside.is_empty() && geo_ok && within(elapsed, Duration::from_secs(30));
    let shown: Vec<&String> = outside.iter().take(6).collect();
    verdict(
        id,
        name,
        ok,
        format!(
            "{} ratios, geometric mean {geo:.4} (band {:?}), {} outside [0.5, 2.0] {:?}, {elapsed:.2?}",
            logs.len(),
            geo_band,
            outside.len(),
            shown
        ),
    );
}

#[test]
fn criterion_3_severe_estimate_quality() {
    ratio_band(3, "severe-sin-theta-estimate", severe(), usize::MAX, (0.7, 1.3));
}

#[test]
fn criterion_4_moderate_estimate_quality() {
    ratio_band(4, "moderate-sin-theta-estimate", power(3.0), 20, (0.75, 1.35));
}

fn instances(eps: f64, seed: u64) -> Vec<(&'static str, NoisyProblem)> {
    vec![
        ("shaw", noisy(&gen_shaw(64).unwrap(), eps, seed)),
        ("deriv2", noisy(&gen_deriv2(100).unwrap(), eps, seed)),
        ("geometric", noisy(&synthetic(severe(), 64, seed), eps, seed)),
        ("power", noisy(&synthetic(power(3.0), 64, seed), eps, seed)),
    ]
}

#[test]
fn criterion_5_semi_convergence_ordering() {
    let start = Instant::now();
    let mut count = 0;
    let mut order_fail = Vec::new();
    let mut accuracy_fail = Vec::new();
    let mut worst: f64 = 0.0;
    for eps in [1e-3, 1e-2] {
        for seed in SEEDS {
            for (name, np) in instances(eps, seed) {
                let n = np.base.n();
                let svd = compute_svd(&np.base.a).unwrap();
                let curve = tsvd_error_curve(&svd, &np.b, &np.base.x_true, n).unwrap();
                let st = lanczos_bidiag(&np.base.a, &np.b, n - 1, Reorth::Full).unwrap();
                let lsqr = lsqr_from_state(&np, &st, n - 1, 0).unwrap();
                let ratio = lsqr.best_rel_error() / curve.best_rel_error;
                worst = worst.max(ratio);
                count += 1;
                if lsqr.kstar > curve.best_k {
                    order_fail.push(format!("{name} ε={eps} seed {seed}: k*={} k0={}", lsqr.kstar, curve.best_k));
                }
                if ratio > 1.2 {
                    accuracy_fail.push(format!("{name} ε={eps} seed {seed}: {ratio:.3}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = order_fail.is_empty() && accuracy_fail.is_empty() && within(elapsed, Duration::from_secs(120));
    verdict(
        5,
        "semi-convergence-ordering",
        ok,
        format!(
            "{count} instances, k*>k0 on {} {:?}, error ratio >1.2 on {} {:?} (worst {worst:.3}), {elapsed:.2?}",
            order_fail.len(),
            order_fail,
            accuracy_fail.len(),
            accuracy_fail
        ),
    );
}

#[test]
fn criterion_6_interlacing() {
    let mut checked = 0usize;
    let mut violations = Vec::new();
    for eps in [1e-3, 1e-2] {
        for seed in SEEDS {
            for (name, np) in instances(eps, seed) {
                let svd = compute_svd(&np.base.a).unwrap();
                let kmax = 30.min(np.base.n() - 1);
                let st = lanczos_bidiag(&np.base.a, &np.b, kmax, Reorth::Full).unwrap();
                let tol = 1e-12 * svd.sigma[0];
                for k in 1..=st.k {
                    let theta = ritz_values(&st, k).unwrap();
                    for (i, t) in theta.iter().enumerate() {
                        checked += 1;
                        if *t >= svd.sigma[i] + tol {
                            violations.push(format!("{name} ε={eps} seed {seed} k={k} i={}", i + 1));
                        }
                    }
                }
            }
        }
    }
    verdict(
        6,
        "interlacing",
        violations.is_empty(),
        format!("{checked} pairs, {} violations {:?}", violations.len(), violations.iter().take(5).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_7_filter_reconstruction() {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, model) in [("power α=3", power(3.0)), ("power α=0.6", power(0.6))] {
        let np = noisy(&synthetic(model, 64, 0), 1e-3, 0);
        let svd = compute_svd(&np.base.a).unwrap();
        let sigma: Vec<f64> = svd.sigma.iter().copied().collect();
        let st = lanczos_bidiag(&np.base.a, &np.b, 15, Reorth::Full).unwrap();
        let lsqr = lsqr_from_state(&np, &st, 15, 64).unwrap();
        let mut local: f64 = 0.0;
        for k in 1..=st.k {
            let f = filter_factors(&ritz_values(&st, k).unwrap(), &sigma).unwrap();
            let x = filtered_expansion(&svd, &np.b, &f);
            let xl = lsqr.iterate(k).unwrap();
            local = local.max((&x - xl).norm() / xl.norm());
        }
        worst = worst.max(local);
        parts.push(format!("{name}: {local:.2e}"));
    }
    verdict(7, "filter-reconstruction", worst <= 1e-8, parts.join(", "));
}

#[test]
fn criterion_8_oracle_equivalence() {
    let model = DecayModel::Geometric { rho: 1.1 };
    let np = noisy(&synthetic(model, 32, 0), 1e-3, 0);
    let svd = compute_svd(&np.base.a).unwrap();
    let st = lanczos_bidiag(&np.base.a, &np.b, 10, Reorth::Full).unwrap();
    let explicit = explicit_krylov_basis(&np.base.a, &np.b, 10).unwrap();
    let mut sin_gap: f64 = 0.0;
    for k in 1..=10 {
        let a = sin_theta_exact(&svd, &st.q.columns(0, k).into_owned()).unwrap();
        let b = sin_theta_exact(&svd, &explicit.basis.columns(0, k).into_owned()).unwrap();
        sin_gap = sin_gap.max((a - b).abs());
    }
    let lsqr = lsqr_from_state(&np, &st, 10, 64).unwrap();
    let cgls = cgls_series(&np, 10, 64).unwrap();
    let iterate_gap = (1..=10)
        .map(|k| {
            let x: &DVector<f64> = lsqr.iterate(k).unwrap();
            (x - cgls.iterate(k).unwrap()).norm() / x.norm()
        })
        .fold(0.0, f64::max);
    let ok = sin_gap <= 1e-10 && iterate_gap <= 1e-8;
    verdict(
        8,
        "oracle-equivalence",
        ok,
        format!("sin Θ gap {sin_gap:.2e}, LSQR/CGLS gap {iterate_gap:.2e}"),
    );
}

#[test]
fn criterion_9_ritz_condition_behaviour() {
    // Moderate: a prefix where the condition holds with θ_k > σ_{k+1}, and
    // θ_k < σ_{k+1} one step after it first fails.
    let np = noisy(&synthetic(power(3.0), 64, 0), 1e-3, 0);
    let d = diagnostics(&np, power(3.0), 30);
    let rows: Vec<_> = d.per_k.iter().map(|r| r.ritz).collect();
    let first_fail = rows.iter().position(|r| !r.sufficient_large_holds);
    let moderate_ok = match first_fail {
        Some(f) if f >= 1 && f + 1 < rows.len() => {
            rows[..f].iter().all(|r| r.theta_exceeds_sigma) && !rows[f + 1].theta_exceeds_sigma
        }
        _ => false,
    };
    let pattern = |rows: &[regdiag_core::subspace::RitzConditionReport]| -> String {
        rows.iter()
            .map(|r| format!("{}{}", if r.sufficient_large_holds { 'L' } else { '-' }, if r.theta_exceeds_sigma { '>' } else { '<' }))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let moderate_pattern = pattern(&rows);

    // Mild: the condition fails and θ_k < σ_{k+1} for every k ≥ 2.
    let np = noisy(&synthetic(power(0.6), 64, 0), 1e-3, 0);
    let d = diagnostics(&np, power(0.6), 30);
    let mild: Vec<_> = d.per_k.iter().map(|r| r.ritz).collect();
    let mild_ok = mild.len() >= 2 && mild[1..].iter().all(|r| !r.sufficient_large_holds && !r.theta_exceeds_sigma);
    let mild_detail: Vec<String> = mild
        .iter()
        .skip(1)
        .filter(|r| r.sufficient_large_holds || r.theta_exceeds_sigma)
        .map(|r| format!("k={} θ={:.4} σ={:.4}", r.k, r.theta_k, r.sigma_kplus1))
        .collect();

    verdict(
        9,
        "ritz-condition-behaviour",
        moderate_ok && mild_ok,
        format!(
            "moderate first failure at k={:?} pattern [{moderate_pattern}] ok={moderate_ok}; mild ok={mild_ok} offending {:?}",
            first_fail.map(|f| f + 1),
            mild_detail
        ),
    );
}
