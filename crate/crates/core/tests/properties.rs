use nalgebra::DVector;
use proptest::prelude::*;
use regdiag_core::bidiag::{lanczos_bidiag, ritz_values, Reorth};
use regdiag_core::problems::{add_noise, gen_synthetic, read_bundle, write_bundle, DecayModel, SyntheticSpec};
use regdiag_core::solvers::{filter_factors, filtered_expansion, lsqr_from_state};
use regdiag_core::subspace::{delta_norm_from_sin, sin_from_delta_norm, sin_theta_exact};
use regdiag_core::svdtools::compute_svd;

fn decay_strategy() -> impl Strategy<Value = DecayModel> {
    prop_oneof![
        (1.2f64..4.0).prop_map(|rho| DecayModel::Geometric { rho }),
        (0.6f64..3.0).prop_map(|alpha| DecayModel::PowerLaw { zeta: 1.0, alpha }),
    ]
}

fn spec(decay: DecayModel, n: usize, extra_rows: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec { m: n + extra_rows, n, decay, beta: 1.0, seed }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bundle_round_trip_is_bitwise(decay in decay_strategy(), n in 4usize..16, extra in 0usize..4, seed in 0u64..1000, eps in 1e-4f64..0.5) {
        let p = gen_synthetic(&spec(decay, n, extra, seed)).unwrap();
        let np = add_noise(&p, eps, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), &p, Some(&np)).unwrap();
        let (q, nq) = read_bundle(dir.path()).unwrap();
        let nq = nq.unwrap();
        prop_assert_eq!(&q.a, &p.a);
        prop_assert_eq!(&q.x_true, &p.x_true);
        prop_assert_eq!(&nq.b, &np.b);
        prop_assert_eq!(nq.eta.to_bits(), np.eta.to_bits());
        prop_assert_eq!(q.exact_svd.unwrap().sigma, p.exact_svd.unwrap().sigma);
    }

    #[test]
    fn synthetic_spectrum_and_noise_level(decay in decay_strategy(), n in 4usize..24, seed in 0u64..1000, eps in 1e-4f64..0.5) {
        let p = gen_synthetic(&spec(decay, n, 2, seed)).unwrap();
        let svd = compute_svd(&p.a).unwrap();
        let want = decay.singular_values(n).unwrap();
        for (s, w) in svd.sigma.iter().zip(&want) {
            prop_assert!((s - w).abs() <= 1e-13 * want[0]);
        }
        let np = add_noise(&p, eps, seed).unwrap();
        prop_assert!((np.e.norm() / p.b_true.norm() / eps - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn ritz_values_interlace(decay in decay_strategy(), n in 6usize..32, seed in 0u64..1000) {
        let p = gen_synthetic(&spec(decay, n, 0, seed)).unwrap();
        let np = add_noise(&p, 1e-3, seed).unwrap();
        let svd = compute_svd(&p.a).unwrap();
        let st = lanczos_bidiag(&p.a, &np.b, n - 1, Reorth::Full).unwrap();
        let tol = 1e-12 * svd.sigma[0];
        let mut previous: Vec<f64> = Vec::new();
        for k in 1..=st.k {
            let theta = ritz_values(&st, k).unwrap();
            for i in 0..k {
                prop_assert!(theta[i] < svd.sigma[i] + tol);
                if i < previous.len() {
                    // θ_i^(k) ≥ θ_i^(k−1): Ritz values grow toward σ_i.
                    prop_assert!(theta[i] >= previous[i] - tol);
                }
            }
            previous = theta;
        }
    }

    #[test]
    fn filter_expansion_reproduces_lsqr(alpha in 1.5f64..3.0, n in 8usize..24, seed in 0u64..1000) {
        let decay = DecayModel::PowerLaw { zeta: 1.0, alpha };
        let p = gen_synthetic(&spec(decay, n, 0, seed)).unwrap();
        let np = add_noise(&p, 1e-3, seed).unwrap();
        let svd = compute_svd(&p.a).unwrap();
        let sigma: Vec<f64> = svd.sigma.iter().copied().collect();
        let kmax = 4.min(n - 1);
        let st = lanczos_bidiag(&p.a, &np.b, kmax, Reorth::Full).unwrap();
        let lsqr = lsqr_from_state(&np, &st, kmax, kmax).unwrap();
        for k in 1..=st.k {
            let f = filter_factors(&ritz_values(&st, k).unwrap(), &sigma).unwrap();
            let x: DVector<f64> = filtered_expansion(&svd, &np.b, &f);
            let xl = lsqr.iterate(k).unwrap();
            prop_assert!((&x - xl).norm() <= 1e-8 * xl.norm());
        }
    }

    #[test]
    fn lsqr_residual_nonincreasing(decay in decay_strategy(), n in 6usize..32, seed in 0u64..1000) {
        let p = gen_synthetic(&spec(decay, n, 3, seed)).unwrap();
        let np = add_noise(&p, 1e-2, seed).unwrap();
        let st = lanczos_bidiag(&p.a, &np.b, n - 1, Reorth::Full).unwrap();
        let lsqr = lsqr_from_state(&np, &st, n - 1, 0).unwrap();
        // The explicit residual b − A x_k carries a rounding error of order
        // eps·σ_1·‖x_k‖, which dominates once σ_k reaches rounding level.
        let sigma1 = p.exact_svd.as_ref().unwrap().sigma[0];
        for w in lsqr.entries.windows(2) {
            let floor = 1e-13 * np.b.norm() + 4.0 * n as f64 * f64::EPSILON * sigma1 * w[1].solution_norm;
            prop_assert!(
                w[1].residual_norm <= w[0].residual_norm + floor,
                "k={}: {} -> {}", w[1].k, w[0].residual_norm, w[1].residual_norm
            );
        }
    }

    #[test]
    fn sin_tan_round_trip(s in 0.0f64..0.999) {
        let back = sin_from_delta_norm(delta_norm_from_sin(s).unwrap());
        prop_assert!((back - s).abs() <= 1e-14);
    }

    #[test]
    fn sin_theta_is_basis_invariant(n in 6usize..20, seed in 0u64..1000, k in 1usize..5) {
        let decay = DecayModel::Geometric { rho: 2.0 };
        let p = gen_synthetic(&spec(decay, n, 0, seed)).unwrap();
        let np = add_noise(&p, 1e-3, seed).unwrap();
        let svd = compute_svd(&p.a).unwrap();
        let st = lanczos_bidiag(&p.a, &np.b, k, Reorth::Full).unwrap();
        let q = st.q.columns(0, st.k).into_owned();
        // Reversing the column order keeps the span.
        let mut r = q.clone();
        for j in 0..st.k {
            r.set_column(j, &q.column(st.k - 1 - j));
        }
        let a = sin_theta_exact(&svd, &q).unwrap();
        let b = sin_theta_exact(&svd, &r).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&a));
        prop_assert!((a - b).abs() <= 1e-13);
    }
}
