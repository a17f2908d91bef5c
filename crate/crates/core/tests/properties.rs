//! Randomized property tests complementing the unit suites: closed forms
//! against exhaustive enumeration, oracle agreement, symmetries, file-format
//! round trips, and fit invariances.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rbcorr::fitting::{self, FitScenario};
use rbcorr::noise::{self, NoiseModel};
use rbcorr::partition::{self, ExpansionOrder};
use rbcorr::qudit::WeightSystem;
use rbcorr::twirl;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn uncorrelated_closed_form_matches_enumeration(
        n in 1usize..=7,
        beta in 1e-4f64..0.2,
        theta0 in -1.2f64..1.2,
    ) {
        let model = NoiseModel::uncorrelated(n, beta, theta0).unwrap();
        let bf = partition::z_bruteforce(&model).unwrap();
        let cf = partition::z_uncorrelated_exact(n, beta, theta0).unwrap();
        prop_assert!((bf.z - cf.z).abs() <= 1e-12 * cf.z.abs().max(1e-3));
    }

    #[test]
    fn quasistatic_closed_form_matches_enumeration(
        n in 1usize..=7,
        beta in 1e-4f64..0.2,
        theta0 in -1.2f64..1.2,
    ) {
        let model = NoiseModel::quasistatic(n, beta, theta0).unwrap();
        let bf = partition::z_bruteforce(&model).unwrap();
        let cf = partition::z_quasistatic_exact(n, beta, theta0).unwrap();
        prop_assert!((bf.z - cf.z).abs() <= 1e-12 * cf.z.abs().max(1e-3));
    }

    #[test]
    fn quadrature_oracle_matches_trinomial_series(
        n in 1usize..=300,
        beta in 1e-3f64..0.05,
        theta0 in -0.5f64..0.5,
    ) {
        let exact = partition::z_quasistatic_exact(n, beta, theta0).unwrap();
        let oracle = partition::quadrature_oracle(n, beta, theta0).unwrap();
        prop_assert!((exact.z - oracle.z).abs() <= 1e-10 * oracle.z.abs().max(1e-6));
    }

    #[test]
    fn partition_sum_is_bounded(
        n in 1usize..=5000,
        beta in 0.0f64..0.5,
        theta0 in -3.0f64..3.0,
    ) {
        let u = partition::z_uncorrelated_exact(n, beta, theta0).unwrap();
        let q = partition::z_quasistatic_exact(n, beta, theta0).unwrap();
        prop_assert!(u.z.abs() <= 1.0 + 1e-12);
        prop_assert!(q.z.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn closed_forms_are_even_in_theta0(
        n in 1usize..=2000,
        beta in 0.0f64..0.3,
        theta0 in 0.0f64..2.0,
    ) {
        let up = partition::z_uncorrelated_exact(n, beta, theta0).unwrap();
        let um = partition::z_uncorrelated_exact(n, beta, -theta0).unwrap();
        prop_assert_eq!(up.z, um.z);
        let qp = partition::z_quasistatic_exact(n, beta, theta0).unwrap();
        let qm = partition::z_quasistatic_exact(n, beta, -theta0).unwrap();
        prop_assert_eq!(qp.z, qm.z);
    }

    #[test]
    fn determinant_structured_paths_match_dense(
        n in 1usize..=40,
        beta in 1e-3f64..0.08,
        theta0 in -0.8f64..0.8,
    ) {
        for order in [ExpansionOrder::Leading, ExpansionOrder::WithCorrections] {
            let mu = NoiseModel::uncorrelated(n, beta, theta0).unwrap();
            let dense = partition::z_determinant(&mu, order).unwrap();
            let fast =
                partition::z_determinant_uncorrelated(n, beta, theta0, order).unwrap();
            prop_assert!((dense.z - fast.z).abs() <= 1e-10 * fast.z.abs());

            let mq = NoiseModel::quasistatic(n, beta, theta0).unwrap();
            let dense = partition::z_determinant(&mq, order).unwrap();
            let fast =
                partition::z_determinant_quasistatic(n, beta, theta0, order).unwrap();
            prop_assert!((dense.z - fast.z).abs() <= 1e-10 * fast.z.abs());
        }
    }

    #[test]
    fn covariance_csv_round_trips(
        n in 1usize..=6,
        theta0 in -1.0f64..1.0,
        seed in any::<[f64; 36]>(),
    ) {
        let m = DMatrix::from_fn(n, n, |i, j| {
            let v = seed[i * 6 + j];
            if v.is_finite() { (v % 1.0) * 0.3 } else { 0.1 }
        });
        let model = NoiseModel::new(theta0, &m * m.transpose()).unwrap();
        let mut buf = Vec::new();
        noise::write_covariance_csv(&model, &mut buf).unwrap();
        let back = noise::read_covariance_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.theta0(), model.theta0());
        prop_assert_eq!(back.covariance(), model.covariance());
    }

    #[test]
    fn weight_system_invariants(d in 2usize..=6) {
        let ws = WeightSystem::build(d).unwrap();
        prop_assert_eq!(ws.weights().len(), d * d - 1);
        // every weight sums to zero across components (traceless generators)
        for w in ws.weights() {
            prop_assert_eq!(w.iter().sum::<i32>(), 0);
        }
        // zero phases leave every rotation trivial
        prop_assert!((ws.adjoint_scalar(&vec![0.0; d]) - 1.0).abs() <= 1e-15);
        // a global phase shift is a gauge transformation
        let phases: Vec<f64> = (0..d).map(|i| 0.1 * i as f64).collect();
        let shifted: Vec<f64> = phases.iter().map(|p| p + 0.7).collect();
        let a = ws.adjoint_scalar(&phases);
        let b = ws.adjoint_scalar(&shifted);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn equal_phases_give_exact_twirl(d in 2usize..=4, phi in -2.0f64..2.0) {
        let (est, se) = twirl::haar_verify(d, &vec![phi; d], 100, 7).unwrap();
        prop_assert_eq!(est, 1.0);
        prop_assert_eq!(se, 0.0);
    }
}

/// The fit decay constant depends on noise strength and sequence length only
/// through their product scale: shrinking `beta` tenfold while extending the
/// length window tenfold leaves `K` nearly unchanged.
#[test]
fn fit_k_is_scale_near_invariant() {
    let s = FitScenario::numbered(1).unwrap();
    let d1 = fitting::generate_quasistatic_data(0.01, 150).unwrap();
    let r1 = fitting::fit_exponential(&d1, s, 0.01 / 3.0, 150).unwrap();
    let d2 = fitting::generate_quasistatic_data(0.001, 1500).unwrap();
    let r2 = fitting::fit_exponential(&d2, s, 0.001 / 3.0, 1500).unwrap();
    assert!(
        (r1.k / r2.k - 1.0).abs() <= 0.01,
        "K not scale invariant: {} vs {}",
        r1.k,
        r2.k
    );
}

/// The constrained-scenario objective is unimodal over the searched range: a
/// brute-force scan of `K` never beats the refined optimum.
#[test]
fn fixed_ab_fit_beats_coarse_scan() {
    let data = fitting::generate_quasistatic_data(0.01, 300).unwrap();
    for s in [1usize, 2] {
        let rep = fitting::fit_exponential(&data, FitScenario::numbered(s).unwrap(), 0.01 / 3.0, 300)
            .unwrap();
        for i in 1..400 {
            let k = 0.05 + (20.0 - 0.05) * i as f64 / 400.0;
            let mut sum = 0.0;
            for &(n, p0) in &data {
                let w = if s == 1 { 1.0 } else { 1.0 / n as f64 };
                let model = 0.5 + 0.5 * (1.0 - 2.0 * k * 0.01 / 3.0).powi(n as i32);
                sum += (p0 - model) * (p0 - model) * w;
            }
            assert!(
                rep.objective_value <= sum + 1e-15,
                "scan found a better K={k} for scenario {s}"
            );
        }
    }
}
