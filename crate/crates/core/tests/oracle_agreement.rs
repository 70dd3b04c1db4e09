//! The analytic rate against brute-force entropy maximization.

use hdqkd_core::asymptotic::{
    max_tolerable_q, rate_general, rate_max_mubs, rate_two_mubs, solve_eta, BasisPolicy,
};
use hdqkd_core::bell::{error_rate_xzk, error_rate_z, ErrorRateSet};
use hdqkd_core::oracle::{
    oracle_rate, project_to_feasible_interior, solve, solve_from, ConstrainedProblem,
};
use hdqkd_core::weyl::max_num_mubs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICY: BasisPolicy = BasisPolicy::Guaranteed;

#[test]
fn symmetric_grid_agreement() {
    for d in [2usize, 3, 5] {
        for m in 2..=(d + 1).min(max_num_mubs(d)) {
            let qmax = max_tolerable_q(d, m, POLICY).unwrap();
            for i in 1..=5 {
                let q = 0.8 * qmax * i as f64 / 5.0;
                let rates = ErrorRateSet::symmetric(d, m, q).unwrap();
                let analytic = rate_general(&rates, POLICY).unwrap();
                let oracle = oracle_rate(&ConstrainedProblem::new(&rates)).unwrap();
                assert!(
                    (analytic - oracle).abs() < 1e-6,
                    "d={d} m={m} q={q}: {analytic} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn asymmetric_agreement() {
    let cases: &[(usize, &[f64])] = &[
        (3, &[0.03, 0.07]),
        (3, &[0.02, 0.05, 0.04]),
        (3, &[0.03, 0.02, 0.04, 0.03]),
        (5, &[0.04, 0.03, 0.035, 0.045]),
        (5, &[0.10, 0.05]),
        (7, &[0.02, 0.03, 0.025]),
    ];
    for (d, qs) in cases {
        let rates = ErrorRateSet::new(*d, qs.to_vec()).unwrap();
        let analytic = rate_general(&rates, POLICY).unwrap();
        let oracle = oracle_rate(&ConstrainedProblem::new(&rates)).unwrap();
        assert!(
            (analytic - oracle).abs() < 1e-6,
            "d={d} Q={qs:?}: {analytic} vs {oracle}"
        );
    }
    let r = ErrorRateSet::new(3, vec![0.07, 0.03]).unwrap();
    let closed = rate_two_mubs(3, 0.03, 0.07).unwrap();
    assert!((oracle_rate(&ConstrainedProblem::new(&r)).unwrap() - closed).abs() < 1e-6);
}

#[test]
fn max_bases_agreement() {
    let rates = ErrorRateSet::symmetric(5, 6, 0.05).unwrap();
    let closed = rate_max_mubs(5, rates.rates()).unwrap();
    let oracle = oracle_rate(&ConstrainedProblem::new(&rates)).unwrap();
    assert!((closed - oracle).abs() < 1e-6);
}

#[test]
fn oracle_lambda_matches_pattern() {
    for (d, m, q) in [
        (2usize, 3usize, 0.05),
        (3, 2, 0.08),
        (5, 3, 0.05),
        (5, 4, 0.07),
    ] {
        let rates = ErrorRateSet::symmetric(d, m, q).unwrap();
        let sol = solve_eta(&rates, POLICY).unwrap();
        let grid = sol.lambda_grid();
        let problem = ConstrainedProblem::new(&rates);
        let found = solve(&problem).unwrap();
        let diff = found
            .lambda
            .as_slice()
            .iter()
            .zip(&grid)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "d={d} m={m}: {diff}");
        assert!(found.constraint_residual < 1e-8);
        assert!(found.lambda.as_slice().iter().all(|&x| x >= -1e-10));
        // reproduces the requested rates
        assert!((error_rate_z(&found.lambda) - q).abs() < 1e-8);
        for k in 0..m - 1 {
            assert!((error_rate_xzk(&found.lambda, k) - q).abs() < 1e-8);
        }
    }
}

#[test]
fn restarts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (d, qs) in [
        (3usize, vec![0.05, 0.06]),
        (5, vec![0.05, 0.05, 0.05]),
        (5, vec![0.04, 0.03, 0.035, 0.045]),
    ] {
        let rates = ErrorRateSet::new(d, qs).unwrap();
        let problem = ConstrainedProblem::new(&rates);
        let reference = solve(&problem).unwrap();
        let ref_rate = (d as f64).log2() - hdqkd_core::bell::von_neumann_entropy(&reference.lambda);
        let mut used = 0;
        for _ in 0..50 {
            if used == 5 {
                break;
            }
            let raw: Vec<f64> = (0..d * d).map(|_| rng.gen::<f64>()).collect();
            let Some(start) = project_to_feasible_interior(&problem, &raw).unwrap() else {
                continue;
            };
            used += 1;
            let sol = solve_from(&problem, &start).unwrap();
            let rate = (d as f64).log2() - hdqkd_core::bell::von_neumann_entropy(&sol.lambda);
            assert!(
                (rate - ref_rate).abs() < 1e-7,
                "d={d}: {rate} vs {ref_rate}"
            );
        }
        assert_eq!(used, 5, "could not find five interior starts for d={d}");
    }
}

#[test]
fn infeasible_constraints_reported() {
    // each set shares λ00 and together they cover the grid: Σ(1 - Q_i) = 0.3 < 1
    let rates = ErrorRateSet::new(2, vec![0.9, 0.9, 0.9]).unwrap();
    assert!(rate_general(&rates, POLICY).is_err());
    assert!(oracle_rate(&ConstrainedProblem::new(&rates)).is_err());
    // all coefficients pinned and λ_Z = (q - Q_Z)/(d - 1) < 0
    let pinned = ErrorRateSet::new(3, vec![0.05, 0.02, 0.04, 0.03]).unwrap();
    assert!(rate_general(&pinned, POLICY).is_err());
    assert!(oracle_rate(&ConstrainedProblem::new(&pinned)).is_err());
}
