use hdqkd_core::asymptotic::{
    max_tolerable_q, rate_general, rate_max_mubs, rate_max_mubs_symmetric, rate_symmetric,
    rate_two_mubs, solve_eta, BasisPolicy,
};
use hdqkd_core::bell::{BellDiagonalState, ErrorRateSet};
use proptest::prelude::*;

const POLICY: BasisPolicy = BasisPolicy::Guaranteed;

#[test]
fn two_bases_match_closed_form_on_grid() {
    for d in [2usize, 3, 5, 7, 11] {
        for i in 0..20 {
            let qx = 0.2 * i as f64 / 19.0;
            let qz = 0.15 * (19 - i) as f64 / 19.0;
            let rates = ErrorRateSet::new(d, vec![qz, qx]).unwrap();
            let general = rate_general(&rates, POLICY).unwrap();
            let closed = rate_two_mubs(d, qx, qz).unwrap();
            assert!(
                (general - closed).abs() < 1e-10,
                "d={d} {qx} {qz}: {general} {closed}"
            );
        }
    }
}

#[test]
fn max_bases_match_closed_form_on_grid() {
    for d in [2usize, 3, 5, 7] {
        for i in 0..20 {
            let q = 0.3 * i as f64 / 19.0 * d as f64 / (d + 1) as f64;
            let rates = ErrorRateSet::symmetric(d, d + 1, q).unwrap();
            let general = rate_general(&rates, POLICY).unwrap();
            assert!((general - rate_max_mubs_symmetric(d, q).unwrap()).abs() < 1e-10);
            assert!((general - rate_max_mubs(d, rates.rates()).unwrap()).abs() < 1e-10);
        }
        // asymmetric, all pinned
        for i in 0..20 {
            let base = 0.01 + 0.004 * i as f64;
            let qs: Vec<f64> = (0..=d).map(|j| base * (1.0 + 0.05 * j as f64)).collect();
            let rates = ErrorRateSet::new(d, qs.clone()).unwrap();
            match rate_max_mubs(d, &qs) {
                Ok(closed) => {
                    let general = rate_general(&rates, POLICY).unwrap();
                    assert!((general - closed).abs() < 1e-10);
                }
                Err(_) => assert!(rate_general(&rates, POLICY).is_err()),
            }
        }
    }
}

#[test]
fn qubit_thresholds() {
    let bb84 = max_tolerable_q(2, 2, POLICY).unwrap();
    let six = max_tolerable_q(2, 3, POLICY).unwrap();
    assert!((bb84 - 0.1100).abs() < 5e-4);
    assert!((six - 0.1262).abs() < 5e-4);
}

#[test]
fn thresholds_grow_with_bases_with_shrinking_steps() {
    let q: Vec<f64> = (2..=6)
        .map(|m| max_tolerable_q(5, m, POLICY).unwrap())
        .collect();
    let steps: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|&s| s > 0.0), "{q:?}");
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "{steps:?}");
}

#[test]
fn thresholds_grow_with_dimension() {
    let primes = [2usize, 3, 5, 7, 11];
    for m_of in [|_: usize| 2usize, |d: usize| d + 1] {
        let q: Vec<f64> = primes
            .iter()
            .map(|&d| max_tolerable_q(d, m_of(d), POLICY).unwrap())
            .collect();
        assert!(q.windows(2).all(|w| w[1] > w[0]), "{q:?}");
    }
}

#[test]
fn large_dimension_diminishing_returns() {
    let d = 47;
    let q = 0.2;
    let rates: Vec<f64> = [2usize, 3, 6, 12, 24, 48]
        .iter()
        .map(|&m| rate_symmetric(d, m, q, POLICY).unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
    // gain per added basis shrinks
    let per_basis: Vec<f64> = [2usize, 3, 6, 12, 24, 48]
        .windows(2)
        .zip(rates.windows(2))
        .map(|(m, r)| (r[1] - r[0]) / (m[1] - m[0]) as f64)
        .collect();
    assert!(per_basis.windows(2).all(|w| w[1] < w[0]), "{per_basis:?}");
}

#[test]
fn zero_error_rate_is_log_d() {
    for (d, m) in [(2usize, 2usize), (5, 2), (5, 6), (7, 4)] {
        let r = rate_symmetric(d, m, 0.0, POLICY).unwrap();
        assert!((r - (d as f64).log2()).abs() < 1e-14);
    }
}

fn dm_strategy() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![Just(2usize), Just(3), Just(5), Just(7)].prop_flat_map(|d| (Just(d), 2..=d + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_decreases_in_q((d, m) in dm_strategy(), a in 0.0f64..0.3, b in 0.0f64..0.3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let r_lo = rate_symmetric(d, m, lo, POLICY).unwrap();
        let r_hi = rate_symmetric(d, m, hi, POLICY).unwrap();
        prop_assert!(r_hi < r_lo + 1e-12);
    }

    #[test]
    fn pattern_reproduces_rates((d, m) in dm_strategy(), q in 0.0f64..0.2) {
        let rates = ErrorRateSet::symmetric(d, m, q).unwrap();
        let sol = solve_eta(&rates, POLICY).unwrap();
        let lam = BellDiagonalState::new(d, sol.lambda_grid()).unwrap();
        let back = ErrorRateSet::from_lambda(&lam, m).unwrap();
        for (x, y) in back.rates().iter().zip(rates.rates()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn more_bases_never_hurt(d in prop_oneof![Just(3usize), Just(5), Just(7)], q in 0.0f64..0.15) {
        let mut prev = f64::NEG_INFINITY;
        for m in 2..=d + 1 {
            let r = rate_symmetric(d, m, q, POLICY).unwrap();
            prop_assert!(r >= prev - 1e-12);
            prev = r;
        }
    }
}
