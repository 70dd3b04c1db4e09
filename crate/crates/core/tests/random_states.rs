//! Twirl and Bell-basis checks on seeded random (Wishart) states.

use hdqkd_core::bell::{
    error_rate_in_basis, error_rate_xzk, error_rate_z, lambda_from_state, max_bell_offdiagonal,
    reconstruct_from_weyl, state_from_lambda, symmetrize, BellDiagonalState, DensityMatrix,
};
use hdqkd_core::weyl::{computational_basis, max_num_mubs, mub_basis};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const STATES_PER_DIM: usize = 20;

fn wishart(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let n = d * d;
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    DensityMatrix::from_factor(d, &g).unwrap()
}

fn seeded(d: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + d as u64)
}

#[test]
fn wishart_states_are_valid() {
    let mut rng = seeded(3);
    for _ in 0..5 {
        wishart(3, &mut rng).validate().unwrap();
    }
}

#[test]
fn twirl_output_is_bell_diagonal_and_idempotent() {
    for d in [2, 3, 5] {
        let mut rng = seeded(d);
        for _ in 0..STATES_PER_DIM {
            let rho = wishart(d, &mut rng);
            let tw = symmetrize(&rho).unwrap();
            assert!(max_bell_offdiagonal(&tw).unwrap() < 1e-10);
            assert!(symmetrize(&tw).unwrap().max_abs_diff(&tw) < 1e-12);
            // twirl preserves trace and positivity
            tw.validate().unwrap();
        }
    }
}

#[test]
fn twirl_preserves_error_rates() {
    for d in [2, 3, 5] {
        let mut rng = seeded(d);
        let mut bases = vec![computational_basis(d).unwrap()];
        for k in 0..max_num_mubs(d) - 1 {
            bases.push(mub_basis(d, k).unwrap());
        }
        for _ in 0..STATES_PER_DIM {
            let rho = wishart(d, &mut rng);
            let tw = symmetrize(&rho).unwrap();
            for basis in &bases {
                let before = error_rate_in_basis(&rho, basis).unwrap();
                let after = error_rate_in_basis(&tw, basis).unwrap();
                assert!((before - after).abs() < 1e-10, "d={d}: {before} vs {after}");
            }
        }
    }
}

#[test]
fn lambda_rates_match_basis_measurements() {
    for d in [2, 3, 5] {
        let mut rng = seeded(d);
        for _ in 0..STATES_PER_DIM / 4 {
            let tw = symmetrize(&wishart(d, &mut rng)).unwrap();
            let lam = lambda_from_state(&tw).unwrap();
            let qz = error_rate_in_basis(&tw, &computational_basis(d).unwrap()).unwrap();
            assert!((qz - error_rate_z(&lam)).abs() < 1e-10);
            for k in 0..d {
                let q = error_rate_in_basis(&tw, &mub_basis(d, k).unwrap()).unwrap();
                assert!((q - error_rate_xzk(&lam, k)).abs() < 1e-10, "d={d} k={k}");
            }
        }
    }
}

#[test]
fn weyl_reconstruction_matches_twirl() {
    for d in [2, 3, 5] {
        let mut rng = seeded(d);
        for _ in 0..STATES_PER_DIM / 4 {
            let rho = wishart(d, &mut rng);
            let tw = symmetrize(&rho).unwrap();
            let rebuilt = reconstruct_from_weyl(&rho).unwrap();
            assert!(rebuilt.max_abs_diff(&tw) < 1e-10);
        }
    }
}

#[test]
fn lambda_round_trip_on_random_simplex() {
    let d = 5;
    let mut rng = seeded(99);
    for _ in 0..STATES_PER_DIM {
        let raw: Vec<f64> = (0..d * d).map(|_| -rng.gen::<f64>().ln()).collect();
        let total: f64 = raw.iter().sum();
        let lam = BellDiagonalState::new(d, raw.iter().map(|x| x / total).collect()).unwrap();
        let back = lambda_from_state(&state_from_lambda(&lam).unwrap()).unwrap();
        assert!(back.max_abs_diff(&lam) < 1e-12);
    }
}
