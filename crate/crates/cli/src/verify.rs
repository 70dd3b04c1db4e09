//! Self-checks run by `verify`. Each suite collects named failures rather
//! than stopping at the first one.

use std::time::Instant;

use hdqkd_core::asymptotic::{
    max_tolerable_q, rate_general, rate_max_mubs, rate_max_mubs_symmetric, rate_symmetric,
    rate_two_mubs, BasisPolicy,
};
use hdqkd_core::bell::{
    error_rate_in_basis, lambda_from_state, max_bell_offdiagonal, symmetrize, BellDiagonalState,
    DensityMatrix, ErrorRateSet,
};
use hdqkd_core::finite::{
    aep_rate, coherent_rate, eur_rate, mu_correction, postselection_damping, EpsMode,
    FiniteScenario, SecuritySplit,
};
use hdqkd_core::oracle::{solve, ConstrainedProblem};
use hdqkd_core::weyl::{
    check_mutually_unbiased, clock_op, computational_basis, is_prime, mub_basis, shift_op, weyl_op,
    DenseOperator, StateVector,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::args::{Fault, Level};

const POLICY: BasisPolicy = BasisPolicy::Guaranteed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.failures.is_empty())
    }

    pub fn first_failure(&self) -> Option<String> {
        self.suites
            .iter()
            .find_map(|s| s.failures.first().map(|f| format!("{}: {f}", s.name)))
    }
}

struct Suite {
    name: &'static str,
    checks: usize,
    failures: Vec<String>,
    start: Instant,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: Vec::new(),
            start: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            checks: self.checks,
            failures: self.failures,
            seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

struct Plan {
    dims: Vec<usize>,
    states_per_dim: usize,
    q_points: usize,
}

impl Plan {
    fn for_level(level: Level) -> Self {
        match level {
            Level::Quick => Plan {
                dims: vec![2, 3],
                states_per_dim: 5,
                q_points: 3,
            },
            Level::Full => Plan {
                dims: vec![2, 3, 5, 7],
                states_per_dim: 20,
                q_points: 5,
            },
        }
    }
}

pub fn run(level: Level, seed: u64, fault: Option<Fault>) -> VerifyReport {
    let plan = Plan::for_level(level);
    let suites = vec![
        weyl_suite(&plan),
        twirl_suite(&plan, seed),
        closed_form_suite(&plan),
        oracle_suite(&plan, fault),
        threshold_suite(),
        finite_suite(&plan),
    ];
    VerifyReport {
        level,
        seed,
        suites,
    }
}

fn residual(op: &DenseOperator, v: &StateVector) -> f64 {
    let av = op.apply(v);
    let eig = v.inner(&av);
    (av.amplitudes() - v.amplitudes() * eig).norm()
}

fn weyl_suite(plan: &Plan) -> SuiteResult {
    let mut s = Suite::new("weyl");
    for &d in &plan.dims {
        let x = shift_op(d).unwrap();
        let z = clock_op(d).unwrap();
        let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
        let zx = z.compose(&x).into_matrix();
        let xz = x.compose(&z).into_matrix() * omega;
        s.check((zx - xz).camax() < 1e-12, || format!("d={d}: ZX = ωXZ"));
        s.check(
            x.pow(d).max_abs_diff(&DenseOperator::identity(d)) < 1e-12,
            || format!("d={d}: X^d = 1"),
        );
        s.check(
            z.pow(d).max_abs_diff(&DenseOperator::identity(d)) < 1e-12,
            || format!("d={d}: Z^d = 1"),
        );
        if !is_prime(d) {
            continue;
        }
        let mut bases = vec![computational_basis(d).unwrap()];
        for k in 0..d {
            bases.push(mub_basis(d, k).unwrap());
            let op = weyl_op(d, 1, k).unwrap();
            let worst = bases[k + 1]
                .iter()
                .map(|v| residual(&op, v))
                .fold(0.0, f64::max);
            s.check(worst < 1e-10, || {
                format!("d={d} k={k}: eigen-residual {worst:e}")
            });
        }
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                let dev = check_mutually_unbiased(&bases[i], &bases[j]).unwrap();
                s.check(dev < 1e-10, || {
                    format!("d={d}: bases {i},{j} deviate by {dev:e}")
                });
            }
        }
    }
    s.finish()
}

fn wishart(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let n = d * d;
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    DensityMatrix::from_factor(d, &g).expect("nonzero factor")
}

fn twirl_suite(plan: &Plan, seed: u64) -> SuiteResult {
    let mut s = Suite::new("twirl");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &d in &plan.dims {
        let mut bases = vec![computational_basis(d).unwrap()];
        if is_prime(d) {
            for k in 0..d {
                bases.push(mub_basis(d, k).unwrap());
            }
        }
        for i in 0..plan.states_per_dim {
            let rho = wishart(d, &mut rng);
            let tw = symmetrize(&rho).unwrap();
            let off = max_bell_offdiagonal(&tw).unwrap();
            s.check(off < 1e-10, || {
                format!("d={d} state {i}: off-diagonal {off:e}")
            });
            let drift = symmetrize(&tw).unwrap().max_abs_diff(&tw);
            s.check(drift < 1e-12, || {
                format!("d={d} state {i}: twirl not idempotent ({drift:e})")
            });
            for (b, basis) in bases.iter().enumerate() {
                let delta = (error_rate_in_basis(&rho, basis).unwrap()
                    - error_rate_in_basis(&tw, basis).unwrap())
                .abs();
                s.check(delta < 1e-10, || {
                    format!("d={d} state {i} basis {b}: rate moved by {delta:e}")
                });
            }
            let lam = lambda_from_state(&tw);
            s.check(lam.is_ok(), || {
                format!("d={d} state {i}: λ extraction failed")
            });
        }
    }
    s.finish()
}

fn closed_form_suite(plan: &Plan) -> SuiteResult {
    let mut s = Suite::new("closed-forms");
    for &d in &plan.dims {
        for i in 0..20 {
            let qx = 0.2 * i as f64 / 19.0;
            let qz = 0.1;
            let general =
                rate_general(&ErrorRateSet::new(d, vec![qz, qx]).unwrap(), POLICY).unwrap();
            let closed = rate_two_mubs(d, qx, qz).unwrap();
            s.check((general - closed).abs() < 1e-10, || {
                format!("d={d} two bases Q=({qx},{qz})")
            });
            if is_prime(d) {
                let q = 0.25 * i as f64 / 19.0;
                let rates = ErrorRateSet::symmetric(d, d + 1, q).unwrap();
                let general = rate_general(&rates, POLICY).unwrap();
                let a = rate_max_mubs(d, rates.rates()).unwrap();
                let b = rate_max_mubs_symmetric(d, q).unwrap();
                s.check((general - a).abs() < 1e-10 && (a - b).abs() < 1e-10, || {
                    format!("d={d} all bases Q={q}")
                });
            }
        }
    }
    s.finish()
}

/// Largest equality violation and most negative entry.
fn lambda_defects(problem: &ConstrainedProblem, lam: &[f64]) -> (f64, f64) {
    let total: f64 = lam.iter().sum();
    let res = problem.constraint_residual(lam).max((total - 1.0).abs());
    let neg = lam.iter().copied().fold(0.0, f64::min);
    (res, neg)
}

fn oracle_suite(plan: &Plan, fault: Option<Fault>) -> SuiteResult {
    let mut s = Suite::new("oracle");
    for &d in &plan.dims {
        if !is_prime(d) {
            continue;
        }
        for m in 2..=d + 1 {
            let qmax = max_tolerable_q(d, m, POLICY).unwrap();
            for i in 1..=plan.q_points {
                let q = 0.8 * qmax * i as f64 / plan.q_points as f64;
                let rates = ErrorRateSet::symmetric(d, m, q).unwrap();
                let problem = ConstrainedProblem::new(&rates);
                let sol = match solve(&problem) {
                    Ok(sol) => sol,
                    Err(e) => {
                        s.check(false, || format!("d={d} m={m} q={q}: {e}"));
                        continue;
                    }
                };
                let mut lam = sol.lambda.as_slice().to_vec();
                if fault == Some(Fault::CorruptLambda) {
                    lam[1] += 0.05;
                }
                let (res, neg) = lambda_defects(&problem, &lam);
                s.check(res < 1e-8 && neg >= -1e-10, || {
                    format!("d={d} m={m} q={q}: λ* violates constraints (residual {res:e}, min {neg:e})")
                });
                let oracle = match BellDiagonalState::new_unchecked(d, lam) {
                    Ok(b) => (d as f64).log2() - hdqkd_core::bell::von_neumann_entropy(&b),
                    Err(_) => f64::NAN,
                };
                let analytic = rate_general(&rates, POLICY).unwrap();
                let gap = (oracle - analytic).abs();
                s.check(gap < 1e-6, || {
                    format!("d={d} m={m} q={q}: oracle and analytic differ by {gap:e}")
                });
            }
        }
    }
    s.finish()
}

fn threshold_suite() -> SuiteResult {
    let mut s = Suite::new("thresholds");
    let bb84 = max_tolerable_q(2, 2, POLICY).unwrap();
    s.check((bb84 - 0.1100).abs() < 5e-4, || {
        format!("Q_max(2,2) = {bb84}")
    });
    let six = max_tolerable_q(2, 3, POLICY).unwrap();
    s.check((six - 0.1262).abs() < 5e-4, || {
        format!("Q_max(2,3) = {six}")
    });
    let q5: Vec<f64> = (2..=6)
        .map(|m| max_tolerable_q(5, m, POLICY).unwrap())
        .collect();
    let steps: Vec<f64> = q5.windows(2).map(|w| w[1] - w[0]).collect();
    s.check(steps.iter().all(|&x| x > 0.0), || {
        format!("Q_max(5,m) not increasing: {q5:?}")
    });
    s.check(steps.windows(2).all(|w| w[1] < w[0]), || {
        format!("Q_max(5,m) steps not shrinking: {steps:?}")
    });
    s.finish()
}

fn finite_suite(plan: &Plan) -> SuiteResult {
    let mut s = Suite::new("finite");
    let mu = mu_correction(1_000_000, 100_000, 900_000, 2, 1e-12).unwrap();
    s.check((mu - 0.024_779_729_052_572_55).abs() < 1e-14, || {
        format!("mu reference {mu}")
    });
    let damp = postselection_damping(5, 1_000_000_000);
    s.check((damp - 3.731_189_636_357_534e-5).abs() < 1e-15, || {
        format!("damping reference {damp}")
    });
    let split = SecuritySplit::from_weights(1e-10f64.log2(), [0.3, 0.3, 0.4]).unwrap();
    for &d in &plan.dims {
        let big = 1_000_000_000_000_000u64;
        let sc = FiniteScenario::new(big, big / 1000, d, 2, 0.03);
        let eur = eur_rate(&sc, &split).unwrap().rate;
        let asym = rate_two_mubs(d, 0.03, 0.03).unwrap();
        s.check((eur - asym).abs() < 5e-3, || {
            format!("d={d}: EUR limit {eur} vs {asym}")
        });
        let aep = aep_rate(&sc, &split).unwrap().rate;
        let asym = rate_symmetric(d, 2, 0.03, POLICY).unwrap();
        s.check((aep - asym).abs() < 5e-3, || {
            format!("d={d}: AEP limit {aep} vs {asym}")
        });

        let sc = FiniteScenario::new(100_000_000, 2_000_000, d, 2, 0.03);
        let col = aep_rate(&sc, &split).unwrap();
        let coh = coherent_rate(&sc, &split, EpsMode::FixedEps).unwrap();
        if col.feasible && coh.feasible {
            let exact = col.rate - postselection_damping(d, sc.n_total);
            s.check(coh.rate.to_bits() == exact.to_bits(), || {
                format!("d={d}: fixed-eps damping not exact")
            });
        }
        let tiny = FiniteScenario::new(1000, 100, d, 2, 0.05);
        let r = eur_rate(&tiny, &split).unwrap();
        s.check(!r.feasible && r.rate == 0.0, || {
            format!("d={d}: N=1000 should be infeasible")
        });
    }
    s.finish()
}
