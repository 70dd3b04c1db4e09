//! Brute-force entropy maximization over Bell coefficients.
//!
//! Maximizes `-Σ λ log λ` over all `d²` coefficients subject to
//! normalization, nonnegativity and one linear equality per measured
//! error rate. Nothing here knows about the symmetric structure of the
//! optimum; the module exists to check [`crate::asymptotic`] against an
//! independent computation.
//!
//! The main path is a feasible-start Newton method on the affine
//! constraint set, started from a strictly interior point obtained by
//! projecting onto `{Aλ = b, λ ≥ floor}` (semismooth Newton on the dual,
//! Dykstra's alternating projections as fallback). Coefficients forced to zero by a
//! constraint with right-hand side 0 or 1 are eliminated first. When no
//! strictly interior point exists (other forced zeros), projected
//! gradient ascent with backtracking takes over.

use nalgebra::{DMatrix, DVector};

use crate::bell::{entropy_bits, BellDiagonalState, ErrorRateSet};
use crate::error::{Error, Result};

/// Default tolerance on the equality constraints.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Default iteration cap shared by all inner loops.
pub const MAX_ITERATIONS: usize = 200_000;

/// Linear constraints on the `d²` Bell coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    pub d: usize,
    pub m: usize,
    pub rates: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// How the returned optimum was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Newton,
    ProjectedGradient,
    /// Constraints leave a single feasible point.
    Pinned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub lambda: BellDiagonalState,
    pub iterations: usize,
    /// Largest violation of the equality constraints.
    pub constraint_residual: f64,
    /// Norm of the entropy gradient projected onto the feasible directions
    /// of the free coefficients.
    pub stationarity: f64,
    pub method: OracleMethod,
}

impl ConstrainedProblem {
    pub fn new(rates: &ErrorRateSet) -> Self {
        Self {
            d: rates.dim(),
            m: rates.num_bases(),
            rates: rates.rates().to_vec(),
            tolerance: CONSTRAINT_TOL,
            max_iterations: MAX_ITERATIONS,
        }
    }

    /// Flattened indices `α d + β` entering each measured rate:
    /// `{(0,α)}` for Q_Z and `{(α, kα)}` for `Q_{XZ^k}`.
    pub fn constraint_sets(&self) -> Vec<Vec<usize>> {
        let d = self.d;
        let mut sets = vec![(0..d).collect::<Vec<_>>()];
        for k in 0..self.m - 1 {
            sets.push((0..d).map(|a| a * d + (k * a) % d).collect());
        }
        sets
    }

    /// Coefficients that enter no measured rate.
    pub fn unconstrained_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.d * self.d];
        for set in self.constraint_sets() {
            for i in set {
                seen[i] = true;
            }
        }
        (0..self.d * self.d).filter(|&i| !seen[i]).collect()
    }

    /// Dense constraint matrix (rate rows, then normalization) and
    /// right-hand side.
    fn system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.d * self.d;
        let sets = self.constraint_sets();
        let rows = sets.len() + 1;
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        for (r, set) in sets.iter().enumerate() {
            for &i in set {
                a[(r, i)] = 1.0;
            }
            b[r] = 1.0 - self.rates[r];
        }
        for i in 0..n {
            a[(rows - 1, i)] = 1.0;
        }
        b[rows - 1] = 1.0;
        (a, b)
    }

    /// Largest `|A λ − b|` for a full coefficient vector.
    pub fn constraint_residual(&self, lambda: &[f64]) -> f64 {
        let (a, b) = self.system();
        let x = DVector::from_column_slice(lambda);
        (a * x - b).amax()
    }
}

/// Free coefficients after eliminating structurally forced zeros, with
/// the constraint system restricted to them.
struct Reduced {
    n_full: usize,
    free: Vec<usize>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// Pseudo-inverse of `A Aᵀ`, for affine projections.
    gram_pinv: DMatrix<f64>,
}

impl Reduced {
    fn new(problem: &ConstrainedProblem) -> Result<Self> {
        let (a_full, b_full) = problem.system();
        let n = a_full.ncols();
        let rows = a_full.nrows();
        let mut zero = vec![false; n];
        loop {
            let mut changed = false;
            for r in 0..rows - 1 {
                let rhs = b_full[r];
                for i in 0..n {
                    let inside = a_full[(r, i)] != 0.0;
                    let forced = (rhs <= 0.0 && inside) || (rhs >= 1.0 && !inside);
                    if forced && !zero[i] {
                        zero[i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !zero[i]).collect();
        if free.is_empty() {
            return Err(Error::InfeasibleConstraints(
                "every coefficient forced to zero".into(),
            ));
        }
        let a = DMatrix::from_fn(rows, free.len(), |r, c| a_full[(r, free[c])]);
        let gram = &a * a.transpose();
        let gram_pinv = gram
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InfeasibleConstraints(e.to_string()))?;
        Ok(Self {
            n_full: n,
            free,
            a,
            b: b_full,
            gram_pinv,
        })
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).amax()
    }

    fn project_affine(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = &self.a * x - &self.b;
        x - self.a.transpose() * (&self.gram_pinv * r)
    }

    /// Projection of a direction onto `{Δ : A Δ = 0}`.
    fn project_null(&self, g: &DVector<f64>) -> DVector<f64> {
        g - self.a.transpose() * (&self.gram_pinv * (&self.a * g))
    }

    /// Exact Euclidean projection onto `{A x = b} ∩ {x ≥ floor}` by
    /// semismooth Newton on the dual: `x(μ) = max(floor, y − Aᵀμ)` with
    /// `A x(μ) = b`. Returns `None` if the set is empty or Newton stalls.
    fn project_polyhedron(&self, y: &DVector<f64>, floor: f64, tol: f64) -> Option<DVector<f64>> {
        let rows = self.a.nrows();
        let primal = |mu: &DVector<f64>| (y - self.a.transpose() * mu).map(|v| v.max(floor));
        let dual = |mu: &DVector<f64>, x: &DVector<f64>| {
            0.5 * (x - y).norm_squared() + mu.dot(&(&self.a * x - &self.b))
        };
        let mut mu = DVector::zeros(rows);
        let mut x = primal(&mu);
        for _ in 0..200 {
            let grad = &self.a * &x - &self.b;
            if grad.amax() < tol {
                return Some(x);
            }
            let active = (y - self.a.transpose() * &mu).map(|v| if v > floor { 1.0 } else { 0.0 });
            let hess = &self.a * DMatrix::from_diagonal(&active) * self.a.transpose()
                + DMatrix::identity(rows, rows) * 1e-14;
            let dir = hess.pseudo_inverse(1e-13).ok()? * &grad;
            let theta0 = dual(&mu, &x);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let cand = &mu + &dir * t;
                let xc = primal(&cand);
                if dual(&cand, &xc) >= theta0 + 1e-4 * t * grad.dot(&dir) {
                    mu = cand;
                    x = xc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        ((&self.a * &x - &self.b).amax() < tol).then_some(x)
    }

    /// Polyhedral projection with Dykstra's method as the fallback.
    fn project(
        &self,
        y: &DVector<f64>,
        floor: f64,
        tol: f64,
        max_iter: usize,
    ) -> Option<DVector<f64>> {
        self.project_polyhedron(y, floor, tol)
            .or_else(|| self.dykstra(y, floor, tol, max_iter))
    }

    /// Dykstra's alternating projections onto `{A x = b} ∩ {x ≥ floor}`.
    fn dykstra(
        &self,
        start: &DVector<f64>,
        floor: f64,
        tol: f64,
        max_iter: usize,
    ) -> Option<DVector<f64>> {
        let mut x = start.clone();
        let mut p = DVector::zeros(x.len());
        let mut q = DVector::zeros(x.len());
        for _ in 0..max_iter {
            let y = self.project_affine(&(&x + &p));
            p = &x + &p - &y;
            let shifted = &y + &q;
            let next = shifted.map(|v| v.max(floor));
            q = shifted - &next;
            x = next;
            if self.residual(&x) < tol {
                let exact = self.project_affine(&x);
                if exact.iter().all(|&v| v > 0.0) {
                    return Some(exact);
                }
            }
        }
        None
    }

    fn expand(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full];
        for (c, &i) in self.free.iter().enumerate() {
            full[i] = x[c];
        }
        full
    }

    fn restrict(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| full[i]))
    }
}

fn entropy_nats(x: &DVector<f64>) -> f64 {
    -x.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

fn entropy_grad(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| -(v.max(1e-300)).ln() - 1.0)
}

/// A strictly interior feasible point near `start` (full `d²` vector),
/// or `None` if none was found.
pub fn project_to_feasible_interior(
    problem: &ConstrainedProblem,
    start: &[f64],
) -> Result<Option<Vec<f64>>> {
    let red = Reduced::new(problem)?;
    Ok(interior_point(&red, &red.restrict(start), problem).map(|x| red.expand(&x)))
}

fn interior_point(
    red: &Reduced,
    start: &DVector<f64>,
    problem: &ConstrainedProblem,
) -> Option<DVector<f64>> {
    let n = red.free.len() as f64;
    let mut floor = 0.1 / n;
    for _ in 0..12 {
        if let Some(x) = red.project(start, floor, 1e-13, problem.max_iterations.min(20_000)) {
            if x.iter().all(|&v| v > 0.0) {
                return Some(x);
            }
        }
        floor *= 0.1;
    }
    None
}

fn newton(
    red: &Reduced,
    mut x: DVector<f64>,
    problem: &ConstrainedProblem,
) -> Result<(DVector<f64>, usize)> {
    for it in 0..problem.max_iterations {
        let g = entropy_grad(&x);
        // Δ = D(g − Aᵀw) with (A D Aᵀ) w = A D g keeps A Δ = 0.
        let dg = x.component_mul(&g);
        let adat = &red.a * DMatrix::from_diagonal(&x) * red.a.transpose();
        let pinv = adat
            .pseudo_inverse(1e-14)
            .map_err(|e| Error::InfeasibleConstraints(e.to_string()))?;
        let w = pinv * (&red.a * &dg);
        let step = x.component_mul(&(&g - red.a.transpose() * w));
        let decrement: f64 = step.iter().zip(x.iter()).map(|(s, v)| s * s / v).sum();
        if decrement < 1e-24 {
            return Ok((x, it));
        }
        let mut t_max: f64 = 1.0;
        for (s, v) in step.iter().zip(x.iter()) {
            if *s < 0.0 {
                t_max = t_max.min(-0.99 * v / s);
            }
        }
        let h0 = entropy_nats(&x);
        let slope = g.dot(&step);
        let mut t = t_max;
        let mut moved = false;
        for _ in 0..60 {
            let trial = &x + &step * t;
            if trial.iter().all(|&v| v > 0.0) && entropy_nats(&trial) >= h0 + 0.25 * t * slope {
                x = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // Step below floating resolution: already optimal.
            return Ok((x, it));
        }
        let corrected = red.project_affine(&x);
        if corrected.iter().all(|&v| v > 0.0) {
            x = corrected;
        }
    }
    Err(Error::NonConvergence {
        iterations: problem.max_iterations,
        residual: red.residual(&x),
    })
}

fn projected_gradient(
    red: &Reduced,
    start: &DVector<f64>,
    problem: &ConstrainedProblem,
) -> Result<(DVector<f64>, usize)> {
    let project = |y: &DVector<f64>| red.project(y, 0.0, problem.tolerance * 0.1, 20_000);
    let mut x = project(start).ok_or_else(|| {
        Error::InfeasibleConstraints("no nonnegative point satisfies the rate constraints".into())
    })?;
    let mut step = 1e-2;
    let mut history = vec![entropy_nats(&x)];
    for it in 0..problem.max_iterations {
        let g = entropy_grad(&x);
        let h0 = entropy_nats(&x);
        let mut accepted = None;
        for _ in 0..40 {
            if let Some(y) = project(&(&x + &g * step)) {
                if entropy_nats(&y) >= h0 {
                    accepted = Some(y);
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some(y) => {
                x = y;
                step *= 1.5;
            }
            None => return Ok((x, it)),
        }
        history.push(entropy_nats(&x));
        if history.len() > 50 {
            let old = history[history.len() - 51];
            if (history[history.len() - 1] - old).abs() < 1e-12
                && red.residual(&x) < problem.tolerance
            {
                return Ok((x, it));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: problem.max_iterations,
        residual: red.residual(&x),
    })
}

fn finish(
    problem: &ConstrainedProblem,
    red: &Reduced,
    x: DVector<f64>,
    iterations: usize,
    method: OracleMethod,
) -> Result<OracleSolution> {
    let positive: Vec<bool> = x.iter().map(|&v| v > 1e-12).collect();
    let g = entropy_grad(&x);
    let pg = red.project_null(&g);
    let stationarity = pg
        .iter()
        .zip(&positive)
        .filter(|(_, &p)| p)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();
    let full = red.expand(&x.map(|v| v.max(0.0)));
    let constraint_residual = problem.constraint_residual(&full);
    if constraint_residual > problem.tolerance * 100.0 {
        if method == OracleMethod::Pinned {
            return Err(Error::InfeasibleConstraints(format!(
                "single remaining coefficient violates constraints by {constraint_residual:e}"
            )));
        }
        return Err(Error::NonConvergence {
            iterations,
            residual: constraint_residual,
        });
    }
    let total: f64 = full.iter().sum();
    let lambda = BellDiagonalState::new(problem.d, full.iter().map(|v| v / total).collect())?;
    Ok(OracleSolution {
        lambda,
        iterations,
        constraint_residual,
        stationarity,
        method,
    })
}

fn validate(problem: &ConstrainedProblem) -> Result<()> {
    ErrorRateSet::new(problem.d, problem.rates.clone())?;
    if problem.m != problem.rates.len() {
        return Err(Error::InvalidBasisCount {
            d: problem.d,
            m: problem.m,
        });
    }
    Ok(())
}

/// Entropy maximizer started from a given full coefficient vector.
pub fn solve_from(problem: &ConstrainedProblem, start: &[f64]) -> Result<OracleSolution> {
    validate(problem)?;
    if start.len() != problem.d * problem.d {
        return Err(Error::DimensionMismatch {
            expected: problem.d * problem.d,
            got: start.len(),
        });
    }
    let red = Reduced::new(problem)?;
    if red.free.len() == 1 {
        let x = DVector::from_element(1, 1.0);
        return finish(problem, &red, x, 0, OracleMethod::Pinned);
    }
    let start = red.restrict(start);
    match interior_point(&red, &start, problem) {
        Some(x0) => {
            let (x, it) = newton(&red, x0, problem)?;
            finish(problem, &red, x, it, OracleMethod::Newton)
        }
        None => {
            let (x, it) = projected_gradient(&red, &start, problem)?;
            finish(problem, &red, x, it, OracleMethod::ProjectedGradient)
        }
    }
}

/// Entropy maximizer from the default start: the minimum-norm solution of
/// the equality constraints.
pub fn solve(problem: &ConstrainedProblem) -> Result<OracleSolution> {
    validate(problem)?;
    let (a, b) = problem.system();
    let start = a
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InfeasibleConstraints(e.to_string()))?
        * b;
    solve_from(problem, start.as_slice())
}

pub fn max_entropy_lambda(problem: &ConstrainedProblem) -> Result<BellDiagonalState> {
    Ok(solve(problem)?.lambda)
}

/// `log₂ d − H(λ*)`.
pub fn oracle_rate(problem: &ConstrainedProblem) -> Result<f64> {
    let lambda = max_entropy_lambda(problem)?;
    Ok((problem.d as f64).log2() - entropy_bits(lambda.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::{rate_max_mubs_symmetric, rate_two_mubs, solve_eta, BasisPolicy};
    use crate::bell::{error_rate_xzk, error_rate_z};

    fn problem(d: usize, rates: Vec<f64>) -> ConstrainedProblem {
        ConstrainedProblem::new(&ErrorRateSet::new(d, rates).unwrap())
    }

    #[test]
    fn constraint_sets_follow_error_rates() {
        let p = problem(3, vec![0.1, 0.1, 0.1]);
        assert_eq!(
            p.constraint_sets(),
            vec![vec![0, 1, 2], vec![0, 3, 6], vec![0, 4, 8]]
        );
        assert_eq!(p.unconstrained_indices(), vec![5, 7]);
        let full = problem(3, vec![0.1; 4]);
        assert!(full.unconstrained_indices().is_empty());
    }

    #[test]
    fn zero_errors_give_point_mass() {
        for (d, m) in [(2, 2), (3, 3), (5, 6)] {
            let sol = solve(&problem(d, vec![0.0; m])).unwrap();
            assert_eq!(sol.method, OracleMethod::Pinned);
            assert_eq!(sol.lambda, BellDiagonalState::point_mass(d).unwrap());
        }
    }

    #[test]
    fn six_state_matches_pinned_pattern() {
        let rates = ErrorRateSet::symmetric(2, 3, 0.05).unwrap();
        let lambda = max_entropy_lambda(&ConstrainedProblem::new(&rates)).unwrap();
        let analytic = solve_eta(&rates, BasisPolicy::Guaranteed)
            .unwrap()
            .lambda_grid();
        for (a, b) in lambda.as_slice().iter().zip(&analytic) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn unconstrained_coefficients_equalize() {
        let p = problem(5, vec![0.05; 3]);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.method, OracleMethod::Newton);
        let vals: Vec<f64> = p
            .unconstrained_indices()
            .iter()
            .map(|&i| sol.lambda.as_slice()[i])
            .collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-6, "spread {spread}");
        assert!(sol.constraint_residual < 1e-8);
        assert!(sol.stationarity < 1e-6);
    }

    #[test]
    fn oracle_rates_match_closed_forms() {
        let r = oracle_rate(&problem(2, vec![0.11, 0.11])).unwrap();
        assert!((r - rate_two_mubs(2, 0.11, 0.11).unwrap()).abs() < 1e-6);
        let bb84 = 0.110_027_864_438_360;
        let r = oracle_rate(&problem(2, vec![bb84, bb84])).unwrap();
        assert!(r.abs() < 1e-6, "{r}");
        let r = oracle_rate(&problem(5, vec![0.05; 6])).unwrap();
        assert!((r - rate_max_mubs_symmetric(5, 0.05).unwrap()).abs() < 1e-6);
        let r = oracle_rate(&problem(3, vec![0.07, 0.03])).unwrap();
        assert!((r - rate_two_mubs(3, 0.03, 0.07).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn returned_lambda_meets_constraints() {
        let p = problem(3, vec![0.04, 0.03, 0.035, 0.045]);
        let lam = max_entropy_lambda(&p).unwrap();
        assert!((error_rate_z(&lam) - 0.04).abs() < 1e-8);
        for k in 0..3 {
            assert!((error_rate_xzk(&lam, k) - p.rates[k + 1]).abs() < 1e-8);
        }
        assert!(lam.as_slice().iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn hidden_forced_zero_uses_gradient_fallback() {
        // q - Q_Z = 0 forces the Z row and every unconstrained coefficient
        // to zero without any single constraint having rhs 0 or 1.
        let rates = ErrorRateSet::new(5, vec![0.1, 0.05, 0.05]).unwrap();
        let sol = solve(&ConstrainedProblem::new(&rates)).unwrap();
        assert_eq!(sol.method, OracleMethod::ProjectedGradient);
        let analytic = solve_eta(&rates, BasisPolicy::Guaranteed).unwrap().rate;
        let got = 5f64.log2() - entropy_bits(sol.lambda.as_slice());
        assert!((got - analytic).abs() < 1e-4, "{got} vs {analytic}");
    }

    #[test]
    fn infeasible_constraints_reported() {
        // Q_Z = 0 and Q_X = 0 share only (0,0), so Q_XZ must be 0 too.
        let p = problem(3, vec![0.0, 0.0, 0.3]);
        assert!(matches!(solve(&p), Err(Error::InfeasibleConstraints(_))));
    }
}
