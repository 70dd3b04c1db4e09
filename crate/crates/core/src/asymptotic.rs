//! Asymptotic (Devetak–Winter) key rates.
//!
//! The rate is `log₂ d − H(λ*)` where `λ*` maximizes the Bell-coefficient
//! entropy subject to the observed error rates. At the optimum the
//! coefficients fall into four classes: `λ_{0,0}`, one value `λ_Z` on the
//! rest of the Z row, one value `λ_k` per measured `XZ^k` class, and a
//! common value `η` on every coefficient no error rate sees. `η` is the
//! root of a degree-`m` polynomial; for `m = d + 1` no such coefficient
//! exists and the pattern is pinned by the rates alone.

use serde::{Deserialize, Serialize};

use crate::bell::{entropy_bits, ErrorRateSet};
use crate::error::{Error, Result};
use crate::weyl::{is_prime, prime_power_base};

/// Samples used to bracket roots of the `η` condition.
pub const ETA_SCAN_SAMPLES: usize = 2048;

/// Whether rates may be computed for basis counts where the Weyl
/// construction does not guarantee `m` mutually unbiased bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BasisPolicy {
    #[default]
    Guaranteed,
    /// Compute anyway; the security statement does not carry over.
    AllowUnguaranteed,
}

/// Entropy-maximizing Bell-coefficient pattern for a set of error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSolution {
    pub d: usize,
    pub m: usize,
    /// Averaged error `(Q_Z + Σ_k Q_{XZ^k}) / (m - 1)`.
    pub q: f64,
    /// Coefficient `(d-1)(d-m+1)/(m-1)` of `η` in the reconstruction.
    pub v: f64,
    pub eta: f64,
    pub lambda00: f64,
    pub lambda_z: f64,
    /// `λ_k` for `k = 0, …, m-2`.
    pub lambda_k: Vec<f64>,
    /// Bits per sifted symbol; may be negative.
    pub rate: f64,
}

impl AsymptoticSolution {
    /// Number of coefficients equal to `η`.
    pub fn eta_multiplicity(&self) -> usize {
        (self.d - 1) * (self.d + 1 - self.m)
    }

    /// Sum of all d² coefficients implied by the pattern.
    pub fn total_weight(&self) -> f64 {
        let dm1 = (self.d - 1) as f64;
        self.lambda00
            + dm1 * self.lambda_z
            + dm1 * self.lambda_k.iter().sum::<f64>()
            + self.eta_multiplicity() as f64 * self.eta
    }

    /// Expands the pattern into the full `d × d` grid of `λ_{α,β}`.
    ///
    /// Only meaningful when the `m` index classes are disjoint apart from
    /// `(0,0)`, which holds for prime `d` and for `m ≤ 3`.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let d = self.d;
        let mut grid = vec![self.eta; d * d];
        grid[0] = self.lambda00;
        grid[1..d].fill(self.lambda_z);
        for (k, &lk) in self.lambda_k.iter().enumerate() {
            for a in 1..d {
                grid[a * d + (k * a) % d] = lk;
            }
        }
        grid
    }

    /// `log₂ d − H` evaluated directly on the coefficient pattern.
    pub fn entropy_rate(&self) -> f64 {
        pattern_rate(
            self.d,
            self.lambda00,
            self.lambda_z,
            &self.lambda_k,
            self.eta,
            self.eta_multiplicity(),
        )
    }
}

fn pattern_rate(d: usize, l00: f64, lz: f64, lk: &[f64], eta: f64, n_eta: usize) -> f64 {
    let dm1 = (d - 1) as f64;
    let xlogx = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    (d as f64).log2()
        + xlogx(l00)
        + dm1 * xlogx(lz)
        + dm1 * lk.iter().map(|&x| xlogx(x)).sum::<f64>()
        + n_eta as f64 * xlogx(eta)
}

/// Checks `2 ≤ m ≤ d + 1` and whether the Weyl construction backs `m`
/// unbiased bases in dimension `d`.
pub fn check_basis_count(d: usize, m: usize, policy: BasisPolicy) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if m < 2 || m > d + 1 {
        return Err(Error::InvalidBasisCount { d, m });
    }
    let guaranteed = m <= 3 || is_prime(d) || (m == d + 1 && prime_power_base(d).is_some());
    if !guaranteed && policy == BasisPolicy::Guaranteed {
        return Err(Error::UnguaranteedBases { d, m });
    }
    Ok(())
}

/// Binary Shannon entropy in bits.
pub fn shannon_binary(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "probability",
            value: p,
        });
    }
    Ok(h2(p))
}

pub(crate) fn h2(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value })
    }
}

/// Two-basis rate `log₂d − h(Q_X) − h(Q_Z) − (Q_X + Q_Z) log₂(d−1)`.
pub fn rate_two_mubs(d: usize, q_x: f64, q_z: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    check_prob("Q_X", q_x)?;
    check_prob("Q_Z", q_z)?;
    let ld = ((d - 1) as f64).log2();
    Ok((d as f64).log2() - h2(q_x) - h2(q_z) - (q_x + q_z) * ld)
}

/// Rate with all `d + 1` bases measured, for arbitrary (feasible) rates.
pub fn rate_max_mubs(d: usize, rates: &[f64]) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if rates.len() != d + 1 {
        return Err(Error::InvalidBasisCount { d, m: rates.len() });
    }
    for &r in rates {
        check_prob("error rate", r)?;
    }
    let q = rates.iter().sum::<f64>() / d as f64;
    if q > 1.0 {
        return Err(Error::InfeasibleRates(format!(
            "averaged error q = {q} exceeds 1"
        )));
    }
    if let Some(&worst) = rates.iter().find(|&&r| q - r < -1e-15) {
        return Err(Error::InfeasibleRates(format!(
            "q - Q_i = {} < 0 for Q_i = {worst}",
            q - worst
        )));
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    Ok(
        (d as f64).log2() + xlogx(1.0 - q) - q * ((d - 1) as f64).log2()
            + rates.iter().map(|&r| xlogx((q - r).max(0.0))).sum::<f64>(),
    )
}

/// Symmetric-error rate with all `d + 1` bases:
/// `log₂d − h(q) − q log₂(d² − 1)` with `q = (d+1)Q/d`.
pub fn rate_max_mubs_symmetric(d: usize, q_sym: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    if !(0.0..=df / (df + 1.0)).contains(&q_sym) {
        return Err(Error::OutOfRange {
            name: "Q",
            value: q_sym,
        });
    }
    let q = ((df + 1.0) * q_sym / df).min(1.0);
    Ok(df.log2() - h2(q) - q * (df * df - 1.0).log2())
}

/// Solves for the entropy-maximizing coefficient pattern.
///
/// For `m < d + 1`, `η` is the root of
/// `(d−1)^m (1−q+vη) η^{m−1} = Π_i (q − Q_i − vη)` on the interval where
/// every reconstructed coefficient is nonnegative. The interval is
/// scanned, every sign change is bisected and Newton-polished, and the
/// root giving the smallest rate is kept.
pub fn solve_eta(rates: &ErrorRateSet, policy: BasisPolicy) -> Result<AsymptoticSolution> {
    solve_eta_scanned(rates, policy, ETA_SCAN_SAMPLES)
}

/// `samples = 0` bisects the whole interval once. The log residual has a
/// strictly positive derivative there, so this finds the same root; it is
/// what the finite-size optimizer uses in its inner loop.
pub(crate) fn solve_eta_scanned(
    rates: &ErrorRateSet,
    policy: BasisPolicy,
    samples: usize,
) -> Result<AsymptoticSolution> {
    let d = rates.dim();
    let m = rates.num_bases();
    check_basis_count(d, m, policy)?;
    let qs = rates.rates();
    let dm1 = (d - 1) as f64;
    let q = qs.iter().sum::<f64>() / (m - 1) as f64;
    let v = dm1 * (d + 1 - m) as f64 / (m - 1) as f64;
    let n_eta = (d - 1) * (d + 1 - m);

    let gaps: Vec<f64> = qs.iter().map(|&qi| q - qi).collect();
    if let Some((i, &g)) = gaps.iter().enumerate().find(|(_, &g)| g < -1e-15) {
        return Err(Error::InfeasibleRates(format!(
            "q - Q_{i} = {g:e} < 0 (q = {q}, Q = {:?})",
            qs
        )));
    }
    let gaps: Vec<f64> = gaps.into_iter().map(|g| g.max(0.0)).collect();

    let build = |eta: f64| -> AsymptoticSolution {
        let l00 = 1.0 - q + v * eta;
        let lam: Vec<f64> = gaps
            .iter()
            .map(|&g| ((g - v * eta) / dm1).max(0.0))
            .collect();
        let rate = pattern_rate(d, l00, lam[0], &lam[1..], eta, n_eta);
        AsymptoticSolution {
            d,
            m,
            q,
            v,
            eta,
            lambda00: l00,
            lambda_z: lam[0],
            lambda_k: lam[1..].to_vec(),
            rate,
        }
    };

    if qs.iter().all(|&x| x == 0.0) {
        return Ok(build(0.0));
    }

    if n_eta == 0 {
        // All coefficients are pinned; η is reported for completeness only.
        if 1.0 - q < -1e-15 {
            return Err(Error::InfeasibleRates(format!(
                "lambda_00 = 1 - q = {} < 0",
                1.0 - q
            )));
        }
        let prod_log: f64 = gaps.iter().map(|g| g.ln()).sum();
        let eta = if (1.0 - q) > 0.0 && prod_log.is_finite() {
            ((prod_log - m as f64 * dm1.ln() - (1.0 - q).ln()) / (m - 1) as f64).exp()
        } else {
            0.0
        };
        let mut sol = build(eta);
        sol.lambda00 = (1.0 - q).max(0.0);
        sol.rate = sol.entropy_rate();
        return Ok(sol);
    }

    let eta_hi = gaps.iter().copied().fold(f64::INFINITY, f64::min) / v;
    let eta_lo = ((q - 1.0) / v).max(0.0);
    if eta_hi <= eta_lo {
        if eta_hi == 0.0 && eta_lo == 0.0 {
            // Some Q_i sits at the averaged error: λ_i = 0 forces η = 0.
            return Ok(build(0.0));
        }
        return Err(Error::InfeasibleRates(format!(
            "empty feasible interval for eta: [{eta_lo:e}, {eta_hi:e}]"
        )));
    }

    let roots = eta_roots(d, m, q, v, &gaps, eta_lo, eta_hi, samples);
    if roots.is_empty() {
        return Err(Error::NoFeasibleRoot { eta_max: eta_hi });
    }
    let best = roots
        .into_iter()
        .map(build)
        .min_by(|a, b| a.rate.total_cmp(&b.rate))
        .expect("nonempty");
    Ok(best)
}

/// `ln LHS − ln RHS` of the η condition; increases from −∞ at `eta_lo`
/// to +∞ at `eta_hi`.
fn log_residual(dm1: f64, m: usize, q: f64, v: f64, gaps: &[f64], eta: f64) -> f64 {
    let lhs = m as f64 * dm1.ln() + (1.0 - q + v * eta).ln() + (m - 1) as f64 * eta.ln();
    let rhs: f64 = gaps.iter().map(|&g| (g - v * eta).ln()).sum();
    lhs - rhs
}

fn log_residual_deriv(m: usize, q: f64, v: f64, gaps: &[f64], eta: f64) -> f64 {
    v / (1.0 - q + v * eta)
        + (m - 1) as f64 / eta
        + gaps.iter().map(|&g| v / (g - v * eta)).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
fn eta_roots(
    d: usize,
    m: usize,
    q: f64,
    v: f64,
    gaps: &[f64],
    lo: f64,
    hi: f64,
    samples: usize,
) -> Vec<f64> {
    let dm1 = (d - 1) as f64;
    let f = |eta: f64| -> f64 {
        if eta <= lo {
            f64::NEG_INFINITY
        } else if eta >= hi {
            f64::INFINITY
        } else {
            let r = log_residual(dm1, m, q, v, gaps, eta);
            if r.is_nan() {
                f64::NEG_INFINITY
            } else {
                r
            }
        }
    };

    let width = hi - lo;
    let mut grid = Vec::with_capacity(samples + 2);
    grid.push((lo, f64::NEG_INFINITY));
    for s in 0..samples {
        let eta = lo + width * (s as f64 + 0.5) / samples as f64;
        grid.push((eta, f(eta)));
    }
    grid.push((hi, f64::INFINITY));

    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if (fa < 0.0) == (fb < 0.0) {
            continue;
        }
        roots.push(bisect_polish(&f, a, b, fa < 0.0, |eta| {
            log_residual_deriv(m, q, v, gaps, eta)
        }));
    }
    roots
}

fn bisect_polish(
    f: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    increasing: bool,
    deriv: impl Fn(f64) -> f64,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == increasing {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-15 * b.abs() {
            break;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..5 {
        let fx = f(x);
        let dx = deriv(x);
        if !fx.is_finite() || !dx.is_finite() || dx == 0.0 {
            break;
        }
        let next = x - fx / dx;
        if !(next > a && next < b) || f(next).abs() >= fx.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Residual `(d−1)^m (1−q+vη) η^{m−1} − Π_i (q − Q_i − vη)` of the η
/// condition in its polynomial form.
pub fn eta_polynomial_residual(sol: &AsymptoticSolution, rates: &ErrorRateSet) -> f64 {
    let dm1 = (sol.d - 1) as f64;
    let lhs =
        dm1.powi(sol.m as i32) * (1.0 - sol.q + sol.v * sol.eta) * sol.eta.powi(sol.m as i32 - 1);
    let rhs: f64 = rates
        .rates()
        .iter()
        .map(|&qi| sol.q - qi - sol.v * sol.eta)
        .product();
    lhs - rhs
}

/// Closed-form rate as a function of the solved `η`:
/// `log₂(d/(d−1)) − (m−1)(1−q) log₂(η(d−1)) + Σ_i (1−Q_i) log₂(q−Q_i−vη)`.
///
/// Valid at a root of the η condition with every factor strictly positive.
pub fn rate_from_eta(sol: &AsymptoticSolution, rates: &ErrorRateSet) -> Option<f64> {
    let d = sol.d as f64;
    let dm1 = d - 1.0;
    if sol.eta <= 0.0 {
        return None;
    }
    let mut acc = (d / dm1).log2() - (sol.m - 1) as f64 * (1.0 - sol.q) * (sol.eta * dm1).log2();
    for &qi in rates.rates() {
        let gap = sol.q - qi - sol.v * sol.eta;
        if gap <= 0.0 {
            return None;
        }
        acc += (1.0 - qi) * gap.log2();
    }
    Some(acc)
}

/// Asymptotic key rate for `m` measured bases.
///
/// For `m < d + 1` this evaluates the η-form of the rate at the solved
/// root, falling back to the coefficient entropy when the root sits on
/// the boundary (some `λ = 0`). For `m = d + 1` the pinned pattern's
/// entropy is used directly.
pub fn rate_general(rates: &ErrorRateSet, policy: BasisPolicy) -> Result<f64> {
    rate_general_scanned(rates, policy, ETA_SCAN_SAMPLES)
}

fn rate_general_scanned(rates: &ErrorRateSet, policy: BasisPolicy, samples: usize) -> Result<f64> {
    let sol = solve_eta_scanned(rates, policy, samples)?;
    if sol.eta_multiplicity() == 0 {
        return Ok(sol.rate);
    }
    Ok(rate_from_eta(&sol, rates).unwrap_or(sol.rate))
}

/// Symmetric-error rate `r_∞^{(m)}(Q)`.
pub fn rate_symmetric(d: usize, m: usize, q: f64, policy: BasisPolicy) -> Result<f64> {
    rate_general(&ErrorRateSet::symmetric(d, m, q)?, policy)
}

/// [`rate_symmetric`] without the root scan.
pub(crate) fn rate_symmetric_bracketed(
    d: usize,
    m: usize,
    q: f64,
    policy: BasisPolicy,
) -> Result<f64> {
    rate_general_scanned(&ErrorRateSet::symmetric(d, m, q)?, policy, 0)
}

/// Solution entropy from an explicit coefficient grid; shared with tests.
pub fn grid_rate(d: usize, grid: &[f64]) -> f64 {
    (d as f64).log2() - entropy_bits(grid)
}

/// Smallest symmetric error rate at which the asymptotic rate vanishes.
pub fn max_tolerable_q(d: usize, m: usize, policy: BasisPolicy) -> Result<f64> {
    check_basis_count(d, m, policy)?;
    let rate_at = |x: f64| -> Result<f64> {
        match rate_symmetric(d, m, x, policy) {
            Ok(r) => Ok(r),
            Err(Error::InfeasibleRates(_)) | Err(Error::NoFeasibleRoot { .. }) => Ok(-1.0),
            Err(e) => Err(e),
        }
    };
    const STEP: f64 = 1e-3;
    let mut lo = 0.0;
    let mut hi = None;
    let mut x = STEP;
    while x <= 1.0 {
        if rate_at(x)? <= 0.0 {
            hi = Some(x);
            break;
        }
        lo = x;
        x += STEP;
    }
    let mut hi = hi.ok_or_else(|| {
        Error::InvalidParameter(format!("rate stays positive on (0, 1] for d={d}, m={m}"))
    })?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
