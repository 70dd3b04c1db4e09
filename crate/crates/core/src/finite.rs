//! Finite-size key rates.
//!
//! Two bounds on the smooth min-entropy of the key string are supported:
//! the entropic uncertainty relation (two bases only) and the asymptotic
//! equipartition property (any number of bases, symmetric errors). Both
//! add the sampling correction `μ` to the tolerated error. Coherent
//! attacks are handled by postselection on top of the AEP rate.
//!
//! Every security parameter is carried as a base-2 logarithm. The
//! postselection budget `ε_tot = ε_coh (N+1)^{-(d⁴-1)}` is far below the
//! smallest positive `f64` for realistic `N`, so no `ε` is ever
//! exponentiated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{check_basis_count, h2, rate_symmetric_bracketed, BasisPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundType {
    /// Entropic uncertainty relation, `m = 2` only.
    Eur,
    /// Asymptotic equipartition property.
    Aep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackModel {
    Collective,
    Coherent,
}

/// How the postselection budget is accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsMode {
    /// The given budget is the coherent-attack `ε_coh`; the collective
    /// budget is derived from it.
    #[default]
    DeriveEps,
    /// The given budget is used for the collective rate as-is; the
    /// implied `ε_coh` is reported.
    FixedEps,
}

impl BoundType {
    pub fn name(self) -> &'static str {
        match self {
            BoundType::Eur => "eur",
            BoundType::Aep => "aep",
        }
    }
}

impl AttackModel {
    pub fn name(self) -> &'static str {
        match self {
            AttackModel::Collective => "collective",
            AttackModel::Coherent => "coherent",
        }
    }
}

impl EpsMode {
    pub fn name(self) -> &'static str {
        match self {
            EpsMode::DeriveEps => "derive-eps",
            EpsMode::FixedEps => "fixed-eps",
        }
    }
}

/// `log₂(2^a + 2^b + …)` without leaving the log domain.
pub fn log2_sum(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp2()).sum::<f64>().log2()
}

/// Smoothing, error-correction and privacy-amplification parameters with
/// their budget, all as `log₂ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecuritySplit {
    pub log2_eps_smooth: f64,
    pub log2_eps_ec: f64,
    pub log2_eps_pa: f64,
    pub log2_eps_tot: f64,
}

impl SecuritySplit {
    pub fn from_log2(smooth: f64, ec: f64, pa: f64, tot: f64) -> Result<Self> {
        let split = Self {
            log2_eps_smooth: smooth,
            log2_eps_ec: ec,
            log2_eps_pa: pa,
            log2_eps_tot: tot,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn new(eps: f64, eps_ec: f64, eps_pa: f64, eps_tot: f64) -> Result<Self> {
        for (name, v) in [
            ("eps", eps),
            ("eps_ec", eps_ec),
            ("eps_pa", eps_pa),
            ("eps_tot", eps_tot),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        Self::from_log2(eps.log2(), eps_ec.log2(), eps_pa.log2(), eps_tot.log2())
    }

    /// `ε_i = ε_tot · w_i`; weights must be positive and sum to at most 1.
    pub fn from_weights(log2_eps_tot: f64, weights: [f64; 3]) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0)) || weights.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "invalid split weights {weights:?}"
            )));
        }
        Self::from_log2(
            log2_eps_tot + weights[0].log2(),
            log2_eps_tot + weights[1].log2(),
            log2_eps_tot + weights[2].log2(),
            log2_eps_tot,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.log2_eps_smooth,
            self.log2_eps_ec,
            self.log2_eps_pa,
            self.log2_eps_tot,
        ];
        if all.iter().any(|v| !v.is_finite() || *v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "security parameters must lie in (0, 1): log2 values {all:?}"
            )));
        }
        let used = self.log2_used();
        if used > self.log2_eps_tot + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "eps + eps_ec + eps_pa = 2^{used:.6} exceeds eps_tot = 2^{:.6}",
                self.log2_eps_tot
            )));
        }
        Ok(())
    }

    /// `log₂(ε + ε_EC + ε_PA)`.
    pub fn log2_used(&self) -> f64 {
        log2_sum(&[self.log2_eps_smooth, self.log2_eps_ec, self.log2_eps_pa])
    }

    /// `(ε + ε_EC + ε_PA) / ε_tot`.
    pub fn budget_fraction(&self) -> f64 {
        (self.log2_used() - self.log2_eps_tot).exp2()
    }

    /// Same weights under a budget shifted by `delta` bits.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            log2_eps_smooth: self.log2_eps_smooth + delta,
            log2_eps_ec: self.log2_eps_ec + delta,
            log2_eps_pa: self.log2_eps_pa + delta,
            log2_eps_tot: self.log2_eps_tot + delta,
        }
    }
}

/// Protocol parameters for one finite-size evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteScenario {
    /// Total rounds `N`.
    pub n_total: u64,
    /// Parameter-estimation rounds `k`; key rounds are `N − k`.
    pub k: u64,
    pub d: usize,
    pub m: usize,
    pub q_tol: f64,
    /// Measurement incompatibility `C` in bits.
    pub c_bits: f64,
    /// Error-correction inefficiency `f ≥ 1`.
    pub f_ec: f64,
    pub p_pass: f64,
    pub policy: BasisPolicy,
}

impl FiniteScenario {
    /// Defaults `C = log₂ d`, `f = 1`, `p_pass = 1`.
    pub fn new(n_total: u64, k: u64, d: usize, m: usize, q_tol: f64) -> Self {
        Self {
            n_total,
            k,
            d,
            m,
            q_tol,
            c_bits: (d as f64).log2(),
            f_ec: 1.0,
            p_pass: 1.0,
            policy: BasisPolicy::Guaranteed,
        }
    }

    pub fn key_rounds(&self) -> u64 {
        self.n_total - self.k
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k = k;
        self
    }

    pub fn with_n_total(mut self, n_total: u64) -> Self {
        self.n_total = n_total;
        self
    }

    /// Checks everything except `k`.
    pub fn validate_setup(&self) -> Result<()> {
        check_basis_count(self.d, self.m, self.policy)?;
        if !(0.0..1.0).contains(&self.q_tol) {
            return Err(Error::OutOfRange {
                name: "Q_tol",
                value: self.q_tol,
            });
        }
        let log_d = (self.d as f64).log2();
        if !(self.c_bits > 0.0 && self.c_bits <= log_d + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "incompatibility C = {} must lie in (0, log2 d = {log_d}]",
                self.c_bits
            )));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "f = {} must be >= 1",
                self.f_ec
            )));
        }
        if !(self.p_pass > 0.0 && self.p_pass <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_pass = {} must lie in (0, 1]",
                self.p_pass
            )));
        }
        if self.n_total < 2 {
            return Err(Error::InvalidParameter(format!(
                "N = {} too small",
                self.n_total
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_setup()?;
        if self.k == 0 || self.k >= self.n_total {
            return Err(Error::InvalidParameter(format!(
                "need 0 < k < N, got k = {}, N = {}",
                self.k, self.n_total
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Secret bits per round; zero when infeasible.
    pub rate: f64,
    /// Extractable key length `⌊N · rate⌋`.
    pub key_length: f64,
    pub split: SecuritySplit,
    pub k: u64,
    pub bound: BoundType,
    pub attack: AttackModel,
    pub feasible: bool,
    /// Sampling correction added to `Q_tol`.
    pub mu: f64,
    /// `log₂ ε_coh` for coherent results.
    pub log2_eps_coh: Option<f64>,
}

impl RateResult {
    fn from_raw(
        raw: f64,
        scenario: &FiniteScenario,
        split: SecuritySplit,
        bound: BoundType,
        mu: f64,
    ) -> Self {
        let feasible = raw.is_finite() && raw > 0.0;
        let rate = if feasible { raw } else { 0.0 };
        Self {
            rate,
            key_length: (rate * scenario.n_total as f64).floor(),
            split,
            k: scenario.k,
            bound,
            attack: AttackModel::Collective,
            feasible,
            mu,
            log2_eps_coh: None,
        }
    }
}

/// Sampling correction `μ = sqrt(N (k̃+1) ln(1/ε') / (n k̃²))`, `k̃ = k/m`.
pub fn mu_correction(n_total: u64, k: u64, n: u64, m: usize, eps_prime: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime <= 1.0) {
        return Err(Error::OutOfRange {
            name: "eps'",
            value: eps_prime,
        });
    }
    mu_correction_log2(n_total, k, n, m, eps_prime.log2())
}

/// [`mu_correction`] with `ε'` given as `log₂ ε'`.
pub fn mu_correction_log2(
    n_total: u64,
    k: u64,
    n: u64,
    m: usize,
    log2_eps_prime: f64,
) -> Result<f64> {
    if m < 2 || k < m as u64 || n == 0 || k + n > n_total {
        return Err(Error::InvalidParameter(format!(
            "mu needs k >= m, n > 0, k + n <= N (N={n_total}, k={k}, n={n}, m={m})"
        )));
    }
    if log2_eps_prime > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps' = 2^{log2_eps_prime} > 1"
        )));
    }
    Ok(mu_raw(
        n_total as f64,
        k as f64,
        n as f64,
        m,
        log2_eps_prime,
    ))
}

fn mu_raw(n_total: f64, k: f64, n: f64, m: usize, log2_eps_prime: f64) -> f64 {
    let kt = k / m as f64;
    let ln_inv = -log2_eps_prime * std::f64::consts::LN_2;
    (n_total * (kt + 1.0) * ln_inv / (n * kt * kt)).sqrt()
}

/// Error-correction leakage per key symbol, `f (h(Q) + Q log₂(d−1))`.
pub fn leak_ec(q: f64, d: usize, f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "Q",
            value: q,
        });
    }
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(f * leak_raw(q, d))
}

fn leak_raw(q: f64, d: usize) -> f64 {
    h2(q) + q * ((d - 1) as f64).log2()
}

/// `log₂ Σ_{l ≤ ⌊n x⌋} C(n,l) (d−1)^l`, the tighter max-entropy bound
/// before the binary-entropy relaxation. Diagnostic only; cost is O(n x).
pub fn smooth_max_entropy_binomial(n: u64, x: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
        });
    }
    if n > 100_000_000 {
        return Err(Error::InvalidParameter(format!(
            "n = {n} too large for the exact sum"
        )));
    }
    let top = (n as f64 * x).floor() as u64;
    let ld = ((d - 1) as f64).log2();
    // log₂ of successive terms; t_{l+1}/t_l = (n-l)/(l+1) · (d-1)
    let mut log_term = 0.0;
    let mut acc = 0.0f64;
    for l in 0..=top {
        if l > 0 {
            log_term += ((n - l + 1) as f64 / l as f64).log2() + ld;
        }
        acc = if l == 0 {
            log_term
        } else {
            log2_sum(&[acc, log_term])
        };
    }
    Ok(acc)
}

/// Raw (unclamped) rate; `-∞` when a validity condition fails.
struct Evaluated {
    raw: f64,
    mu: f64,
}

fn eur_raw(s: &FiniteScenario, split: &SecuritySplit, k: f64) -> Evaluated {
    let n_total = s.n_total as f64;
    let n = n_total - k;
    let log2_eps_prime = split.log2_eps_smooth + 0.5 * s.p_pass.log2();
    let mu = mu_raw(n_total, k, n, s.m, log2_eps_prime);
    let x = s.q_tol + mu;
    if !(x <= 0.5) {
        return Evaluated {
            raw: f64::NEG_INFINITY,
            mu,
        };
    }
    let hmax = h2(x) + x * ((s.d - 1) as f64).log2();
    let leak = s.f_ec * leak_raw(x, s.d);
    // log₂(2/ε_EC) + 2 log₂(1/(2ε_PA))
    let hashes = (1.0 - split.log2_eps_ec) + 2.0 * (-1.0 - split.log2_eps_pa);
    let per_key_round = s.c_bits - hmax - leak - hashes / n;
    Evaluated {
        raw: n / n_total * per_key_round,
        mu,
    }
}

/// AEP correction and hashing cost, in bits per round.
fn aep_penalty(s: &FiniteScenario, split: &SecuritySplit, n: f64) -> f64 {
    let n_total = s.n_total as f64;
    // log₂(1/(2 ε_EC ε_PA²))
    let hashes = -1.0 - split.log2_eps_ec - 2.0 * split.log2_eps_pa;
    let aep = 4.0
        * n.sqrt()
        * (2.0 + (s.d as f64).sqrt()).log2()
        * (1.0 - 2.0 * split.log2_eps_smooth).sqrt();
    (hashes + aep) / n_total
}

/// `r_∞^{(m)}(x) − (f−1) leak(x)`, or `None` when `x` admits no rate.
fn aep_asymptotic_part(s: &FiniteScenario, x: f64) -> Option<f64> {
    if !(x <= 1.0) {
        return None;
    }
    let r = rate_symmetric_bracketed(s.d, s.m, x, s.policy).ok()?;
    Some(r - (s.f_ec - 1.0) * leak_raw(x, s.d))
}

fn aep_mu(s: &FiniteScenario, split: &SecuritySplit, k: f64) -> f64 {
    let n_total = s.n_total as f64;
    let log2_eps_prime = split.log2_eps_smooth + 0.5 * s.p_pass.log2();
    mu_raw(n_total, k, n_total - k, s.m, log2_eps_prime)
}

fn aep_raw(s: &FiniteScenario, split: &SecuritySplit, k: f64) -> Evaluated {
    let mu = aep_mu(s, split, k);
    Evaluated {
        raw: aep_combine(s, split, k, aep_asymptotic_part(s, s.q_tol + mu)),
        mu,
    }
}

/// The AEP rate from a precomputed `r_∞` term; `μ` and so `r_∞` depend
/// on `k` and `ε` only.
fn aep_combine(s: &FiniteScenario, split: &SecuritySplit, k: f64, r_inf: Option<f64>) -> f64 {
    let n_total = s.n_total as f64;
    let n = n_total - k;
    match r_inf {
        Some(r) => n / n_total * r - aep_penalty(s, split, n),
        None => f64::NEG_INFINITY,
    }
}

fn check_k(s: &FiniteScenario) -> Result<()> {
    s.validate()?;
    if s.k < s.m as u64 {
        return Err(Error::InvalidParameter(format!(
            "need k >= m, got k = {}, m = {}",
            s.k, s.m
        )));
    }
    Ok(())
}

/// Two-basis rate from the entropic uncertainty relation.
pub fn eur_rate(scenario: &FiniteScenario, split: &SecuritySplit) -> Result<RateResult> {
    if scenario.m != 2 {
        return Err(Error::UnsupportedBound {
            bound: "eur",
            m: scenario.m,
        });
    }
    check_k(scenario)?;
    split.validate()?;
    let ev = eur_raw(scenario, split, scenario.k as f64);
    Ok(RateResult::from_raw(
        ev.raw,
        scenario,
        *split,
        BoundType::Eur,
        ev.mu,
    ))
}

/// Symmetric-error rate from the AEP, secure against collective attacks.
pub fn aep_rate(scenario: &FiniteScenario, split: &SecuritySplit) -> Result<RateResult> {
    check_k(scenario)?;
    split.validate()?;
    let ev = aep_raw(scenario, split, scenario.k as f64);
    Ok(RateResult::from_raw(
        ev.raw,
        scenario,
        *split,
        BoundType::Aep,
        ev.mu,
    ))
}

/// `(d⁴ − 1) log₂(N + 1)`: bits by which postselection inflates `ε`.
pub fn postselection_log2_factor(d: usize, n_total: u64) -> f64 {
    ((d as f64).powi(4) - 1.0) * (n_total as f64 + 1.0).log2()
}

/// Rate damping `2 (d⁴ − 1) log₂(N + 1) / N` from postselection.
pub fn postselection_damping(d: usize, n_total: u64) -> f64 {
    2.0 * postselection_log2_factor(d, n_total) / n_total as f64
}

/// Collective split whose budget yields `split.log2_eps_tot` as `ε_coh`.
fn collective_split(split: &SecuritySplit, d: usize, n_total: u64, mode: EpsMode) -> SecuritySplit {
    match mode {
        EpsMode::DeriveEps => split.shifted(-postselection_log2_factor(d, n_total)),
        EpsMode::FixedEps => *split,
    }
}

fn coherent_from_collective(
    col: RateResult,
    d: usize,
    n_total: u64,
    split: &SecuritySplit,
    mode: EpsMode,
) -> RateResult {
    let damping = postselection_damping(d, n_total);
    let log2_eps_coh = match mode {
        EpsMode::DeriveEps => split.log2_eps_tot,
        EpsMode::FixedEps => split.log2_eps_tot + postselection_log2_factor(d, n_total),
    };
    let raw = if col.feasible {
        col.rate - damping
    } else {
        f64::NEG_INFINITY
    };
    let feasible = raw > 0.0;
    let rate = if feasible { raw } else { 0.0 };
    RateResult {
        rate,
        key_length: (rate * n_total as f64).floor(),
        attack: AttackModel::Coherent,
        feasible,
        log2_eps_coh: Some(log2_eps_coh),
        ..col
    }
}

/// AEP rate lifted to coherent attacks by postselection.
///
/// In [`EpsMode::DeriveEps`] the split's budget is the target `ε_coh`
/// and the collective rate is evaluated at the same weights under
/// `ε_coh (N+1)^{-(d⁴−1)}`. In [`EpsMode::FixedEps`] the split is used
/// for the collective rate directly. The returned `split` is always the
/// collective one.
pub fn coherent_rate(
    scenario: &FiniteScenario,
    split: &SecuritySplit,
    mode: EpsMode,
) -> Result<RateResult> {
    split.validate()?;
    let col_split = collective_split(split, scenario.d, scenario.n_total, mode);
    let col = aep_rate(scenario, &col_split)?;
    Ok(coherent_from_collective(
        col,
        scenario.d,
        scenario.n_total,
        split,
        mode,
    ))
}

/// Grid and refinement settings for [`optimize_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub k_grid: usize,
    pub eps_grid: usize,
    /// Smallest weight of any `ε` component on the grid, relative to the budget.
    pub eps_floor: f64,
    pub refine_passes: usize,
    pub golden_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            k_grid: 64,
            eps_grid: 10,
            eps_floor: 1e-3,
            refine_passes: 3,
            golden_iters: 40,
        }
    }
}

/// Position in the search space: `ln k` and log-weights of `ε` and `ε_EC`;
/// `ε_PA` takes the rest of the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    ln_k: f64,
    ln_ws: f64,
    ln_wec: f64,
}

impl Point {
    fn weights(&self) -> Option<[f64; 3]> {
        let ws = self.ln_ws.exp();
        let wec = self.ln_wec.exp();
        let wpa = 1.0 - ws - wec;
        (wpa > 0.0).then_some([ws, wec, wpa])
    }
}

struct Objective<'a> {
    scenario: &'a FiniteScenario,
    bound: BoundType,
    log2_budget: f64,
    k_lo: f64,
    k_hi: f64,
}

impl Objective<'_> {
    fn split(&self, p: &Point) -> Option<SecuritySplit> {
        let w = p.weights()?;
        Some(SecuritySplit {
            log2_eps_smooth: self.log2_budget + w[0].log2(),
            log2_eps_ec: self.log2_budget + w[1].log2(),
            log2_eps_pa: self.log2_budget + w[2].log2(),
            log2_eps_tot: self.log2_budget,
        })
    }

    fn k_of(&self, p: &Point) -> f64 {
        p.ln_k.exp().clamp(self.k_lo, self.k_hi)
    }

    fn value(&self, p: &Point) -> f64 {
        let Some(split) = self.split(p) else {
            return f64::NEG_INFINITY;
        };
        let k = self.k_of(p);
        match self.bound {
            BoundType::Eur => eur_raw(self.scenario, &split, k).raw,
            BoundType::Aep => aep_raw(self.scenario, &split, k).raw,
        }
    }

    /// Golden-section maximization along one coordinate.
    fn golden(&self, p: &Point, coord: usize, lo: f64, hi: f64, iters: usize) -> Point {
        let set = |x: f64| {
            let mut q = *p;
            match coord {
                0 => q.ln_k = x,
                1 => q.ln_ws = x,
                _ => q.ln_wec = x,
            }
            q
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.value(&set(c));
        let mut fd = self.value(&set(d));
        for _ in 0..iters {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.value(&set(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.value(&set(d));
            }
        }
        let best = if fc >= fd { set(c) } else { set(d) };
        if self.value(&best) > self.value(p) {
            best
        } else {
            *p
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![lo.ln()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Best collective rate over `k` and the split of the given budget.
fn optimize_collective(
    template: &FiniteScenario,
    log2_budget: f64,
    bound: BoundType,
    cfg: &OptimizerConfig,
) -> Result<RateResult> {
    let n_total = template.n_total;
    let m = template.m as u64;
    let empty = |s: &FiniteScenario| {
        let split = SecuritySplit::from_weights(log2_budget, [1.0 / 3.0; 3]).expect("valid");
        RateResult::from_raw(
            f64::NEG_INFINITY,
            &s.with_k(m.min(n_total - 1).max(1)),
            split,
            bound,
            f64::NAN,
        )
    };
    if n_total <= m + 1 {
        return Ok(empty(template));
    }
    let k_lo = m as f64;
    let k_hi = (n_total - 1) as f64;
    let obj = Objective {
        scenario: template,
        bound,
        log2_budget,
        k_lo,
        k_hi,
    };

    // Stage 1: grid over k and the simplex of weights.
    let ln_ks = log_grid(k_lo, k_hi, cfg.k_grid);
    let ln_ws = log_grid(cfg.eps_floor, 0.5, cfg.eps_grid);
    let mut grid = Vec::new();
    for (ik, &lk) in ln_ks.iter().enumerate() {
        for (is, &a) in ln_ws.iter().enumerate() {
            for (ie, &b) in ln_ws.iter().enumerate() {
                let p = Point {
                    ln_k: lk,
                    ln_ws: a,
                    ln_wec: b,
                };
                if p.weights().is_some_and(|w| w[2] >= cfg.eps_floor) {
                    grid.push(((ik, is, ie), p));
                }
            }
        }
    }
    let values: Vec<f64> = match bound {
        BoundType::Eur => grid.par_iter().map(|(_, p)| obj.value(p)).collect(),
        BoundType::Aep => {
            // r_∞ once per (k, ε) pair, then the cheap remainder per split
            let pairs: Vec<(usize, usize)> = (0..ln_ks.len())
                .flat_map(|ik| (0..ln_ws.len()).map(move |is| (ik, is)))
                .collect();
            let r_inf: Vec<Option<f64>> = pairs
                .par_iter()
                .map(|&(ik, is)| {
                    let p = Point {
                        ln_k: ln_ks[ik],
                        ln_ws: ln_ws[is],
                        ln_wec: ln_ws[0],
                    };
                    let split = obj.split(&p)?;
                    let k = obj.k_of(&p);
                    aep_asymptotic_part(template, template.q_tol + aep_mu(template, &split, k))
                })
                .collect();
            grid.iter()
                .map(|&((ik, is, _), p)| match obj.split(&p) {
                    Some(split) => {
                        aep_combine(template, &split, obj.k_of(&p), r_inf[ik * ln_ws.len() + is])
                    }
                    None => f64::NEG_INFINITY,
                })
                .collect()
        }
    };
    // Ties go to the earliest grid entry: smallest k, then smallest weights.
    let mut best_idx = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best_idx] {
            best_idx = i;
        }
    }
    if values[best_idx] == f64::NEG_INFINITY {
        return Ok(empty(template));
    }
    let ((ik, is, ie), mut best) = grid[best_idx];

    // Stage 2: coordinate refinement around the grid optimum.
    let step = |v: &[f64], i: usize| {
        let lo = if i > 0 { v[i - 1] } else { v[i] };
        let hi = if i + 1 < v.len() { v[i + 1] } else { v[i] };
        (lo, hi)
    };
    let (mut k_lo_b, mut k_hi_b) = step(&ln_ks, ik);
    let (s_lo, s_hi) = step(&ln_ws, is);
    let (e_lo, e_hi) = step(&ln_ws, ie);
    let mut s_half = (s_hi - s_lo).max(1e-3) / 2.0;
    let mut e_half = (e_hi - e_lo).max(1e-3) / 2.0;
    let _ = (is, ie);
    for _ in 0..cfg.refine_passes {
        best = obj.golden(&best, 0, k_lo_b, k_hi_b, cfg.golden_iters);
        best = obj.golden(
            &best,
            1,
            best.ln_ws - s_half,
            (best.ln_ws + s_half).min(0.0),
            cfg.golden_iters,
        );
        best = obj.golden(
            &best,
            2,
            best.ln_wec - e_half,
            (best.ln_wec + e_half).min(0.0),
            cfg.golden_iters,
        );
        let k_half = (k_hi_b - k_lo_b) / 4.0;
        k_lo_b = (best.ln_k - k_half).max(k_lo.ln());
        k_hi_b = (best.ln_k + k_half).min(k_hi.ln());
        s_half /= 2.0;
        e_half /= 2.0;
    }

    // Integer k: keep the better neighbour.
    let k_real = obj.k_of(&best);
    let split = obj
        .split(&best)
        .expect("refined point stays on the simplex");
    let candidates = [k_real.floor().max(k_lo), k_real.ceil().min(k_hi)];
    let mut result: Option<RateResult> = None;
    for k in candidates {
        let s = template.with_k(k as u64);
        let r = match bound {
            BoundType::Eur => eur_rate(&s, &split)?,
            BoundType::Aep => aep_rate(&s, &split)?,
        };
        if result.as_ref().is_none_or(|b| r.rate > b.rate) {
            result = Some(r);
        }
    }
    Ok(result.expect("two candidates"))
}

/// Maximizes the finite-size rate over the number of test rounds and the
/// split of the security budget `ε + ε_EC + ε_PA ≤ ε_tot`.
///
/// `template.k` is ignored. For coherent attacks `log2_budget` is read
/// according to `mode`; the postselection damping does not depend on `k`
/// or the split, so the collective optimum is reused.
pub fn optimize_rate(
    template: &FiniteScenario,
    log2_budget: f64,
    bound: BoundType,
    attack: AttackModel,
    mode: EpsMode,
    cfg: &OptimizerConfig,
) -> Result<RateResult> {
    template.validate_setup()?;
    if !(log2_budget < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps budget 2^{log2_budget} must be < 1"
        )));
    }
    if bound == BoundType::Eur && template.m != 2 {
        return Err(Error::UnsupportedBound {
            bound: "eur",
            m: template.m,
        });
    }
    match attack {
        AttackModel::Collective => optimize_collective(template, log2_budget, bound, cfg),
        AttackModel::Coherent => {
            if bound == BoundType::Eur {
                return Err(Error::UnsupportedBound {
                    bound: "eur (coherent)",
                    m: template.m,
                });
            }
            let budget_split = SecuritySplit::from_weights(log2_budget, [1.0 / 3.0; 3])?;
            let col_budget =
                collective_split(&budget_split, template.d, template.n_total, mode).log2_eps_tot;
            let col = optimize_collective(template, col_budget, bound, cfg)?;
            let reported = SecuritySplit {
                log2_eps_tot: log2_budget,
                ..budget_split
            };
            Ok(coherent_from_collective(
                col,
                template.d,
                template.n_total,
                &reported,
                mode,
            ))
        }
    }
}
