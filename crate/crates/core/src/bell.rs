//! Bipartite states on `C^d ⊗ C^d`: the Weyl twirl that makes a state
//! Bell-diagonal, conversion between density matrices and Bell
//! coefficients, and the observed error rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weyl::{self, bell_basis_vector, weyl_op, DenseOperator, StateVector};

/// Tolerance on off-diagonal Bell-basis elements accepted by
/// [`lambda_from_state`]. Looser than arithmetic precision because the
/// twirl sums d⁴ conjugations.
pub const BELL_DIAGONAL_TOL: f64 = 1e-8;

const LAMBDA_NEG_TOL: f64 = 1e-12;
const LAMBDA_SUM_TOL: f64 = 1e-10;

/// A `d² × d²` bipartite density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    local_dim: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking shape, hermiticity, trace and
    /// positivity.
    pub fn new(local_dim: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(local_dim, mat)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape check only.
    pub fn from_matrix_unchecked(local_dim: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        if local_dim < 2 {
            return Err(Error::InvalidDimension(local_dim));
        }
        let n = local_dim * local_dim;
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { local_dim, mat })
    }

    pub fn pure(local_dim: usize, psi: &StateVector) -> Result<Self> {
        Self::from_matrix_unchecked(local_dim, psi.projector())
    }

    /// `G G† / Tr(G G†)`; a Gaussian `G` gives a Wishart-distributed state.
    pub fn from_factor(local_dim: usize, g: &DMatrix<Complex64>) -> Result<Self> {
        let mut mat = g * g.adjoint();
        let tr = mat.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidParameter("factor has zero norm".into()));
        }
        mat /= Complex64::new(tr, 0.0);
        // exact hermiticity
        let mat = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        Self::from_matrix_unchecked(local_dim, mat)
    }

    pub fn maximally_mixed(local_dim: usize) -> Result<Self> {
        let n = local_dim * local_dim;
        let mat = DMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0);
        Self::from_matrix_unchecked(local_dim, mat)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        weyl::max_abs_diff(&self.mat, &other.mat)
    }

    /// `⟨ψ|ρ|ψ⟩`, real part.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        psi.inner(&StateVector::from_amplitudes(
            (&self.mat * psi.amplitudes()).iter().copied().collect(),
        ))
        .re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = weyl::max_abs_diff(&self.mat, &self.mat.adjoint());
        if herm > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {tr} != 1"
            )));
        }
        let min_eig = self
            .mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }
}

/// Coefficients `λ_{α,β}` of a state diagonal in the Bell basis, stored
/// row-major with `α` the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    dim: usize,
    lambdas: Vec<f64>,
}

impl BellDiagonalState {
    pub fn new(dim: usize, lambdas: Vec<f64>) -> Result<Self> {
        let state = Self::new_unchecked(dim, lambdas)?;
        state.validate()?;
        Ok(state)
    }

    /// Shape check only; used by fault-injection fixtures.
    pub fn new_unchecked(dim: usize, lambdas: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if lambdas.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: lambdas.len(),
            });
        }
        Ok(Self { dim, lambdas })
    }

    pub fn point_mass(dim: usize) -> Result<Self> {
        let mut lambdas = vec![0.0; dim * dim];
        lambdas[0] = 1.0;
        Self::new(dim, lambdas)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0 / (dim * dim) as f64; dim * dim])
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, &v)) = self
            .lambdas
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= -LAMBDA_NEG_TOL))
        {
            return Err(Error::InvalidLambda(format!(
                "lambda[{},{}] = {v:e} is negative",
                i / self.dim,
                i % self.dim
            )));
        }
        let total: f64 = self.lambdas.iter().sum();
        if (total - 1.0).abs() > LAMBDA_SUM_TOL {
            return Err(Error::InvalidLambda(format!("coefficients sum to {total}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `λ_{α,β}` with indices mod d, small negatives clamped to zero.
    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        let d = self.dim;
        self.lambdas[(alpha % d) * d + beta % d].max(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.lambdas
            .iter()
            .zip(&other.lambdas)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Observed error rates `[Q_Z, Q_X, Q_XZ, …, Q_{XZ^{m-2}}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateSet {
    dim: usize,
    rates: Vec<f64>,
}

impl ErrorRateSet {
    pub fn new(dim: usize, rates: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let m = rates.len();
        if m < 2 || m > dim + 1 {
            return Err(Error::InvalidBasisCount { d: dim, m });
        }
        if let Some(&q) = rates.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::OutOfRange {
                name: "error rate",
                value: q,
            });
        }
        Ok(Self { dim, rates })
    }

    /// Same rate `q` in all `m` bases.
    pub fn symmetric(dim: usize, m: usize, q: f64) -> Result<Self> {
        Self::new(dim, vec![q; m])
    }

    /// Reads the first `m` error rates off a Bell-diagonal state.
    pub fn from_lambda(bds: &BellDiagonalState, m: usize) -> Result<Self> {
        let d = bds.dim();
        if m < 2 || m > d + 1 {
            return Err(Error::InvalidBasisCount { d, m });
        }
        let mut rates = vec![error_rate_z(bds)];
        rates.extend((0..m - 1).map(|k| error_rate_xzk(bds, k)));
        Self::new(d, rates.into_iter().map(|q| q.clamp(0.0, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bases(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn q_z(&self) -> f64 {
        self.rates[0]
    }

    /// `Q_{XZ^k}`.
    pub fn q_xzk(&self, k: usize) -> f64 {
        self.rates[k + 1]
    }
}

/// Twirl `ρ ↦ d⁻² Σ_{α,β} (Λ_{α,β} ⊗ Λ_{α,-β}) ρ (…)†`.
pub fn symmetrize(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.local_dim();
    let n = d * d;
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for alpha in 0..d {
        for beta in 0..d {
            let u = weyl_op(d, alpha, beta)?
                .kron(&weyl_op(d, alpha, (d - beta) % d)?)
                .into_matrix();
            acc += &u * rho.matrix() * u.adjoint();
        }
    }
    acc /= Complex64::new(n as f64, 0.0);
    DensityMatrix::from_matrix_unchecked(d, acc)
}

/// Largest `|⟨φ_{a}|ρ|φ_{b}⟩|` over distinct Bell vectors.
pub fn max_bell_offdiagonal(rho: &DensityMatrix) -> Result<f64> {
    let in_bell = bell_frame(rho)?;
    let n = in_bell.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(in_bell[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}

/// `B† ρ B` with `B` the matrix whose columns are the Bell vectors in
/// `(α, β)` row-major order.
fn bell_frame(rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    let d = rho.local_dim();
    let n = d * d;
    let mut basis = DMatrix::<Complex64>::zeros(n, n);
    for alpha in 0..d {
        for beta in 0..d {
            let v = bell_basis_vector(d, alpha, beta)?;
            basis.set_column(alpha * d + beta, v.amplitudes());
        }
    }
    Ok(basis.adjoint() * rho.matrix() * basis)
}

/// Bell coefficients of a (checked) Bell-diagonal state.
pub fn lambda_from_state(rho: &DensityMatrix) -> Result<BellDiagonalState> {
    let d = rho.local_dim();
    let in_bell = bell_frame(rho)?;
    let n = d * d;
    let mut max_offdiag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_offdiag = max_offdiag.max(in_bell[(i, j)].norm());
            }
        }
    }
    if max_offdiag > BELL_DIAGONAL_TOL {
        return Err(Error::NotBellDiagonal { max_offdiag });
    }
    let lambdas = (0..n).map(|i| in_bell[(i, i)].re).collect();
    BellDiagonalState::new(d, lambdas)
}

/// `Σ λ_{α,β} |φ_{α,β}⟩⟨φ_{α,β}|`.
pub fn state_from_lambda(bds: &BellDiagonalState) -> Result<DensityMatrix> {
    bds.validate()?;
    let d = bds.dim();
    let n = d * d;
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for alpha in 0..d {
        for beta in 0..d {
            let lam = bds.get(alpha, beta);
            if lam != 0.0 {
                mat += bell_basis_vector(d, alpha, beta)?.projector() * Complex64::new(lam, 0.0);
            }
        }
    }
    DensityMatrix::from_matrix_unchecked(d, mat)
}

/// `X^k Z^l ⊗ X^k Z^{-l}`.
pub fn twirl_weyl_op(d: usize, k: usize, l: usize) -> Result<DenseOperator> {
    Ok(weyl_op(d, k, l)?.kron(&weyl_op(d, k, (d - l % d) % d)?))
}

/// `r_{k,l} = Tr[(X^k Z^l ⊗ X^k Z^{-l})† ρ]`.
pub fn weyl_coefficient(rho: &DensityMatrix, k: usize, l: usize) -> Result<Complex64> {
    let w = twirl_weyl_op(rho.local_dim(), k, l)?;
    Ok((w.matrix().adjoint() * rho.matrix()).trace())
}

/// `d⁻² Σ_{k,l} r_{k,l} X^k Z^l ⊗ X^k Z^{-l}`, the state rebuilt from its
/// twirl-invariant Weyl coefficients.
pub fn reconstruct_from_weyl(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.local_dim();
    let n = d * d;
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..d {
        for l in 0..d {
            let r = weyl_coefficient(rho, k, l)?;
            mat += twirl_weyl_op(d, k, l)?.into_matrix() * r;
        }
    }
    mat /= Complex64::new(n as f64, 0.0);
    DensityMatrix::from_matrix_unchecked(d, mat)
}

/// `Q_Z = 1 - Σ_α λ_{0,α}`.
pub fn error_rate_z(bds: &BellDiagonalState) -> f64 {
    let d = bds.dim();
    1.0 - (0..d).map(|a| bds.get(0, a)).sum::<f64>()
}

/// `Q_{XZ^k} = 1 - Σ_α λ_{α, kα}`.
pub fn error_rate_xzk(bds: &BellDiagonalState, k: usize) -> f64 {
    let d = bds.dim();
    1.0 - (0..d).map(|a| bds.get(a, (k * a) % d)).sum::<f64>()
}

/// `1 - Σ_j ⟨ψ_j* ψ_j|ρ|ψ_j* ψ_j⟩`, with Alice's vector conjugated
/// entrywise in the computational basis.
pub fn error_rate_in_basis(rho: &DensityMatrix, basis: &[StateVector]) -> Result<f64> {
    let d = rho.local_dim();
    if basis.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: basis.len(),
        });
    }
    let mut agree = 0.0;
    for psi in basis {
        if psi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: psi.dim(),
            });
        }
        agree += rho.expectation(&psi.conj().kron(psi));
    }
    Ok(1.0 - agree)
}

/// `-Σ λ log₂ λ` over the Bell coefficients, with `0 log 0 = 0`.
pub fn von_neumann_entropy(bds: &BellDiagonalState) -> f64 {
    entropy_bits(bds.as_slice())
}

pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}
