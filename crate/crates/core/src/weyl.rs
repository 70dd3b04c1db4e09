//! Heisenberg–Weyl operators, the generalized Bell basis and the
//! eigenbases of `X Z^k` that serve as mutually unbiased bases.
//!
//! All index arithmetic is modulo `d`. Operators are stored densely; the
//! dimensions involved here stay small (d ≤ a few dozen for operators,
//! d² for bipartite vectors).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A `d × d` complex matrix with its dimension carried alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    mat: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        Ok(Self {
            dim: mat.nrows(),
            mat,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            mat: self.mat.adjoint(),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn pow(&self, exp: usize) -> Self {
        let mut out = Self::identity(self.dim);
        for _ in 0..exp {
            out = out.compose(self);
        }
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mat = self.mat.kronecker(&other.mat);
        Self {
            dim: mat.nrows(),
            mat,
        }
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector {
            amps: &self.mat * &v.amps,
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    /// Entrywise distance of `O† O` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.mat.adjoint() * &self.mat;
        max_abs_diff(&prod, &DMatrix::identity(self.dim, self.dim))
    }
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// A pure state on `C^d` or on the bipartite space `C^d ⊗ C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        Self {
            amps: DVector::from_vec(amps),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    /// Entrywise complex conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        Self {
            amps: self.amps.map(|z| z.conj()),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            amps: self.amps.kronecker(&other.amps),
        }
    }

    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.amps * self.amps.adjoint()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// `ω^e = exp(2πi e / d)` for a possibly fractional exponent `e`.
pub(crate) fn root_of_unity(d: usize, exponent: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * exponent / d as f64)
}

/// Shift operator `X|j⟩ = |j+1 mod d⟩`.
pub fn shift_op(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    let mut mat = DMatrix::zeros(d, d);
    for j in 0..d {
        mat[((j + 1) % d, j)] = Complex64::new(1.0, 0.0);
    }
    Ok(DenseOperator { dim: d, mat })
}

/// Clock operator `Z = Σ_j ω^j |j⟩⟨j|`.
pub fn clock_op(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    let mut mat = DMatrix::zeros(d, d);
    for j in 0..d {
        mat[(j, j)] = root_of_unity(d, (j % d) as f64);
    }
    Ok(DenseOperator { dim: d, mat })
}

/// `X^α Z^β`, built in closed form: the only nonzero entries are
/// `⟨j+α| X^α Z^β |j⟩ = ω^{βj}`.
pub fn weyl_op(d: usize, alpha: usize, beta: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    let (alpha, beta) = (alpha % d, beta % d);
    let mut mat = DMatrix::zeros(d, d);
    for j in 0..d {
        mat[((j + alpha) % d, j)] = root_of_unity(d, ((beta * j) % d) as f64);
    }
    Ok(DenseOperator { dim: d, mat })
}

/// `|φ⁺⟩ = d^{-1/2} Σ_j |jj⟩`.
pub fn bell_state(d: usize) -> Result<StateVector> {
    check_dim(d)?;
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        amps[j * d + j] = amp;
    }
    Ok(StateVector::from_amplitudes(amps))
}

/// `|φ_{α,β}⟩ = (1 ⊗ X^α Z^β)|φ⁺⟩`.
///
/// Written out, the amplitude on `|j, j+α⟩` is `ω^{βj}/√d`.
pub fn bell_basis_vector(d: usize, alpha: usize, beta: usize) -> Result<StateVector> {
    check_dim(d)?;
    let (alpha, beta) = (alpha % d, beta % d);
    let norm = 1.0 / (d as f64).sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        amps[j * d + (j + alpha) % d] = root_of_unity(d, ((beta * j) % d) as f64) * norm;
    }
    Ok(StateVector::from_amplitudes(amps))
}

/// Normalized `j`-th eigenvector of `X Z^k`.
///
/// Odd `d` uses the phase `lj + k l(l-1)/2`, even `d` uses `lj + k l²/2`;
/// half-integer exponents are evaluated as `exp(2πi e / d)` directly.
pub fn mub_vector(d: usize, k: usize, j: usize) -> Result<StateVector> {
    check_dim(d)?;
    if k >= d {
        return Err(Error::IndexOutOfRange {
            what: "k",
            value: k,
            bound: d,
        });
    }
    if j >= d {
        return Err(Error::IndexOutOfRange {
            what: "j",
            value: j,
            bound: d,
        });
    }
    let norm = 1.0 / (d as f64).sqrt();
    let amps = (0..d)
        .map(|l| {
            // Reduce the integer part mod d to keep the argument small.
            let linear = ((l * j) % d) as f64;
            let quad = if d % 2 == 1 {
                ((k * (l * (l.saturating_sub(1)) / 2)) % d) as f64
            } else {
                // k l² / 2 mod d, possibly half-integer
                ((k * l * l) % (2 * d)) as f64 / 2.0
            };
            root_of_unity(d, linear + quad) * norm
        })
        .collect();
    Ok(StateVector::from_amplitudes(amps))
}

/// Computational (Z-eigen) basis of `C^d`.
pub fn computational_basis(d: usize) -> Result<Vec<StateVector>> {
    check_dim(d)?;
    Ok((0..d)
        .map(|j| {
            let mut amps = vec![Complex64::new(0.0, 0.0); d];
            amps[j] = Complex64::new(1.0, 0.0);
            StateVector::from_amplitudes(amps)
        })
        .collect())
}

/// Full eigenbasis of `X Z^k`.
pub fn mub_basis(d: usize, k: usize) -> Result<Vec<StateVector>> {
    (0..d).map(|j| mub_vector(d, k, j)).collect()
}

/// The bases measured when `m` MUBs are in use: Z, then `X Z^k` for
/// `k = 0, …, m-2`.
pub fn measured_bases(d: usize, m: usize) -> Result<Vec<Vec<StateVector>>> {
    check_dim(d)?;
    if m < 2 || m > d + 1 {
        return Err(Error::InvalidBasisCount { d, m });
    }
    let mut out = Vec::with_capacity(m);
    out.push(computational_basis(d)?);
    for k in 0..m - 1 {
        out.push(mub_basis(d, k)?);
    }
    Ok(out)
}

/// Largest deviation of `|⟨a|b⟩|²` from `1/d` over all pairs.
pub fn check_mutually_unbiased(a: &[StateVector], b: &[StateVector]) -> Result<f64> {
    let d = a.len();
    if b.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.len(),
        });
    }
    let target = 1.0 / d as f64;
    let mut worst: f64 = 0.0;
    for va in a {
        for vb in b {
            if va.dim() != d || vb.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: va.dim().max(vb.dim()),
                });
            }
            worst = worst.max((va.inner(vb).norm_sqr() - target).abs());
        }
    }
    Ok(worst)
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            return false;
        }
        p += 1;
    }
    true
}

/// `Some(p)` when `n = p^e` for a prime `p` and `e ≥ 1`.
pub fn prime_power_base(n: usize) -> Option<usize> {
    if n < 2 {
        return None;
    }
    let p = (2..=n).find(|&p| n.is_multiple_of(p))?;
    let mut rest = n;
    while rest.is_multiple_of(p) {
        rest /= p;
    }
    (rest == 1).then_some(p)
}

/// Number of bases this crate can construct as a guaranteed MUB set.
pub fn max_num_mubs(d: usize) -> usize {
    if is_prime(d) {
        d + 1
    } else {
        3
    }
}

/// Human-readable note on which MUB counts are backed by a construction.
pub fn mub_diagnostic(d: usize) -> Option<String> {
    if is_prime(d) {
        return None;
    }
    match prime_power_base(d) {
        Some(p) => Some(format!(
            "d = {d} is a power of {p}: a full set of {} MUBs exists (Galois-field \
             construction, not built here); the Weyl construction guarantees only 3",
            d + 1
        )),
        None => Some(format!(
            "d = {d} is not a prime power: only the Z, X and XZ bases are guaranteed unbiased"
        )),
    }
}
