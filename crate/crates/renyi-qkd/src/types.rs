//! Core operator types shared across the crate.
//!
//! Validation happens at construction so downstream code can assume
//! Hermiticity, positivity and normalization instead of re-checking them
//! inside every numerical kernel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Relative Hermiticity tolerance: ||M - M'|| may not exceed this times ||M||.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Eigenvalues above -PSD_TOL are accepted as nonnegative.
pub const PSD_TOL: f64 = 1e-10;

/// A square complex matrix validated to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMat,
}

impl HermitianMatrix {
    /// Validates Hermiticity to `HERMITICITY_TOL` (relative) and symmetrizes
    /// the accepted matrix so stored entries are exactly Hermitian.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let scale = linalg::max_abs(&m).max(1.0);
        let deviation = linalg::hermiticity_deviation(&m);
        if deviation > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                deviation,
                tol: HERMITICITY_TOL * scale,
            });
        }
        Ok(Self {
            m: linalg::hermitian_part(&m),
        })
    }

    /// Wraps a matrix that is Hermitian by construction.
    pub(crate) fn trusted(m: CMat) -> Self {
        Self {
            m: linalg::hermitian_part(&m),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMat::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Hilbert-Schmidt inner product Tr(A B), real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        linalg::inner(&self.m, &other.m)
    }
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; column j of `eigenvectors` belongs to
/// `eigenvalues[j]`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMat,
}

impl EigenSystem {
    /// V f(diag) V' for a scalar function applied to the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..d {
            let fj = C64::new(f(self.eigenvalues[j]), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    /// Reassembles V diag(eigenvalues) V'.
    pub fn reconstruct(&self) -> CMat {
        self.apply(|x| x)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// A subnormalized quantum state: Hermitian, positive semidefinite within
/// `PSD_TOL`, trace in (0, 1].
#[derive(Debug, Clone)]
pub struct DensityOperator {
    m: CMat,
    trace: f64,
}

impl DensityOperator {
    pub fn new(m: CMat) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let eig = crate::matfun::eig_hermitian(&h)?;
        let min = eig.min_eigenvalue();
        let scale = eig.max_eigenvalue().abs().max(1.0);
        if min < -PSD_TOL * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        let trace = h.trace();
        if trace <= 0.0 || trace > 1.0 + PSD_TOL {
            return Err(Error::TraceOutOfRange { trace });
        }
        Ok(Self {
            m: h.into_matrix(),
            trace,
        })
    }

    /// Wraps a matrix known to be a valid subnormalized state.
    pub(crate) fn trusted(m: CMat) -> Self {
        let h = linalg::hermitian_part(&m);
        let trace = h.trace().re;
        Self { m: h, trace }
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        let m = CMat::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Self { m, trace: 1.0 }
    }

    /// |v><v| / <v|v>, rejecting the zero vector.
    pub fn from_pure(v: &DVector<C64>) -> Result<Self> {
        let norm_sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "pure state norm",
                value: norm_sq,
            });
        }
        let m = v * v.adjoint() / C64::new(norm_sq, 0.0);
        Ok(Self { m, trace: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn mat(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix::trusted(self.m.clone())
    }

    /// Convex combination (1-lambda) self + lambda other.
    pub fn mix(&self, other: &DensityOperator, lambda: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        let m = &self.m * C64::new(1.0 - lambda, 0.0) + &other.m * C64::new(lambda, 0.0);
        Ok(Self::trusted(m))
    }
}

/// Pinching onto a family of orthogonal projectors summing to the identity.
///
/// The common case projects onto the blocks |i><i|_R (x) I of a classical key
/// register; `key_register` builds that family directly and remembers the
/// block structure so `apply` can skip the projector products.
#[derive(Debug, Clone)]
pub struct PinchingMap {
    projectors: Vec<CMat>,
    dim: usize,
    // (block count, block size) when the projectors are contiguous equal blocks
    block: Option<(usize, usize)>,
}

impl PinchingMap {
    /// Validates that the projectors are Hermitian, idempotent, mutually
    /// orthogonal and complete.
    pub fn new(projectors: Vec<CMat>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::InvalidProjectors {
                reason: "empty family",
                deviation: 0.0,
            });
        }
        let dim = projectors[0].nrows();
        let mut sum = CMat::zeros(dim, dim);
        for p in &projectors {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.nrows(),
                });
            }
            let herm_dev = linalg::hermiticity_deviation(p);
            if herm_dev > 1e-10 {
                return Err(Error::InvalidProjectors {
                    reason: "not Hermitian",
                    deviation: herm_dev,
                });
            }
            let idem_dev = linalg::max_abs(&(p * p - p));
            if idem_dev > 1e-10 {
                return Err(Error::InvalidProjectors {
                    reason: "not idempotent",
                    deviation: idem_dev,
                });
            }
            sum += p;
        }
        for (i, p) in projectors.iter().enumerate() {
            for q in projectors.iter().skip(i + 1) {
                let cross = linalg::max_abs(&(p * q));
                if cross > 1e-10 {
                    return Err(Error::InvalidProjectors {
                        reason: "not mutually orthogonal",
                        deviation: cross,
                    });
                }
            }
        }
        let completeness = linalg::max_abs(&(&sum - CMat::identity(dim, dim)));
        if completeness > 1e-10 {
            return Err(Error::InvalidProjectors {
                reason: "does not sum to identity",
                deviation: completeness,
            });
        }
        Ok(Self {
            projectors,
            dim,
            block: None,
        })
    }

    /// Pinching of register R (the slowest tensor factor, dimension `dim_r`)
    /// in a space of total dimension `dim_r * dim_rest`.
    pub fn key_register(dim_r: usize, dim_rest: usize) -> Self {
        let dim = dim_r * dim_rest;
        let mut projectors = Vec::with_capacity(dim_r);
        for i in 0..dim_r {
            let mut p = CMat::zeros(dim, dim);
            for k in 0..dim_rest {
                let idx = i * dim_rest + k;
                p[(idx, idx)] = C64::new(1.0, 0.0);
            }
            projectors.push(p);
        }
        Self {
            projectors,
            dim,
            block: Some((dim_r, dim_rest)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projectors(&self) -> &[CMat] {
        &self.projectors
    }

    pub fn num_blocks(&self) -> usize {
        self.projectors.len()
    }

    /// Sum_i P_i M P_i. For block families this zeroes the off-diagonal
    /// blocks in place, avoiding the matrix products.
    pub fn apply(&self, m: &CMat) -> CMat {
        if let Some((nr, sz)) = self.block {
            let mut out = CMat::zeros(self.dim, self.dim);
            for blk in 0..nr {
                let off = blk * sz;
                for j in 0..sz {
                    for i in 0..sz {
                        out[(off + i, off + j)] = m[(off + i, off + j)];
                    }
                }
            }
            out
        } else {
            let mut out = CMat::zeros(self.dim, self.dim);
            for p in &self.projectors {
                out += p * m * p;
            }
            out
        }
    }
}
