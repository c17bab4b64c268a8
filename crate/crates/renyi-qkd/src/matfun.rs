//! Spectral kernels: Hermitian eigendecomposition, operator powers on the
//! support, pinching, and the weighted resolvent integral behind the
//! Renyi-objective gradient.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{CMat, EigenSystem, HermitianMatrix, PinchingMap, C64};

/// Eigenvalues below SUPPORT_CUT_REL times the largest eigenvalue are treated
/// as zero when powers are taken on the support.
pub const SUPPORT_CUT_REL: f64 = 1e-12;

/// Relative eigenvalue gap below which the divided difference
/// (b_i^mu - b_j^mu)/(b_i - b_j) switches to its limit mu * b^(mu-1).
pub const DEGENERACY_TOL_REL: f64 = 1e-9;

/// Spectral decomposition with eigenvalues sorted ascending.
pub fn eig_hermitian(m: &HermitianMatrix) -> Result<EigenSystem> {
    // HermitianMatrix is validated on construction; re-check cheaply so that
    // internally built matrices get the same guarantee.
    let dev = linalg::hermiticity_deviation(m.mat());
    let scale = linalg::max_abs(m.mat()).max(1.0);
    if dev > crate::types::HERMITICITY_TOL * scale * 10.0 {
        return Err(Error::NotHermitian {
            deviation: dev,
            tol: crate::types::HERMITICITY_TOL * scale * 10.0,
        });
    }
    Ok(eig_trusted(m.mat()))
}

/// Eigendecomposition without the Hermiticity re-check, for matrices that are
/// Hermitian by construction. Eigenvalues ascending.
pub(crate) fn eig_trusted(m: &CMat) -> EigenSystem {
    let se = m.clone().symmetric_eigen();
    let d = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| se.eigenvalues[i]));
    let mut eigenvectors = CMat::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        eigenvectors.set_column(col, &se.eigenvectors.column(src));
    }
    EigenSystem {
        eigenvalues,
        eigenvectors,
    }
}

/// M^p on the support of M: eigenvalues below the support cut map to 0 for
/// every p, so negative powers are pseudo-inverse powers.
pub fn matrix_power(m: &HermitianMatrix, p: f64) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(m)?;
    let powered = power_from_eig(&eig, p)?;
    Ok(HermitianMatrix::trusted(powered))
}

/// Power from a precomputed eigendecomposition (shared by the gradient path,
/// which reuses one decomposition for several powers).
pub(crate) fn power_from_eig(eig: &EigenSystem, p: f64) -> Result<CMat> {
    let lambda_max = eig.max_eigenvalue().max(0.0);
    let cut = SUPPORT_CUT_REL * lambda_max;
    let min = eig.min_eigenvalue();
    if min < -cut.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    Ok(eig.apply(|l| if l <= cut { 0.0 } else { l.powf(p) }))
}

/// Sum_i P_i M P_i for the projector family in Z.
pub fn pinch(m: &HermitianMatrix, z: &PinchingMap) -> Result<HermitianMatrix> {
    if m.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            found: m.dim(),
        });
    }
    Ok(HermitianMatrix::trusted(z.apply(m.mat())))
}

/// Tr(M^p) = ||M||_p^p on the support, for PSD M and p > 0.
pub fn schatten_norm_pow(m: &HermitianMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "schatten exponent p",
            value: p,
        });
    }
    let eig = eig_hermitian(m)?;
    let lambda_max = eig.max_eigenvalue().max(0.0);
    let cut = SUPPORT_CUT_REL * lambda_max;
    if eig.min_eigenvalue() < -cut.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: eig.min_eigenvalue(),
        });
    }
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > cut)
        .map(|&l| l.powf(p))
        .sum())
}

/// The integral ∫₀^∞ (B+t)⁻¹ A (B+t)⁻¹ t^μ dt for strictly positive B and
/// μ in (0,1).
///
/// In B's eigenbasis the integral acts entrywise: entry (i,j) of the rotated A
/// picks up L(μ)⁻¹ (bᵢ^μ − bⱼ^μ)/(bᵢ − bⱼ) with L(μ) = sin(πμ)/π, the limit
/// μ bᵢ^{μ−1} taken on (near-)degenerate pairs.
pub fn frechet_integral(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    mu: f64,
) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: a.dim(),
        });
    }
    let eig_b = eig_hermitian(b)?;
    let out = frechet_from_eig(a.mat(), &eig_b, mu, true)?;
    Ok(HermitianMatrix::trusted(out))
}

/// Core of `frechet_integral` on a precomputed eigendecomposition of B.
///
/// Accepts a general (not necessarily Hermitian) A, in which case the result
/// is not Hermitian either. With `include_l_inverse` the entrywise factor is
/// L(μ)⁻¹ times the divided difference; without it, the bare divided
/// difference (the form the gradient needs, where the L(μ) prefactor of the
/// integral cancels).
pub(crate) fn frechet_from_eig(
    a: &CMat,
    eig_b: &EigenSystem,
    mu: f64,
    include_l_inverse: bool,
) -> Result<CMat> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidParameter {
            name: "mu",
            value: mu,
        });
    }
    let d = eig_b.dim();
    let lambda_max = eig_b.max_eigenvalue();
    let cut = SUPPORT_CUT_REL * lambda_max.max(0.0);
    let min = eig_b.min_eigenvalue();
    if min <= cut.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    let b = &eig_b.eigenvalues;
    // kernel of divided differences (b_i^mu - b_j^mu)/(b_i - b_j)
    let mut kernel = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            let (bi, bj) = (b[i], b[j]);
            let gap = bi - bj;
            let val = if gap.abs() <= DEGENERACY_TOL_REL * bi.max(bj) {
                let mid = 0.5 * (bi + bj);
                mu * mid.powf(mu - 1.0)
            } else {
                // b_j^mu * expm1(mu * ln(b_i/b_j)) / gap, stable for close pairs
                bj.powf(mu) * (mu * (gap / bj).ln_1p()).exp_m1() / gap
            };
            kernel[i * d + j] = val;
        }
    }
    let scale = if include_l_inverse {
        std::f64::consts::PI / (std::f64::consts::PI * mu).sin()
    } else {
        1.0
    };
    let v = &eig_b.eigenvectors;
    let a_rot = v.adjoint() * a * v;
    let mut out_rot = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out_rot[(i, j)] = a_rot[(i, j)] * C64::new(kernel[i * d + j] * scale, 0.0);
        }
    }
    Ok(v * out_rot * v.adjoint())
}
