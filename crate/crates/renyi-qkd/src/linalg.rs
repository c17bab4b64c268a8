//! Small dense linear-algebra helpers used throughout the crate.

use crate::types::{CMat, C64};

/// Largest entry magnitude.
pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// max_ij |M_ij - conj(M_ji)|.
pub(crate) fn hermiticity_deviation(m: &CMat) -> f64 {
    let d = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// (M + M') / 2.
pub(crate) fn hermitian_part(m: &CMat) -> CMat {
    let half = C64::new(0.5, 0.0);
    (m + m.adjoint()) * half
}

/// Tr(A B) taken real; exact for Hermitian A, B.
pub(crate) fn inner(a: &CMat, b: &CMat) -> f64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Real part of the trace.
pub(crate) fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Orthonormal basis of d x d Hermitian matrices under Tr(AB): the d diagonal
/// units first, then for each i < j the symmetric and antisymmetric pairs.
pub(crate) fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        let mut m = CMat::zeros(d, d);
        m[(k, k)] = C64::new(1.0, 0.0);
        basis.push(m);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = CMat::zeros(d, d);
            sym[(i, j)] = C64::new(s, 0.0);
            sym[(j, i)] = C64::new(s, 0.0);
            basis.push(sym);
            let mut asym = CMat::zeros(d, d);
            asym[(i, j)] = C64::new(0.0, s);
            asym[(j, i)] = C64::new(0.0, -s);
            basis.push(asym);
        }
    }
    basis
}

/// Trace over the second tensor factor of a (d1*d2) x (d1*d2) matrix, with
/// the first factor slowest (kron convention).
#[cfg(test)]
pub(crate) fn partial_trace_second(m: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = CMat::zeros(d1, d1);
    for a in 0..d1 {
        for ap in 0..d1 {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..d2 {
                acc += m[(a * d2 + b, ap * d2 + b)];
            }
            out[(a, ap)] = acc;
        }
    }
    out
}

/// Standard basis column vector.
pub(crate) fn basis_vector(d: usize, k: usize) -> nalgebra::DVector<C64> {
    let mut v = nalgebra::DVector::zeros(d);
    v[k] = C64::new(1.0, 0.0);
    v
}

/// |v><v| without normalization.
pub(crate) fn outer(v: &nalgebra::DVector<C64>) -> CMat {
    v * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn inner_matches_trace_of_product() {
        let a = CMat::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = C64::new(3.0, 0.0);
        b[(0, 1)] = C64::new(0.0, 1.0);
        b[(1, 0)] = C64::new(0.0, -1.0);
        b[(1, 1)] = C64::new(-1.0, 0.0);
        let direct = (&a * &b).trace().re;
        assert!((inner(&a, &b) - direct).abs() < 1e-14);
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 2.0);
        m[(1, 0)] = C64::new(-3.0, 4.0);
        let h = hermitian_part(&m);
        assert!(hermiticity_deviation(&h) < 1e-15);
    }
}
