//! The eigenbasis kernel for the resolvent integral against direct
//! numerical quadrature.

mod common;

use renyi_qkd::matfun::frechet_integral;
use renyi_qkd::types::HermitianMatrix;

#[test]
fn kernel_matches_quadrature_on_random_triples() {
    let mut rng = common::seeded_rng(0x4b21);
    for d in [4usize, 5, 6, 7, 8] {
        for mu in [0.05, 0.25, 0.45] {
            let a = common::random_hermitian(&mut rng, d);
            let b = common::random_positive(&mut rng, d, 0.1);
            let oracle = common::frechet_quadrature(a.mat(), b.mat(), mu);
            assert!(
                oracle.converged,
                "quadrature failed to settle at d={d} mu={mu}"
            );
            let kernel = frechet_integral(&a, &b, mu).unwrap();
            let diff = (kernel.mat() - &oracle.value).norm();
            let rel = diff / oracle.value.norm();
            assert!(rel <= 1e-8, "d={d} mu={mu}: relative error {rel:.3e}");
        }
    }
}

#[test]
fn identity_case_matches_closed_form() {
    // A = B = I: every eigenvalue pair degenerates, entry value
    // pi/sin(pi mu) * mu * 1^(mu-1) = pi mu / sin(pi mu)
    for mu in [0.05, 0.25, 0.45, 0.5, 0.75, 0.95] {
        for d in [2usize, 4, 8] {
            let eye = HermitianMatrix::identity(d);
            let out = frechet_integral(&eye, &eye, mu).unwrap();
            let expect = std::f64::consts::PI * mu / (std::f64::consts::PI * mu).sin();
            for i in 0..d {
                for j in 0..d {
                    let got = out.mat()[(i, j)];
                    let want = if i == j { expect } else { 0.0 };
                    assert!(
                        (got.re - want).abs() <= 1e-10 && got.im.abs() <= 1e-10,
                        "mu={mu} entry ({i},{j}): {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn near_degenerate_spectrum_stays_continuous() {
    // spectra 1e-9 apart must produce kernels 1e-6 close: the divided
    // difference path and the degenerate limit path have to agree
    let mut rng = common::seeded_rng(0x77aa);
    let a = common::random_hermitian(&mut rng, 4);
    let base = common::random_positive(&mut rng, 4, 0.2);
    let mut shifted = base.mat().clone();
    shifted[(0, 0)] += renyi_qkd::types::C64::new(1e-9, 0.0);
    let shifted = HermitianMatrix::new(shifted).unwrap();
    for mu in [0.05, 0.45] {
        let k0 = frechet_integral(&a, &base, mu).unwrap();
        let k1 = frechet_integral(&a, &shifted, mu).unwrap();
        let rel = (k0.mat() - k1.mat()).norm() / k0.mat().norm();
        assert!(rel <= 1e-6, "mu={mu}: kernel jumped by {rel:.3e}");
    }
}
