// The weighted resolvent integral int_0^inf (B+t)^-1 A (B+t)^-1 t^mu dt,
// evaluated through the eigenbasis divided-difference kernel. The A = B = I
// case has the closed form (pi mu / sin(pi mu)) I; a second check confirms
// linearity in A.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renyi_qkd::error::Result;
use renyi_qkd::matfun::frechet_integral;
use renyi_qkd::types::{HermitianMatrix, C64};

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Result<HermitianMatrix> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    HermitianMatrix::new((&g + g.adjoint()).scale(0.5))
}

fn random_positive(rng: &mut ChaCha8Rng, d: usize) -> Result<HermitianMatrix> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let mut w = (&g * g.adjoint()).unscale(d as f64);
    for i in 0..d {
        w[(i, i)] += C64::new(0.1, 0.0);
    }
    HermitianMatrix::new(w)
}

fn main() -> Result<()> {
    let d = 5;
    let eye = HermitianMatrix::identity(d);

    println!("identity case vs pi mu / sin(pi mu):");
    for mu in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let k = frechet_integral(&eye, &eye, mu)?;
        let want = std::f64::consts::PI * mu / (std::f64::consts::PI * mu).sin();
        let got = k.mat()[(0, 0)].re;
        println!("  mu = {mu:<4}  got {got:.12}  want {want:.12}");
        assert!((got - want).abs() < 1e-10 * want);
    }

    // linearity in A: K(A1 + 2 A2) = K(A1) + 2 K(A2)
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = random_positive(&mut rng, d)?;
    let a1 = random_hermitian(&mut rng, d)?;
    let a2 = random_hermitian(&mut rng, d)?;
    let mu = 0.3;
    let lhs = frechet_integral(
        &HermitianMatrix::new(a1.mat() + a2.mat().scale(2.0))?,
        &b,
        mu,
    )?;
    let rhs =
        frechet_integral(&a1, &b, mu)?.mat() + frechet_integral(&a2, &b, mu)?.mat().scale(2.0);
    let rel = (lhs.mat() - &rhs).norm() / rhs.norm();
    println!("\nlinearity in A at mu = {mu}: relative defect {rel:.2e}");
    assert!(rel < 1e-12);

    // the kernel requires B > 0; a singular B is rejected up front
    let mut singular = DMatrix::zeros(d, d);
    singular[(0, 0)] = C64::new(1.0, 0.0);
    match frechet_integral(&a1, &HermitianMatrix::new(singular)?, mu) {
        Err(e) => println!("singular B: {e}"),
        Ok(_) => unreachable!("expected rejection of a singular base point"),
    }
    Ok(())
}
