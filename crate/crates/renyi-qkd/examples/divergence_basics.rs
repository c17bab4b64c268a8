// Sandwiched divergences between small states: a pure state against the
// maximally mixed qubit across orders, the commuting reduction, and the
// support condition.

use nalgebra::{DMatrix, DVector};
use renyi_qkd::error::Result;
use renyi_qkd::objective::renyi_divergence;
use renyi_qkd::types::{DensityOperator, C64};

fn main() -> Result<()> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let plus =
        DensityOperator::from_pure(&DVector::from_vec(vec![C64::new(r, 0.0), C64::new(r, 0.0)]))?;
    let mixed = DensityOperator::maximally_mixed(2);

    // pure rho against I/2: Q = 2^(beta-1), so every order gives exactly 1 bit
    println!("D_beta(|+><+| || I/2):");
    for beta in [0.25, 0.5, 0.75, 1.5, 2.0] {
        println!(
            "  beta = {beta:<4}  ->  {:.12}",
            renyi_divergence(&plus, &mixed, beta)?
        );
    }

    // commuting pair: matches sum p^beta q^(1-beta) directly
    let p = [0.7, 0.2, 0.1];
    let q = [0.5, 0.3, 0.2];
    let diag = |v: &[f64]| {
        DensityOperator::new(DMatrix::from_diagonal(&DVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::new(x, 0.0)),
        )))
    };
    let (rho_c, sigma_c) = (diag(&p)?, diag(&q)?);
    println!("\nclassical pair, library vs closed form:");
    for beta in [0.3, 0.6, 0.9, 1.8] {
        let lib = renyi_divergence(&rho_c, &sigma_c, beta)?;
        let closed: f64 = p
            .iter()
            .zip(&q)
            .map(|(&pi, &qi)| pi.powf(beta) * qi.powf(1.0 - beta))
            .sum();
        let closed = closed.log2() / (beta - 1.0);
        println!("  beta = {beta:<4}  lib {lib:+.12}  closed {closed:+.12}");
    }

    // monotone in the order on a fixed non-commuting pair
    let sigma = plus.mix(&mixed, 0.6)?;
    let rho = DensityOperator::from_pure(&DVector::from_vec(vec![
        C64::new(0.8, 0.0),
        C64::new(0.0, 0.6),
    ]))?
    .mix(&mixed, 0.3)?;
    println!("\norder monotonicity on a non-commuting pair:");
    let mut prev = f64::NEG_INFINITY;
    for beta in [0.4, 0.7, 0.95, 1.2, 1.7] {
        let d = renyi_divergence(&rho, &sigma, beta)?;
        assert!(d >= prev - 1e-12);
        prev = d;
        println!("  beta = {beta:<4}  ->  {d:.12}");
    }

    // orthogonal supports are rejected, not returned as infinity
    let zero = DensityOperator::from_pure(&DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
    ]))?;
    let one = DensityOperator::from_pure(&DVector::from_vec(vec![
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
    ]))?;
    match renyi_divergence(&zero, &one, 0.5) {
        Err(e) => println!("\ndisjoint supports: {e}"),
        Ok(v) => unreachable!("expected a support error, got {v}"),
    }
    Ok(())
}
