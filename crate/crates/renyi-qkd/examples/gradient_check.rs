// Directional derivatives of the perturbed objective against central
// differences, on the BB84 instance at a few orders.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renyi_qkd::error::Result;
use renyi_qkd::objective::{finite_diff_gradient, gradient_f, PerturbedObjective, RenyiParams};
use renyi_qkd::protocol::bb84_pm_instance;
use renyi_qkd::types::{DensityOperator, HermitianMatrix, C64};

fn random_density(rng: &mut ChaCha8Rng, d: usize) -> Result<DensityOperator> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let mut w = &g * g.adjoint();
    for i in 0..d {
        w[(i, i)] += C64::new(0.05 * d as f64, 0.0);
    }
    let tr: f64 = (0..d).map(|i| w[(i, i)].re).sum();
    DensityOperator::new(w.unscale(tr))
}

fn main() -> Result<()> {
    let inst = bb84_pm_instance(0.03, 0.1)?;
    let d = inst.dims.in_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!("f'(rho; tau - rho), analytic vs central difference (d = {d}):");
    for alpha in [1.1, 1.3, 1.8] {
        let obj = PerturbedObjective::new(
            &inst.gmap,
            inst.zmap.clone(),
            RenyiParams::from_alpha(alpha)?,
            1e-8,
        )?;
        let rho = random_density(&mut rng, d)?;
        let tau = random_density(&mut rng, d)?;
        let delta = HermitianMatrix::new(tau.mat() - rho.mat())?;

        let analytic = gradient_f(&rho, &obj)?.inner(&delta);
        let numeric = finite_diff_gradient(&rho, &tau, &obj, 1e-5)?;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        println!("  alpha = {alpha:<4}  analytic {analytic:+.10e}  numeric {numeric:+.10e}  rel {rel:.2e}");
        assert!(rel < 1e-6, "gradient mismatch at alpha = {alpha}");
    }
    println!("all directions agree to 1e-6");
    Ok(())
}
