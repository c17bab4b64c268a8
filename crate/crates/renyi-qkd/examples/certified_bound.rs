// Anatomy of one certified minimization: the conditional iteration trace,
// the dual variables behind the bound, and a weak-duality spot check against
// independently constructed feasible states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renyi_qkd::error::Result;
use renyi_qkd::finitesize::pe_radius;
use renyi_qkd::objective::{ObjectiveFn, PerturbedObjective, RenyiParams};
use renyi_qkd::optimizer::{initial_point, minimize_and_certify, FeasibleSet, FwConfig};
use renyi_qkd::protocol::bb84_pm_instance;

fn main() -> Result<()> {
    let inst = bb84_pm_instance(0.03, 0.0)?;
    let mu = pe_radius(1e-10, inst.pe_observables.len(), 50_000)?;
    let set = FeasibleSet::from_instance(&inst, mu, 0.0)?;
    let obj = PerturbedObjective::new(
        &inst.gmap,
        inst.zmap.clone(),
        RenyiParams::from_alpha(1.3)?,
        1e-8,
    )?;

    let (fw, bound) = minimize_and_certify(&obj, &set, &FwConfig::default())?;

    println!("alpha = 1.3, statistical radius mu = {mu:.5}");
    println!(
        "{:>5} {:>14} {:>10} {:>8} {:>10}",
        "iter", "f", "gap", "step", "eq resid"
    );
    for r in fw
        .iterations
        .iter()
        .step_by(fw.iterations.len().div_ceil(12).max(1))
    {
        println!(
            "{:>5} {:>14.10} {:>10.2e} {:>8.4} {:>10.2e}",
            r.iter, r.f_value, r.gap, r.step_size, r.equality_residual
        );
    }
    println!("\nminimum found    {:.10}", fw.f_value);
    println!("certified bound  {:.10}", bound.value);
    println!("duality gap      {:.2e}", bound.duality_gap);
    println!("dual repair      {:.2e}", bound.dual_feasibility_residual);
    println!(
        "dual variables   {} equalities, {} deviations, ball multiplier {:.4}",
        bound.dual_variables.y.len(),
        bound.dual_variables.z.len(),
        bound.dual_variables.a
    );
    assert!(bound.certified && bound.value <= fw.f_value + 1e-9);

    // the bound sits below f on every feasible state we can construct
    let anchor = initial_point(&set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 8 {
        let other = bb84_pm_instance(rng.gen_range(0.0..0.1), 0.0)?.rho_ideal;
        let probe = other.mix(&anchor, rng.gen_range(0.0..1.0))?;
        if !set.is_feasible(&probe, 1e-8) {
            continue;
        }
        let f = obj.value(&probe)?;
        assert!(f >= bound.value - 1e-9);
        checked += 1;
        println!("  feasible probe {checked}: f = {f:.10} >= bound");
    }
    Ok(())
}
