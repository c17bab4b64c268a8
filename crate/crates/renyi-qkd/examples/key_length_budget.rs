// The finite-size budget without any optimization: how the statistical
// radius, the error-correction leakage, and the order-dependent penalty
// split a hypothetical entropy bound into key bits.

use renyi_qkd::error::Result;
use renyi_qkd::finitesize::{
    ec_leakage, g_alpha, key_length, pe_radius, FiniteSizeParams, SecurityParams,
};

fn main() -> Result<()> {
    let sp = SecurityParams::default();
    let h_zy = 0.12; // conditional entropy per key round, sifting included
    let min_f = 0.80; // pretend a certified bound of 0.8 bits per round

    println!("statistical radius, 36 estimation outcomes:");
    for m in [50_000u64, 500_000, 5_000_000, 50_000_000] {
        println!("  m = {m:>10}  mu = {:.6}", pe_radius(sp.eps_pe, 36, m)?);
    }

    println!("\npenalty g(alpha) at eps = 1e-10 and a 1e4-bit leakage:");
    let lam = 1e4;
    for alpha in [1.001, 1.01, 1.1, 1.5, 2.0] {
        println!(
            "  alpha = {alpha:<5}  g = {:>12.1}",
            g_alpha(alpha, &sp, lam)?
        );
    }

    println!("\nassembled key length, p_gen = 0.5, f_EC = 1.16:");
    println!(
        "{:>12} {:>12} {:>14} {:>10}",
        "N", "leakage", "key bits", "rate"
    );
    for n in [100_000u64, 1_000_000, 10_000_000] {
        let fp = FiniteSizeParams::new(n, 0.5, 1.16)?;
        let lam = ec_leakage(fp.n_key(), fp.f_ec, h_zy)?;
        let report = key_length(min_f, &fp, &sp, 1.05, h_zy)?;
        println!(
            "{:>12} {:>12.1} {:>14.1} {:>10.6}",
            n, lam, report.key_length, report.key_rate
        );
    }

    // the same bound yields nothing if the block is too small
    let fp = FiniteSizeParams::new(2_000, 0.5, 1.16)?;
    let starved = key_length(min_f, &fp, &sp, 1.05, h_zy)?;
    println!(
        "\nN = 2000: key length {:.1}, rate {}",
        starved.key_length, starved.key_rate
    );
    Ok(())
}
