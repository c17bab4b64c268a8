//! Finite-size key-length assembly: statistical radius for parameter
//! estimation, error-correction leakage, the order-dependent penalty, and
//! the scan over the divergence order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{ObjectiveFn, PerturbedObjective, RenyiParams};
use crate::optimizer::{
    minimize_and_certify, minimize_and_certify_from, CertifiedBound, FeasibleSet, FwConfig,
    FwOutcome,
};
use crate::protocol::ProtocolInstance;
use crate::types::DensityOperator;

/// Failure probabilities of the three classical post-processing steps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecurityParams {
    pub eps_pa: f64,
    pub eps_ev: f64,
    pub eps_pe: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_pa: 1e-10,
            eps_ev: 1e-10,
            eps_pe: 1e-10,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_pa", self.eps_pa),
            ("eps_ev", self.eps_ev),
            ("eps_pe", self.eps_pe),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }

    /// Total failure budget of the assembled protocol.
    pub fn total(&self) -> f64 {
        self.eps_pa + self.eps_ev + self.eps_pe
    }
}

/// Block-size accounting: N total rounds split into key generation and
/// parameter estimation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiniteSizeParams {
    pub n_total: u64,
    /// Fraction of rounds used for key generation.
    pub p_gen: f64,
    /// Rounds used for parameter estimation, round((1 - p_gen) N).
    pub m: u64,
    pub f_ec: f64,
}

impl FiniteSizeParams {
    pub fn new(n_total: u64, p_gen: f64, f_ec: f64) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::InvalidParameter {
                name: "n_total",
                value: 0.0,
            });
        }
        if !(p_gen > 0.0 && p_gen < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_gen",
                value: p_gen,
            });
        }
        if !(f_ec >= 1.0 && f_ec.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "f_ec",
                value: f_ec,
            });
        }
        let m = ((1.0 - p_gen) * n_total as f64).round() as u64;
        if m == 0 || m >= n_total {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m as f64,
            });
        }
        Ok(Self {
            n_total,
            p_gen,
            m,
            f_ec,
        })
    }

    /// Rounds available for key generation.
    pub fn n_key(&self) -> u64 {
        self.n_total - self.m
    }
}

/// Statistical radius of the parameter-estimation ball:
/// sqrt(2) sqrt((ln(1/eps) + |Sigma| ln(m+1)) / m).
pub fn pe_radius(eps_pe: f64, sigma_card: usize, m: u64) -> Result<f64> {
    if !(eps_pe > 0.0 && eps_pe < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps_pe",
            value: eps_pe,
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
        });
    }
    let mf = m as f64;
    let inner = ((1.0 / eps_pe).ln() + sigma_card as f64 * (mf + 1.0).ln()) / mf;
    Ok((2.0 * inner).sqrt())
}

/// Bits disclosed during error correction: n f_EC H(Z|Y).
pub fn ec_leakage(n: u64, f_ec: f64, h_zy: f64) -> Result<f64> {
    if !(f_ec >= 1.0 && f_ec.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "f_ec",
            value: f_ec,
        });
    }
    if !(h_zy >= 0.0 && h_zy.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h_zy",
            value: h_zy,
        });
    }
    Ok(n as f64 * f_ec * h_zy)
}

/// Order-dependent penalty subtracted from the accumulated entropy:
/// g(alpha) = alpha/(alpha-1) log2(1/eps_PA) + lambda_EC + log2(1/eps_EV) - 2.
pub fn g_alpha(alpha: f64, sp: &SecurityParams, lambda_ec: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
        });
    }
    sp.validate()?;
    Ok(
        alpha / (alpha - 1.0) * (1.0 / sp.eps_pa).log2() + lambda_ec + (1.0 / sp.eps_ev).log2()
            - 2.0,
    )
}

/// Per-run solver and certificate telemetry carried along the key-rate
/// numbers.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunDiagnostics {
    pub fw_iterations: usize,
    pub fw_gap: f64,
    pub fw_converged: bool,
    pub dual_residual: f64,
    pub certified: bool,
    pub duality_gap: f64,
    pub mu_ball: f64,
    /// |f at the configured perturbation - f at a tenth of it|, evaluated at
    /// the minimizer; gauges how much the positivity floor moves the answer.
    pub epsilon_sensitivity: f64,
    pub solver_status: String,
}

/// One fully assembled finite-size evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct KeyRateReport {
    pub alpha: f64,
    pub beta: f64,
    /// Certified lower bound on the objective, bits per round.
    pub min_f_certified: f64,
    pub lambda_ec: f64,
    pub g_alpha: f64,
    /// l = min_f n_key - g(alpha); may be negative.
    pub key_length: f64,
    /// max(l, 0) / N.
    pub key_rate: f64,
    pub n_total: u64,
    pub p_gen: f64,
    pub m: u64,
    pub f_ec: f64,
    pub eps_pa: f64,
    pub eps_ev: f64,
    pub eps_pe: f64,
    pub h_zy: f64,
    pub diagnostics: RunDiagnostics,
}

/// Assembles the key length from a certified objective bound. `h_zy` is the
/// conditional entropy per key-generation round (sifting included), feeding
/// the leakage term.
pub fn key_length(
    min_f: f64,
    fp: &FiniteSizeParams,
    sp: &SecurityParams,
    alpha: f64,
    h_zy: f64,
) -> Result<KeyRateReport> {
    let params = RenyiParams::from_alpha(alpha)?;
    let lambda_ec = ec_leakage(fp.n_key(), fp.f_ec, h_zy)?;
    let g = g_alpha(alpha, sp, lambda_ec)?;
    let l = min_f * fp.n_key() as f64 - g;
    let key_rate = l.max(0.0) / fp.n_total as f64;
    Ok(KeyRateReport {
        alpha,
        beta: params.beta,
        min_f_certified: min_f,
        lambda_ec,
        g_alpha: g,
        key_length: l,
        key_rate,
        n_total: fp.n_total,
        p_gen: fp.p_gen,
        m: fp.m,
        f_ec: fp.f_ec,
        eps_pa: sp.eps_pa,
        eps_ev: sp.eps_ev,
        eps_pe: sp.eps_pe,
        h_zy,
        diagnostics: RunDiagnostics::default(),
    })
}

/// Knobs of a single minimize-certify-assemble pass.
#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub eps_perturb: f64,
    pub fw: FwConfig,
    /// Extra radius for uncertainty in the target frequencies themselves.
    pub t_ball: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            eps_perturb: 1e-8,
            fw: FwConfig::default(),
            t_ball: 0.0,
        }
    }
}

/// Everything a single pipeline pass produces.
pub struct PipelineOutcome {
    pub report: KeyRateReport,
    pub fw: FwOutcome,
    pub bound: CertifiedBound,
}

/// Runs minimization and certification for one divergence order and
/// assembles the finite-size report. A warm-start state (from a nearby
/// order) skips the interior-point seeding.
pub fn run_point(
    instance: &ProtocolInstance,
    fp: &FiniteSizeParams,
    sp: &SecurityParams,
    alpha: f64,
    opts: &PipelineOptions,
    warm: Option<&DensityOperator>,
) -> Result<PipelineOutcome> {
    sp.validate()?;
    let mu = pe_radius(sp.eps_pe, instance.pe_observables.len(), fp.m)?;
    let set = FeasibleSet::from_instance(instance, mu, opts.t_ball)?;
    let params = RenyiParams::from_alpha(alpha)?;
    let obj = PerturbedObjective::new(
        &instance.gmap,
        instance.zmap.clone(),
        params,
        opts.eps_perturb,
    )?;

    let (fw, bound) = match warm {
        Some(rho0) if set.is_feasible(rho0, 1e-8) => {
            minimize_and_certify_from(&obj, &set, &opts.fw, rho0)?
        }
        _ => minimize_and_certify(&obj, &set, &opts.fw)?,
    };

    // two-point probe of the positivity-floor sensitivity at the minimizer
    let obj_tenth = PerturbedObjective::new(
        &instance.gmap,
        instance.zmap.clone(),
        params,
        opts.eps_perturb / 10.0,
    )?;
    let epsilon_sensitivity = (obj.value(&fw.rho_hat)? - obj_tenth.value(&fw.rho_hat)?).abs();

    let h_eff = instance.sift_prob * instance.hzy;
    let mut report = key_length(bound.value, fp, sp, alpha, h_eff)?;
    report.diagnostics = RunDiagnostics {
        fw_iterations: fw.iterations.len(),
        fw_gap: fw.final_gap,
        fw_converged: fw.converged,
        dual_residual: bound.dual_feasibility_residual,
        certified: bound.certified,
        duality_gap: bound.duality_gap,
        mu_ball: mu,
        epsilon_sensitivity,
        solver_status: fw
            .iterations
            .last()
            .map(|r| r.solver_status.clone())
            .unwrap_or_default(),
    };
    Ok(PipelineOutcome { report, fw, bound })
}

/// Result of scanning the divergence order over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaScan {
    pub alpha_star: f64,
    pub best: KeyRateReport,
    /// One report per grid point, in grid order.
    pub points: Vec<KeyRateReport>,
    /// Set when no grid point yields a positive key length.
    pub zero_rate: bool,
}

/// Default grid: 25 points with alpha - 1 log-spaced across [5e-4, 1],
/// dense near 1 where the penalty term moves fastest.
pub fn default_alpha_grid() -> Vec<f64> {
    let n = 25;
    let lo = (5e-4f64).log10();
    let hi = 0.0f64;
    (0..n)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            1.0 + 10f64.powf(t)
        })
        .collect()
}

/// Runs the full pipeline at every grid order, warm-starting each point
/// from the previous minimizer, and returns the rate-maximizing order with
/// all per-point reports.
pub fn optimize_alpha(
    instance: &ProtocolInstance,
    fp: &FiniteSizeParams,
    sp: &SecurityParams,
    grid: &[f64],
    opts: &PipelineOptions,
) -> Result<AlphaScan> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "alpha_grid",
            value: 0.0,
        });
    }
    for &a in grid {
        if !(a > 1.0 && a <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "alpha_grid",
                value: a,
            });
        }
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut warm: Option<DensityOperator> = None;
    for &alpha in grid {
        let outcome = run_point(instance, fp, sp, alpha, opts, warm.as_ref())?;
        warm = Some(outcome.fw.rho_hat);
        points.push(outcome.report);
    }
    let best_idx = points
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.key_length
                .partial_cmp(&b.key_length)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap();
    let zero_rate = points.iter().all(|p| p.key_length <= 0.0);
    Ok(AlphaScan {
        alpha_star: points[best_idx].alpha,
        best: points[best_idx].clone(),
        points,
        zero_rate,
    })
}

/// Sign changes in the discrete differences of the per-point key rates,
/// ignoring steps below `tol` (solver noise); 0 or 1 for a unimodal curve.
pub fn rate_sign_changes(points: &[KeyRateReport], tol: f64) -> usize {
    let rates: Vec<f64> = points.iter().map(|p| p.key_rate).collect();
    let mut signs = Vec::new();
    for w in rates.windows(2) {
        let d = w[1] - w[0];
        if d.abs() > tol {
            signs.push(d > 0.0);
        }
    }
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
