//! Conditional-gradient minimization of a convex objective over the
//! constrained set of states, plus the linearization-based certified lower
//! bound on the minimum.

mod sdp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun;
use crate::objective::ObjectiveFn;
use crate::protocol::ProtocolInstance;
use crate::types::{CMat, DensityOperator, HermitianMatrix, C64};

pub(crate) use sdp::Geometry;

/// Constraint set: unit-trace positive semidefinite matrices satisfying
/// equality constraints Tr(Gamma_i rho) = gamma_i and an l1 ball
/// sum_j |Tr(PE_j rho) - fbar_j| <= mu_ball + t_ball around the target
/// frequencies (the second radius models uncertainty in the target itself;
/// the two balls compose exactly).
pub struct FeasibleSet {
    pub equality_constraints: Vec<(HermitianMatrix, f64)>,
    pub pe_observables: Vec<HermitianMatrix>,
    pub target_freq: Vec<f64>,
    pub mu_ball: f64,
    pub t_ball: f64,
    pub dim: usize,
}

/// Per-point constraint violations, all nonnegative only at exact members.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FeasibilityReport {
    /// max_i |Tr(Gamma_i rho) - gamma_i|
    pub equality_residual: f64,
    /// max(0, l1 deviation - radius)
    pub ball_excess: f64,
    pub min_eigenvalue: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.equality_residual
            .max(self.ball_excess)
            .max(-self.min_eigenvalue)
    }
}

impl FeasibleSet {
    pub fn new(
        equality_constraints: Vec<(HermitianMatrix, f64)>,
        pe_observables: Vec<HermitianMatrix>,
        target_freq: Vec<f64>,
        mu_ball: f64,
        t_ball: f64,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
            });
        }
        if pe_observables.len() != target_freq.len() {
            return Err(Error::DimensionMismatch {
                expected: pe_observables.len(),
                found: target_freq.len(),
            });
        }
        for (g, _) in &equality_constraints {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        for g in &pe_observables {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        if !(mu_ball >= 0.0 && mu_ball.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mu_ball",
                value: mu_ball,
            });
        }
        if !(t_ball >= 0.0 && t_ball.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_ball",
                value: t_ball,
            });
        }
        Ok(Self {
            equality_constraints,
            pe_observables,
            target_freq,
            mu_ball,
            t_ball,
            dim,
        })
    }

    /// Constraints of a protocol instance: its equality observables plus the
    /// statistical ball around the ideal frequencies. The ideal state must
    /// itself be feasible, which catches inconsistent construction early.
    pub fn from_instance(instance: &ProtocolInstance, mu_ball: f64, t_ball: f64) -> Result<Self> {
        let set = Self::new(
            instance.equality_observables.clone(),
            instance.pe_observables.clone(),
            instance.target_freq.clone(),
            mu_ball,
            t_ball,
            instance.rho_ideal.dim(),
        )?;
        let report = set.residuals(&instance.rho_ideal);
        if report.max_violation() > 1e-8 {
            return Err(Error::Infeasible {
                detail: format!(
                    "ideal state violates its own constraints (residual {:.3e})",
                    report.max_violation()
                ),
            });
        }
        Ok(set)
    }

    pub fn residuals(&self, rho: &DensityOperator) -> FeasibilityReport {
        let m = rho.mat();
        let equality_residual = self
            .equality_constraints
            .iter()
            .map(|(g, v)| (linalg::inner(g.mat(), m) - v).abs())
            .fold(0.0f64, f64::max);
        let deviation: f64 = self
            .pe_observables
            .iter()
            .zip(&self.target_freq)
            .map(|(g, f)| (linalg::inner(g.mat(), m) - f).abs())
            .sum();
        let ball_excess = (deviation - (self.mu_ball + self.t_ball)).max(0.0);
        let min_eigenvalue = matfun::eig_trusted(m).min_eigenvalue();
        FeasibilityReport {
            equality_residual,
            ball_excess,
            min_eigenvalue,
        }
    }

    pub fn is_feasible(&self, rho: &DensityOperator, tol: f64) -> bool {
        self.residuals(rho).max_violation() <= tol
    }
}

/// Conditional-gradient loop parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FwConfig {
    /// Stop when |<delta, grad>| falls below this.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Width tolerance of the step-size bisection.
    pub linesearch_tol: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            max_iters: 300,
            linesearch_tol: 1e-4,
        }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.gap_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gap_tol",
                value: self.gap_tol,
            });
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
            });
        }
        if !(self.linesearch_tol > 0.0 && self.linesearch_tol < 1.0) {
            return Err(Error::InvalidParameter {
                name: "linesearch_tol",
                value: self.linesearch_tol,
            });
        }
        Ok(())
    }
}

/// One linearized subproblem solution.
pub struct FwStep {
    /// Update direction sigma* - rho; zero when the gradient vanishes.
    pub delta: HermitianMatrix,
    /// The minimizing vertex sigma*.
    pub vertex: DensityOperator,
    /// <delta, grad>, nonpositive up to solver accuracy.
    pub gap: f64,
    pub solver_status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FwIterRecord {
    pub iter: usize,
    pub f_value: f64,
    pub gap: f64,
    pub step_size: f64,
    pub equality_residual: f64,
    pub ball_excess: f64,
    pub min_eigenvalue: f64,
    pub solver_status: String,
}

pub struct FwOutcome {
    pub rho_hat: DensityOperator,
    pub f_value: f64,
    pub final_gap: f64,
    pub converged: bool,
    pub iterations: Vec<FwIterRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualVariables {
    /// Multipliers of the equality constraints.
    pub y: Vec<f64>,
    /// Multipliers of the frequency deviations, |z_j| <= a.
    pub z: Vec<f64>,
    /// Multiplier of the ball radius.
    pub a: f64,
}

/// Lower bound on the constrained minimum of the objective, valid whenever
/// the reported dual variables are feasible (they are repaired to be, and
/// `dual_feasibility_residual` records how much repair was needed).
#[derive(Debug, Clone, Serialize)]
pub struct CertifiedBound {
    pub value: f64,
    pub dual_variables: DualVariables,
    pub dual_feasibility_residual: f64,
    pub certified: bool,
    /// f(rho_hat) - <rho_hat, grad> + primal optimum of the linear problem.
    pub primal_value: f64,
    pub duality_gap: f64,
}

/// Frobenius projection target, the standard smooth test objective:
/// f(rho) = ||rho - target||_F^2, gradient 2 (rho - target).
pub struct QuadraticObjective {
    target: CMat,
}

impl QuadraticObjective {
    pub fn new(target: &HermitianMatrix) -> Self {
        Self {
            target: target.mat().clone(),
        }
    }
}

impl ObjectiveFn for QuadraticObjective {
    fn value(&self, rho: &DensityOperator) -> Result<f64> {
        let diff = rho.mat() - &self.target;
        Ok(diff.iter().map(|z| z.norm_sqr()).sum())
    }

    fn gradient(&self, rho: &DensityOperator) -> Result<HermitianMatrix> {
        let diff = rho.mat() - &self.target;
        Ok(HermitianMatrix::trusted(diff * C64::new(2.0, 0.0)))
    }
}

/// Feasible starting point: the member of the set nearest to the maximally
/// mixed state in Frobenius norm (a strictly interior point whenever one
/// exists, which the divergence objective needs).
pub fn initial_point(s: &FeasibleSet) -> Result<DensityOperator> {
    let geom = Geometry::build(s)?;
    initial_point_geom(&geom)
}

fn initial_point_geom(geom: &Geometry) -> Result<DensityOperator> {
    let sol = geom.solve_nearest_identity()?;
    DensityOperator::new(sol.sigma)
}

/// Solves the linearized subproblem min_sigma <sigma, grad> and returns the
/// step toward its vertex.
pub fn fw_direction(
    rho: &DensityOperator,
    grad: &HermitianMatrix,
    s: &FeasibleSet,
) -> Result<FwStep> {
    let geom = Geometry::build(s)?;
    fw_direction_geom(&geom, rho, grad)
}

fn fw_direction_geom(
    geom: &Geometry,
    rho: &DensityOperator,
    grad: &HermitianMatrix,
) -> Result<FwStep> {
    if linalg::max_abs(grad.mat()) == 0.0 {
        return Ok(FwStep {
            delta: HermitianMatrix::zeros(rho.dim()),
            vertex: rho.clone(),
            gap: 0.0,
            solver_status: "TrivialGradient".to_string(),
        });
    }
    let q = sdp::coords_of(grad.mat());
    let sol = geom.solve_linear(&q)?;
    let vertex = DensityOperator::new(sol.sigma.clone())?;
    let delta = HermitianMatrix::trusted(vertex.mat() - rho.mat());
    let gap = linalg::inner(delta.mat(), grad.mat());
    Ok(FwStep {
        delta,
        vertex,
        gap,
        solver_status: sol.status,
    })
}

/// Exact step size along rho + lambda delta by bisection on the sign of the
/// directional derivative; the segment is a descent direction at lambda = 0.
pub fn line_search<O: ObjectiveFn>(
    rho: &DensityOperator,
    delta: &HermitianMatrix,
    obj: &O,
    tol: f64,
) -> Result<f64> {
    let seg = obj.segment(rho, delta)?;
    let d_end = seg.derivative(1.0)?;
    if d_end <= 0.0 {
        // still descending at the far end
        return Ok(1.0);
    }
    let d_start = seg.derivative(0.0)?;
    if d_start >= 0.0 {
        // not a descent direction; the caller's gap test screens this out
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut d_lo = d_start;
    let mut hi = 1.0f64;
    let mut d_hi = d_end;
    let scale = d_start.abs().max(d_end.abs());
    // keep a sign-changing bracket; alternate secant steps on the derivative
    // (exact once the segment is locally quadratic) with bisection
    let mut bisect = false;
    for _ in 0..60 {
        let width = hi - lo;
        if width <= tol * 1e-2 {
            break;
        }
        let mut c = if bisect || d_hi - d_lo <= 0.0 {
            0.5 * (lo + hi)
        } else {
            (lo - d_lo * width / (d_hi - d_lo)).clamp(lo + 1e-3 * width, hi - 1e-3 * width)
        };
        bisect = !bisect;
        if !c.is_finite() {
            c = 0.5 * (lo + hi);
        }
        let d_c = seg.derivative(c)?;
        if d_c.abs() <= 1e-12 * scale {
            return Ok(c);
        }
        if d_c < 0.0 {
            lo = c;
            d_lo = d_c;
        } else {
            hi = c;
            d_hi = d_c;
        }
    }
    // final secant through the bracket endpoints
    let lam = if d_hi - d_lo > 0.0 {
        lo - d_lo * (hi - lo) / (d_hi - d_lo)
    } else {
        0.5 * (lo + hi)
    };
    Ok(lam.clamp(lo, hi))
}

/// Runs the conditional-gradient loop from the nearest-to-mixed starting
/// point. Every iterate is a convex combination of feasible points, so
/// feasibility is preserved exactly.
pub fn frank_wolfe<O: ObjectiveFn>(obj: &O, s: &FeasibleSet, cfg: &FwConfig) -> Result<FwOutcome> {
    cfg.validate()?;
    let geom = Geometry::build(s)?;
    let rho0 = initial_point_geom(&geom)?;
    frank_wolfe_inner(obj, s, &geom, cfg, rho0)
}

/// Same loop from a caller-supplied starting point (used to warm-start
/// across nearby objectives).
pub fn frank_wolfe_from<O: ObjectiveFn>(
    obj: &O,
    s: &FeasibleSet,
    cfg: &FwConfig,
    rho0: &DensityOperator,
) -> Result<FwOutcome> {
    cfg.validate()?;
    let geom = Geometry::build(s)?;
    if !s.is_feasible(rho0, 1e-8) {
        return Err(Error::Infeasible {
            detail: format!(
                "starting point violates constraints (residual {:.3e})",
                s.residuals(rho0).max_violation()
            ),
        });
    }
    frank_wolfe_inner(obj, s, &geom, cfg, rho0.clone())
}

fn frank_wolfe_inner<O: ObjectiveFn>(
    obj: &O,
    s: &FeasibleSet,
    geom: &Geometry,
    cfg: &FwConfig,
    mut rho: DensityOperator,
) -> Result<FwOutcome> {
    let mut f = obj.value(&rho)?;
    let mut records = Vec::new();
    let mut converged = false;
    let mut final_gap = f64::NAN;

    for iter in 0..cfg.max_iters {
        let grad = obj.gradient(&rho)?;
        let step = fw_direction_geom(geom, &rho, &grad)?;
        let report = s.residuals(&rho);
        final_gap = step.gap;

        if step.gap.abs() < cfg.gap_tol {
            converged = true;
            records.push(FwIterRecord {
                iter,
                f_value: f,
                gap: step.gap,
                step_size: 0.0,
                equality_residual: report.equality_residual,
                ball_excess: report.ball_excess,
                min_eigenvalue: report.min_eigenvalue,
                solver_status: step.solver_status,
            });
            break;
        }

        let mut lambda = line_search(&rho, &step.delta, obj, cfg.linesearch_tol)?;
        if lambda <= 0.0 {
            // gradient and subproblem disagree at solver accuracy; stop
            records.push(FwIterRecord {
                iter,
                f_value: f,
                gap: step.gap,
                step_size: 0.0,
                equality_residual: report.equality_residual,
                ball_excess: report.ball_excess,
                min_eigenvalue: report.min_eigenvalue,
                solver_status: step.solver_status,
            });
            break;
        }

        // bisection width can overshoot the minimizer; halve until descent
        let mut next = rho.mix(&step.vertex, lambda)?;
        let mut f_next = obj.value(&next)?;
        let mut halvings = 0;
        while f_next > f && halvings < 30 {
            lambda *= 0.5;
            next = rho.mix(&step.vertex, lambda)?;
            f_next = obj.value(&next)?;
            halvings += 1;
        }
        if f_next > f {
            records.push(FwIterRecord {
                iter,
                f_value: f,
                gap: step.gap,
                step_size: 0.0,
                equality_residual: report.equality_residual,
                ball_excess: report.ball_excess,
                min_eigenvalue: report.min_eigenvalue,
                solver_status: step.solver_status,
            });
            break;
        }

        rho = next;
        f = f_next;
        records.push(FwIterRecord {
            iter,
            f_value: f,
            gap: step.gap,
            step_size: lambda,
            equality_residual: report.equality_residual,
            ball_excess: report.ball_excess,
            min_eigenvalue: report.min_eigenvalue,
            solver_status: step.solver_status,
        });
    }

    Ok(FwOutcome {
        rho_hat: rho,
        f_value: f,
        final_gap,
        converged,
        iterations: records,
    })
}

/// Certified lower bound on min_S f via linearization at rho_hat:
/// f is convex, so f(sigma) >= f(rho_hat) + <sigma - rho_hat, grad>, and the
/// dual of the linear minimization bounds the right-hand side over S.
pub fn step2_lower_bound<O: ObjectiveFn>(
    rho_hat: &DensityOperator,
    obj: &O,
    s: &FeasibleSet,
) -> Result<CertifiedBound> {
    let geom = Geometry::build(s)?;
    step2_lower_bound_geom(&geom, rho_hat, obj)
}

fn step2_lower_bound_geom<O: ObjectiveFn>(
    geom: &Geometry,
    rho_hat: &DensityOperator,
    obj: &O,
) -> Result<CertifiedBound> {
    let f_hat = obj.value(rho_hat)?;
    let grad = obj.gradient(rho_hat)?;
    let affine = f_hat - linalg::inner(rho_hat.mat(), grad.mat());

    let q = sdp::coords_of(grad.mat());
    let sol = geom.solve_linear(&q)?;
    let cert = geom.certify(grad.mat(), &sol)?;

    let grad_scale = linalg::max_abs(grad.mat()).max(1.0);
    let certified = cert.residual <= 1e-8 * grad_scale;

    Ok(CertifiedBound {
        value: affine + cert.value,
        dual_variables: DualVariables {
            y: cert.y,
            z: cert.z,
            a: cert.a,
        },
        dual_feasibility_residual: cert.residual,
        certified,
        primal_value: affine + sol.primal_obj,
        duality_gap: cert.duality_gap,
    })
}

/// Full minimize-then-certify pass: conditional gradient to rho_hat, then
/// the linearized dual bound at that point.
pub fn minimize_and_certify<O: ObjectiveFn>(
    obj: &O,
    s: &FeasibleSet,
    cfg: &FwConfig,
) -> Result<(FwOutcome, CertifiedBound)> {
    let outcome = frank_wolfe(obj, s, cfg)?;
    let bound = step2_lower_bound(&outcome.rho_hat, obj, s)?;
    Ok((outcome, bound))
}

/// Warm-started variant of `minimize_and_certify`.
pub fn minimize_and_certify_from<O: ObjectiveFn>(
    obj: &O,
    s: &FeasibleSet,
    cfg: &FwConfig,
    rho0: &DensityOperator,
) -> Result<(FwOutcome, CertifiedBound)> {
    let outcome = frank_wolfe_from(obj, s, cfg, rho0)?;
    let bound = step2_lower_bound(&outcome.rho_hat, obj, s)?;
    Ok((outcome, bound))
}
