//! The Renyi objective: sandwiched divergence, the perturbed postprocessing
//! map, the analytic gradient, and a finite-difference oracle.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun::{self, SUPPORT_CUT_REL};
use crate::protocol::CPMap;
use crate::types::{CMat, DensityOperator, EigenSystem, HermitianMatrix, PinchingMap, C64};

const LN_2: f64 = std::f64::consts::LN_2;

/// The family of exponents tied to one Renyi order alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiParams {
    pub alpha: f64,
    /// 1/alpha, the divergence order the objective is evaluated at.
    pub beta: f64,
    /// (2 - 1/alpha)^-1, the order appearing in the variational bound.
    pub gamma: f64,
    /// (1 - beta) / (2 beta), the sandwiching exponent.
    pub mu: f64,
    /// sin(pi mu) / pi, the resolvent-integral normalization.
    pub l: f64,
}

impl RenyiParams {
    /// alpha in (1, 2].
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        let beta = 1.0 / alpha;
        let gamma = 1.0 / (2.0 - beta);
        let mu = (1.0 - beta) / (2.0 * beta);
        let l = (std::f64::consts::PI * mu).sin() / std::f64::consts::PI;
        Ok(Self {
            alpha,
            beta,
            gamma,
            mu,
            l,
        })
    }

    /// beta in [0.5, 1), the image of from_alpha.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&beta) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
            });
        }
        Self::from_alpha(1.0 / beta)
    }
}

/// The objective f(rho) = Tr(G_eps(rho)) D_beta(G_eps(rho) || Z(G_eps(rho)))
/// with the depolarizing perturbation already folded into the map.
#[derive(Debug, Clone)]
pub struct PerturbedObjective {
    /// The perturbed map G_eps = D_eps o G.
    pub gmap: CPMap,
    pub zmap: PinchingMap,
    pub params: RenyiParams,
    pub epsilon_perturb: f64,
}

impl PerturbedObjective {
    /// Wraps the raw postprocessing map with the depolarizing perturbation.
    pub fn new(
        gmap: &CPMap,
        zmap: PinchingMap,
        params: RenyiParams,
        epsilon_perturb: f64,
    ) -> Result<Self> {
        if zmap.dim() != gmap.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: gmap.out_dim(),
                found: zmap.dim(),
            });
        }
        Ok(Self {
            gmap: perturb_map(gmap, epsilon_perturb)?,
            zmap,
            params,
            epsilon_perturb,
        })
    }
}

/// G_eps(rho) = (1-eps) G(rho) + eps Tr(G rho) I / d_out.
pub fn perturb_map(g: &CPMap, epsilon: f64) -> Result<CPMap> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon_perturb",
            value: epsilon,
        });
    }
    g.with_depolarizing_mix(epsilon)
}

/// Q_beta as well as the support bookkeeping shared by the divergence.
fn q_beta_core(rho: &CMat, sigma: &CMat, beta: f64) -> Result<f64> {
    if !beta.is_finite() || beta <= 0.0 || beta == 1.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
        });
    }
    let d = sigma.nrows();
    if rho.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let eig_s = matfun::eig_trusted(sigma);
    let lambda_max = eig_s.max_eigenvalue().max(0.0);
    let cut = SUPPORT_CUT_REL * lambda_max;

    // reject rho with weight outside sigma's support
    let mut overlap = 0.0;
    let mut support: Vec<usize> = Vec::with_capacity(d);
    for i in 0..d {
        let v = eig_s.eigenvectors.column(i);
        if eig_s.eigenvalues[i] <= cut {
            overlap += (v.adjoint() * rho * v)[(0, 0)].re;
        } else {
            support.push(i);
        }
    }
    if overlap > 1e-9 {
        return Err(Error::SupportViolation { overlap });
    }
    if support.is_empty() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lambda_max,
        });
    }

    // restrict to the support and sandwich
    let r = support.len();
    let mut vs = CMat::zeros(d, r);
    for (c, &i) in support.iter().enumerate() {
        vs.set_column(c, &eig_s.eigenvectors.column(i));
    }
    let mu = (1.0 - beta) / (2.0 * beta);
    let rho_r = vs.adjoint() * rho * &vs;
    let mut xi = rho_r;
    for (c, &i) in support.iter().enumerate() {
        let w = C64::new(eig_s.eigenvalues[i].powf(mu), 0.0);
        for k in 0..r {
            xi[(c, k)] *= w;
            // scale row and column symmetrically
        }
        for k in 0..r {
            xi[(k, c)] *= w;
        }
    }
    let xi = linalg::hermitian_part(&xi);
    let eig_xi = matfun::eig_trusted(&xi);
    let xi_cut = SUPPORT_CUT_REL * eig_xi.max_eigenvalue().max(0.0);
    Ok(eig_xi
        .eigenvalues
        .iter()
        .filter(|&&x| x > xi_cut)
        .map(|&x| x.powf(beta))
        .sum())
}

/// Q_beta(rho || sigma) = Tr[(sigma^mu rho sigma^mu)^beta], mu = (1-beta)/2beta.
pub fn q_beta(rho: &DensityOperator, sigma: &DensityOperator, beta: f64) -> Result<f64> {
    q_beta_core(rho.mat(), sigma.mat(), beta)
}

/// Sandwiched Renyi divergence
/// D_beta = (beta-1)^-1 log2(Q_beta / Tr rho), in bits.
pub fn renyi_divergence(rho: &DensityOperator, sigma: &DensityOperator, beta: f64) -> Result<f64> {
    let q = q_beta(rho, sigma, beta)?;
    Ok((q.log2() - rho.trace().log2()) / (beta - 1.0))
}

/// Everything the objective and its gradient share at one evaluation point.
struct EvalPoint {
    trg: f64,
    q: f64,
    divergence: f64,
    value: f64,
    eig_sigma: EigenSystem,
    sigma_mu: CMat,
    t: CMat,
    eig_xi: EigenSystem,
}

fn analyze(t: CMat, obj: &PerturbedObjective) -> Result<EvalPoint> {
    let p = &obj.params;
    let trg = linalg::trace_re(&t);
    let sigma = obj.zmap.apply(&t);
    let eig_sigma = matfun::eig_trusted(&sigma);
    let cut = SUPPORT_CUT_REL * eig_sigma.max_eigenvalue().max(0.0);
    if eig_sigma.min_eigenvalue() <= cut.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig_sigma.min_eigenvalue(),
        });
    }
    let sigma_mu = eig_sigma.apply(|l| l.powf(p.mu));
    let xi = linalg::hermitian_part(&(&sigma_mu * &t * &sigma_mu));
    let eig_xi = matfun::eig_trusted(&xi);
    let xi_cut = SUPPORT_CUT_REL * eig_xi.max_eigenvalue().max(0.0);
    let q: f64 = eig_xi
        .eigenvalues
        .iter()
        .filter(|&&x| x > xi_cut)
        .map(|&x| x.powf(p.beta))
        .sum();
    let divergence = (q.log2() - trg.log2()) / (p.beta - 1.0);
    Ok(EvalPoint {
        value: trg * divergence,
        trg,
        q,
        divergence,
        eig_sigma,
        sigma_mu,
        t,
        eig_xi,
    })
}

/// f(rho) = Tr(G_eps rho) * D_beta(G_eps rho || Z(G_eps rho)).
pub fn objective_f(rho: &DensityOperator, obj: &PerturbedObjective) -> Result<f64> {
    if rho.dim() != obj.gmap.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.gmap.in_dim(),
            found: rho.dim(),
        });
    }
    Ok(analyze(obj.gmap.apply_raw(rho.mat()), obj)?.value)
}

/// The output-space weight W with grad f = G_eps'(W), plus the objective
/// value at the same point. Exposed to the optimizer so line searches along
/// T_lambda = T_0 + lambda T_delta can reuse the applied maps.
pub(crate) fn w_from_applied(t: CMat, obj: &PerturbedObjective) -> Result<(CMat, f64)> {
    let p = &obj.params;
    let ep = analyze(t, obj)?;
    let d_out = ep.t.nrows();

    // chi_2 = beta sigma^mu Xi^(beta-1) sigma^mu
    let xi_pow = matfun::power_from_eig(&ep.eig_xi, p.beta - 1.0)?;
    let chi2 = &ep.sigma_mu * &xi_pow * &ep.sigma_mu * C64::new(p.beta, 0.0);

    // chi_1 + chi_3 = Z(2 beta K(Herm(T sigma^mu Xi^(beta-1)))) where K is the
    // divided-difference transform in sigma's eigenbasis; the L(mu) prefactor
    // of the resolvent integral cancels against the kernel normalization
    let a1 = &ep.t * &ep.sigma_mu * &xi_pow;
    let herm_a1 = linalg::hermitian_part(&a1);
    let dd = matfun::frechet_from_eig(&herm_a1, &ep.eig_sigma, p.mu, false)?;
    let chi13 = obj.zmap.apply(&(dd * C64::new(2.0 * p.beta, 0.0)));

    let chi_sum = linalg::hermitian_part(&(chi13 + chi2));
    // W = D I + ((beta-1) ln 2)^-1 (Tr(G rho)/Q * chi - I)
    let c = 1.0 / ((p.beta - 1.0) * LN_2);
    let mut w = chi_sum * C64::new(c * ep.trg / ep.q, 0.0);
    let shift = C64::new(ep.divergence - c, 0.0);
    for i in 0..d_out {
        w[(i, i)] += shift;
    }
    Ok((w, ep.value))
}

/// Analytic gradient of the objective at rho.
pub fn gradient_f(rho: &DensityOperator, obj: &PerturbedObjective) -> Result<HermitianMatrix> {
    if rho.dim() != obj.gmap.in_dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.gmap.in_dim(),
            found: rho.dim(),
        });
    }
    let (w, _) = w_from_applied(obj.gmap.apply_raw(rho.mat()), obj)?;
    Ok(HermitianMatrix::trusted(obj.gmap.adjoint_raw(&w)))
}

/// An objective with value, gradient, and an efficient view along segments,
/// the interface the optimizer works against.
pub trait ObjectiveFn: Sync {
    fn value(&self, rho: &DensityOperator) -> Result<f64>;
    fn gradient(&self, rho: &DensityOperator) -> Result<HermitianMatrix>;

    /// View of the objective along lambda -> rho + lambda delta, for line
    /// searches. The default re-evaluates from scratch at each lambda.
    fn segment<'a>(
        &'a self,
        rho: &DensityOperator,
        delta: &HermitianMatrix,
    ) -> Result<Box<dyn SegmentObjective + 'a>>
    where
        Self: Sized,
    {
        Ok(Box::new(GenericSegment {
            obj: self,
            rho: rho.mat().clone(),
            delta: delta.mat().clone(),
        }))
    }
}

/// One-dimensional restriction of an objective to a segment.
pub trait SegmentObjective {
    fn value(&self, lambda: f64) -> Result<f64>;
    fn derivative(&self, lambda: f64) -> Result<f64>;
}

struct GenericSegment<'a, O: ObjectiveFn> {
    obj: &'a O,
    rho: CMat,
    delta: CMat,
}

impl<O: ObjectiveFn> GenericSegment<'_, O> {
    fn point(&self, lambda: f64) -> DensityOperator {
        DensityOperator::trusted(&self.rho + &self.delta * C64::new(lambda, 0.0))
    }
}

impl<O: ObjectiveFn> SegmentObjective for GenericSegment<'_, O> {
    fn value(&self, lambda: f64) -> Result<f64> {
        self.obj.value(&self.point(lambda))
    }

    fn derivative(&self, lambda: f64) -> Result<f64> {
        let grad = self.obj.gradient(&self.point(lambda))?;
        Ok(linalg::inner(grad.mat(), &self.delta))
    }
}

impl ObjectiveFn for PerturbedObjective {
    fn value(&self, rho: &DensityOperator) -> Result<f64> {
        objective_f(rho, self)
    }

    fn gradient(&self, rho: &DensityOperator) -> Result<HermitianMatrix> {
        gradient_f(rho, self)
    }

    fn segment<'a>(
        &'a self,
        rho: &DensityOperator,
        delta: &HermitianMatrix,
    ) -> Result<Box<dyn SegmentObjective + 'a>> {
        // apply the map once to each endpoint; along the segment only the
        // output-space point T_0 + lambda T_delta moves
        Ok(Box::new(PerturbedSegment {
            obj: self,
            t0: self.gmap.apply_raw(rho.mat()),
            td: self.gmap.apply_raw(delta.mat()),
        }))
    }
}

struct PerturbedSegment<'a> {
    obj: &'a PerturbedObjective,
    t0: CMat,
    td: CMat,
}

impl PerturbedSegment<'_> {
    fn t_at(&self, lambda: f64) -> CMat {
        &self.t0 + &self.td * C64::new(lambda, 0.0)
    }
}

impl SegmentObjective for PerturbedSegment<'_> {
    fn value(&self, lambda: f64) -> Result<f64> {
        Ok(analyze(self.t_at(lambda), self.obj)?.value)
    }

    fn derivative(&self, lambda: f64) -> Result<f64> {
        // phi'(lambda) = Tr[T_delta W(T_lambda)]: the adjoint application in
        // grad f cancels against re-applying the map to the direction
        let (w, _) = w_from_applied(self.t_at(lambda), self.obj)?;
        Ok(linalg::inner(&self.td, &w))
    }
}

/// Central difference of f along rho_x = (1-x) rho + x tau at x = 0.
pub fn finite_diff_gradient<O: ObjectiveFn>(
    rho: &DensityOperator,
    tau: &DensityOperator,
    obj: &O,
    step: f64,
) -> Result<f64> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
        });
    }
    let plus = rho.mix(tau, step)?;
    let minus = DensityOperator::new(
        rho.mat() * C64::new(1.0 + step, 0.0) - tau.mat() * C64::new(step, 0.0),
    )?;
    Ok((obj.value(&plus)? - obj.value(&minus)?) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{self, bb84_pm_instance};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cr(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> DensityOperator {
        let mut g = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let m = &g * g.adjoint();
        let t = m.trace().re;
        DensityOperator::trusted(m / cr(t))
    }

    fn diag_state(entries: &[f64]) -> DensityOperator {
        let v: Vec<C64> = entries.iter().map(|&x| cr(x)).collect();
        DensityOperator::new(CMat::from_diagonal(&DVector::from_vec(v))).unwrap()
    }

    #[test]
    fn renyi_params_identities() {
        for &alpha in &[1.0005, 1.2, 1.7, 2.0] {
            let p = RenyiParams::from_alpha(alpha).unwrap();
            assert_relative_eq!(p.alpha * p.beta, 1.0, epsilon = 1e-14);
            assert_relative_eq!(1.0 / p.alpha + 1.0 / p.gamma, 2.0, epsilon = 1e-14);
            assert!(p.mu > 0.0 && p.mu <= 0.5);
            assert_relative_eq!(
                p.l,
                (std::f64::consts::PI * p.mu).sin() / std::f64::consts::PI,
                epsilon = 1e-15
            );
        }
        assert!(RenyiParams::from_alpha(1.0).is_err());
        assert!(RenyiParams::from_alpha(2.2).is_err());
        assert!(RenyiParams::from_beta(0.49).is_err());
    }

    #[test]
    fn divergence_of_state_with_itself_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let rho = random_state(&mut rng, 4);
        for &beta in &[0.55, 0.75, 1.5] {
            let d = renyi_divergence(&rho, &rho, beta).unwrap();
            assert!(d.abs() < 1e-12, "beta {beta}: d = {d}");
            assert_relative_eq!(q_beta(&rho, &rho, beta).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn divergence_pure_vs_maximally_mixed() {
        let rho = diag_state(&[1.0, 0.0]);
        let sigma = DensityOperator::maximally_mixed(2);
        for &beta in &[0.6, 0.75, 1.5, 3.0] {
            let d = renyi_divergence(&rho, &sigma, beta).unwrap();
            assert_relative_eq!(d, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn divergence_matches_classical_formula() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let rho = diag_state(&p);
        let sigma = diag_state(&q);
        for &beta in &[0.55, 0.8, 1.3, 2.0] {
            let classical: f64 = p
                .iter()
                .zip(&q)
                .map(|(&pi, &qi)| pi.powf(beta) * qi.powf(1.0 - beta))
                .sum();
            let want = classical.log2() / (beta - 1.0);
            let have = renyi_divergence(&rho, &sigma, beta).unwrap();
            assert_relative_eq!(have, want, epsilon = 1e-12);
            assert_relative_eq!(
                q_beta(&rho, &sigma, beta).unwrap(),
                classical,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn q_beta_consistent_with_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..5 {
            let rho = random_state(&mut rng, 5);
            let sigma = random_state(&mut rng, 5);
            for &beta in &[0.6, 0.9, 1.7] {
                let q = q_beta(&rho, &sigma, beta).unwrap();
                let d = renyi_divergence(&rho, &sigma, beta).unwrap();
                let recon = ((beta - 1.0) * d).exp2() * rho.trace();
                assert_relative_eq!(recon, q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn divergence_rejects_support_violation() {
        let rho = diag_state(&[0.5, 0.5]);
        let sigma = diag_state(&[1.0, 0.0]);
        assert!(matches!(
            renyi_divergence(&rho, &sigma, 0.75),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn divergence_rejects_bad_beta() {
        let rho = diag_state(&[0.5, 0.5]);
        assert!(renyi_divergence(&rho, &rho, 1.0).is_err());
        assert!(renyi_divergence(&rho, &rho, 0.0).is_err());
        assert!(renyi_divergence(&rho, &rho, -0.5).is_err());
    }

    #[test]
    fn divergence_monotone_in_beta_and_pinching() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let z = PinchingMap::key_register(2, 2);
        for _ in 0..5 {
            let rho = random_state(&mut rng, 4);
            let sigma = random_state(&mut rng, 4);
            let mut last = f64::NEG_INFINITY;
            for &beta in &[0.55, 0.65, 0.75, 0.85, 0.95] {
                let d = renyi_divergence(&rho, &sigma, beta).unwrap();
                assert!(d >= last - 1e-10, "not monotone at beta {beta}");
                last = d;

                // data processing under pinching
                let zr = DensityOperator::trusted(z.apply(rho.mat()));
                let zs = DensityOperator::trusted(z.apply(sigma.mat()));
                let dz = renyi_divergence(&zr, &zs, beta).unwrap();
                assert!(
                    dz <= d + 1e-10,
                    "pinching increased divergence at beta {beta}"
                );
            }
        }
    }

    #[test]
    fn variational_order_dominates_objective_order() {
        // gamma = (2 - 1/alpha)^-1 exceeds beta = 1/alpha, so D_gamma >= D_beta
        let inst = bb84_pm_instance(0.06, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for &alpha in &[1.1, 1.5, 2.0] {
            let p = RenyiParams::from_alpha(alpha).unwrap();
            let rho = random_state(&mut rng, 12);
            let t = DensityOperator::trusted(inst.gmap.apply_raw(rho.mat()));
            let pinched = DensityOperator::trusted(inst.zmap.apply(t.mat()));
            // tiny mix keeps the pinched state full rank on t's support
            let dim = t.dim();
            let mixed = CMat::identity(dim, dim) * cr(1e-12 / dim as f64) + pinched.mat();
            let pinched = DensityOperator::trusted(mixed * cr(1.0 / (1.0 + 1e-12)));
            let d_gamma = renyi_divergence(&t, &pinched, p.gamma).unwrap();
            let d_beta = renyi_divergence(&t, &pinched, p.beta).unwrap();
            assert!(
                d_gamma >= d_beta - 1e-10,
                "alpha {alpha}: D_gamma {d_gamma} < D_beta {d_beta}"
            );
        }
    }

    fn bb84_objective(p_depol: f64, alpha: f64, eps: f64) -> PerturbedObjective {
        let inst = bb84_pm_instance(p_depol, 0.0).unwrap();
        PerturbedObjective::new(
            &inst.gmap,
            inst.zmap.clone(),
            RenyiParams::from_alpha(alpha).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn objective_is_trace_times_divergence() {
        let obj = bb84_objective(0.08, 1.4, 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let rho = random_state(&mut rng, 12);
        let f = objective_f(&rho, &obj).unwrap();
        let t = DensityOperator::trusted(obj.gmap.apply_raw(rho.mat()));
        let sigma = DensityOperator::trusted(obj.zmap.apply(t.mat()));
        let composed = t.trace() * renyi_divergence(&t, &sigma, obj.params.beta).unwrap();
        assert_relative_eq!(f, composed, epsilon = 1e-12);
        assert!(f >= 0.0);
    }

    #[test]
    fn objective_vanishes_on_pinching_fixed_points() {
        // classical copy map: G(rho) is diagonal in the key register for
        // diagonal rho, hence pinching-invariant
        let povm = vec![vec![
            linalg::outer(&linalg::basis_vector(2, 0)),
            linalg::outer(&linalg::basis_vector(2, 1)),
        ]];
        let g = protocol::build_postprocessing_map(&povm, &|x, _| x, &[1.0], 1, None).unwrap();
        let z = PinchingMap::key_register(2, g.out_dim() / 2);
        let obj =
            PerturbedObjective::new(&g, z, RenyiParams::from_alpha(1.5).unwrap(), 1e-9).unwrap();
        let rho = diag_state(&[0.3, 0.7]);
        let f = objective_f(&rho, &obj).unwrap();
        assert!(f.abs() < 1e-7, "pinching fixed point gave f = {f}");
    }

    #[test]
    fn noiseless_objective_approaches_half_bit_rate() {
        // untampered BB84: f -> sift probability * 1 bit as the perturbation
        // vanishes
        let inst = bb84_pm_instance(0.0, 0.0).unwrap();
        let rho = inst.rho_ideal.clone();
        let mut gaps = Vec::new();
        for &eps in &[1e-6, 1e-8] {
            let obj = PerturbedObjective::new(
                &inst.gmap,
                inst.zmap.clone(),
                RenyiParams::from_alpha(1.3).unwrap(),
                eps,
            )
            .unwrap();
            let f = objective_f(&rho, &obj).unwrap();
            gaps.push((f - 0.5).abs());
        }
        assert!(gaps[1] < 1e-5, "f at eps=1e-8 off by {}", gaps[1]);
        assert!(gaps[1] < gaps[0], "shrinking eps did not tighten f");
    }

    #[test]
    fn perturbation_limits() {
        let inst = bb84_pm_instance(0.05, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let rho = random_state(&mut rng, 12);
        let raw = inst.gmap.apply_raw(rho.mat());

        // entrywise distance to the unperturbed map stays below eps(1 + 1/d)
        let eps = 1e-6;
        let pert = perturb_map(&inst.gmap, eps).unwrap();
        let shifted = pert.apply_raw(rho.mat());
        let dev = linalg::max_abs(&(&shifted - &raw));
        assert!(dev <= eps * (1.0 + 1.0 / 48.0) + 1e-15);

        // eigenvalue floor eps Tr(G rho)/d
        let eps = 1e-4;
        let pert = perturb_map(&inst.gmap, eps).unwrap();
        let shifted = pert.apply_raw(rho.mat());
        let floor = eps * raw.trace().re / 48.0;
        let min = matfun::eig_trusted(&linalg::hermitian_part(&shifted)).min_eigenvalue();
        assert!(min >= floor * (1.0 - 1e-9), "min {min} below floor {floor}");

        // full mix-in sends everything to Tr * I/d
        let full = inst.gmap.with_depolarizing_mix(1.0).unwrap();
        let out = full.apply_raw(rho.mat());
        let want = CMat::identity(48, 48) * cr(raw.trace().re / 48.0);
        assert!(linalg::max_abs(&(out - want)) < 1e-12);

        assert!(perturb_map(&inst.gmap, 0.0).is_err());
        assert!(perturb_map(&inst.gmap, 1.0).is_err());
    }

    /// BB84 test states pulled into the interior of the face carrying the
    /// honest states (the ideal state is rank-deficient, so finite
    /// differences need directions along the face).
    fn bb84_face_pair(p1: f64, p2: f64) -> (DensityOperator, DensityOperator) {
        let a = bb84_pm_instance(p1, 0.0).unwrap().rho_ideal;
        let b = bb84_pm_instance(p2, 0.0).unwrap().rho_ideal;
        let rho_a = linalg::partial_trace_second(a.mat(), 4, 3);
        let center =
            DensityOperator::trusted(rho_a.kronecker(&(CMat::identity(3, 3) * cr(1.0 / 3.0))));
        (a.mix(&center, 0.2).unwrap(), b.mix(&center, 0.2).unwrap())
    }

    #[test]
    fn gradient_matches_finite_differences_on_bb84() {
        let (rho, tau) = bb84_face_pair(0.01, 0.12);
        for &beta in &[0.55, 0.75, 0.95] {
            let inst = bb84_pm_instance(0.01, 0.0).unwrap();
            let obj = PerturbedObjective::new(
                &inst.gmap,
                inst.zmap.clone(),
                RenyiParams::from_beta(beta).unwrap(),
                1e-8,
            )
            .unwrap();
            let grad = gradient_f(&rho, &obj).unwrap();
            let delta = HermitianMatrix::trusted(tau.mat() - rho.mat());
            let analytic = linalg::inner(grad.mat(), delta.mat());
            let numeric = finite_diff_gradient(&rho, &tau, &obj, 1e-5).unwrap();
            assert_relative_eq!(analytic, numeric, max_relative = 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_instances() {
        // random full-rank states against the BB84 map exercise generic
        // spectra rather than the protocol's face structure
        let inst = bb84_pm_instance(0.05, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for &alpha in &[1.05, 1.6, 2.0] {
            let obj = PerturbedObjective::new(
                &inst.gmap,
                inst.zmap.clone(),
                RenyiParams::from_alpha(alpha).unwrap(),
                1e-8,
            )
            .unwrap();
            let rho = random_state(&mut rng, 12);
            let tau = random_state(&mut rng, 12);
            let grad = gradient_f(&rho, &obj).unwrap();
            let delta = HermitianMatrix::trusted(tau.mat() - rho.mat());
            let analytic = linalg::inner(grad.mat(), delta.mat());
            let numeric = finite_diff_gradient(&rho, &tau, &obj, 1e-5).unwrap();
            assert_relative_eq!(analytic, numeric, max_relative = 1e-6);
        }
    }

    #[test]
    fn gradient_is_hermitian() {
        let obj = bb84_objective(0.03, 1.7, 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let rho = random_state(&mut rng, 12);
        let grad = gradient_f(&rho, &obj).unwrap();
        assert!(linalg::hermiticity_deviation(grad.mat()) < 1e-12);
    }

    #[test]
    fn segment_view_matches_direct_evaluation() {
        let obj = bb84_objective(0.06, 1.35, 1e-8);
        let (rho, tau) = bb84_face_pair(0.06, 0.15);
        let delta = HermitianMatrix::trusted(tau.mat() - rho.mat());
        let seg = obj.segment(&rho, &delta).unwrap();
        for &l in &[0.0, 0.3, 0.9] {
            let mixed = rho.mix(&tau, l).unwrap();
            assert_relative_eq!(
                seg.value(l).unwrap(),
                objective_f(&mixed, &obj).unwrap(),
                epsilon = 1e-12
            );
            let grad = gradient_f(&mixed, &obj).unwrap();
            let direct = linalg::inner(grad.mat(), delta.mat());
            assert_relative_eq!(seg.derivative(l).unwrap(), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn objective_convex_along_segments() {
        let obj = bb84_objective(0.04, 1.25, 1e-8);
        let (rho, tau) = bb84_face_pair(0.04, 0.18);
        let f0 = objective_f(&rho, &obj).unwrap();
        let f1 = objective_f(&tau, &obj).unwrap();
        for &l in &[0.25, 0.5, 0.75] {
            let fl = objective_f(&rho.mix(&tau, l).unwrap(), &obj).unwrap();
            assert!(fl <= (1.0 - l) * f0 + l * f1 + 1e-9);
        }
    }

    #[test]
    fn finite_diff_vanishes_for_constant_objective() {
        // a one-letter key alphabet makes the pinching trivial and f constant
        let povm = vec![vec![CMat::identity(2, 2)]];
        let g = protocol::build_postprocessing_map(&povm, &|_, _| 0, &[1.0], 2, None).unwrap();
        let z = PinchingMap::key_register(1, g.out_dim());
        let obj =
            PerturbedObjective::new(&g, z, RenyiParams::from_alpha(1.5).unwrap(), 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let rho = random_state(&mut rng, 4);
        let tau = random_state(&mut rng, 4);
        assert!(objective_f(&rho, &obj).unwrap().abs() < 1e-9);
        let fd = finite_diff_gradient(&rho, &tau, &obj, 1e-5).unwrap();
        assert!(fd.abs() < 1e-9);
    }
}
