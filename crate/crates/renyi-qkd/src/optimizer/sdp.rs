//! Conic-solver bridge: the feasible set as a linear problem over the
//! coordinates of a Hermitian matrix, with the positivity constraint carried
//! by a real symmetric embedding.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun;
use crate::types::{CMat, C64};

use super::FeasibleSet;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Coordinates of a Hermitian matrix in the orthonormal basis of
/// `linalg::hermitian_basis`: diagonal entries, then sqrt(2) Re / sqrt(2) Im
/// of each upper off-diagonal entry.
pub(crate) fn coords_of(m: &CMat) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(d * d);
    for k in 0..d {
        v[k] = m[(k, k)].re;
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            v[idx] = SQRT_2 * m[(i, j)].re;
            v[idx + 1] = SQRT_2 * m[(i, j)].im;
            idx += 2;
        }
    }
    v
}

/// Inverse of `coords_of`.
pub(crate) fn from_coords(v: &DVector<f64>, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for k in 0..d {
        m[(k, k)] = C64::new(v[k], 0.0);
    }
    let mut idx = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let entry = C64::new(v[idx] / SQRT_2, v[idx + 1] / SQRT_2);
            m[(i, j)] = entry;
            m[(j, i)] = entry.conj();
            idx += 2;
        }
    }
    m
}

/// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix;
/// eigenvalues are those of the input, doubled.
pub(crate) fn emb(x: &CMat) -> DMatrix<f64> {
    let d = x.nrows();
    let mut e = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = x[(i, j)];
            e[(i, j)] = z.re;
            e[(i, j + d)] = -z.im;
            e[(i + d, j)] = z.im;
            e[(i + d, j + d)] = z.re;
        }
    }
    e
}

/// Scaled upper triangle of a symmetric matrix, column major, off-diagonal
/// entries times sqrt(2) (the solver's packed PSD format).
pub(crate) fn svec(s: &DMatrix<f64>) -> DVector<f64> {
    let n = s.nrows();
    let mut v = DVector::zeros(n * (n + 1) / 2);
    let mut idx = 0;
    for j in 0..n {
        for i in 0..=j {
            v[idx] = if i == j {
                s[(i, j)]
            } else {
                SQRT_2 * s[(i, j)]
            };
            idx += 1;
        }
    }
    v
}

fn csc_from_dense(m: &DMatrix<f64>) -> CscMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for j in 0..cols {
        for i in 0..rows {
            let x = m[(i, j)];
            if x != 0.0 {
                rowval.push(i);
                nzval.push(x);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// The feasible set translated to conic form, cached across solves.
///
/// Variables: x = [v (dim^2 coordinates of sigma), alpha (k), beta (k)] with
/// alpha, beta the positive/negative parts of the frequency deviations.
/// Rows: equalities (zero cone); the deviation couplings, the ball-radius
/// row and alpha, beta >= 0 (nonnegative cone); svec(emb(sigma)) (PSD cone).
pub(crate) struct Geometry {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub n_eq: usize,
    pub mu_eff: f64,
    pub gammas: Vec<f64>,
    pub fbar: Vec<f64>,
    pub eq_rows: Vec<DVector<f64>>,
    pub pe_rows: Vec<DVector<f64>>,
    /// Coefficients expressing the identity in the equality observables,
    /// with the implied (constant) trace of every feasible point.
    pub trace_combo: Option<(Vec<f64>, f64)>,
    a_dense: DMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
    n_vars: usize,
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) enum SolveKind {
    Quadratic,
    Linear,
}

impl Geometry {
    pub fn build(s: &FeasibleSet) -> Result<Self> {
        let d = s.dim;
        let n = d * d;
        let k = s.pe_observables.len();
        let n_eq = s.equality_constraints.len();
        // the two l1 balls compose into one of radius mu + t
        let mu_eff = s.mu_ball + s.t_ball;

        let eq_rows: Vec<DVector<f64>> = s
            .equality_constraints
            .iter()
            .map(|(g, _)| coords_of(g.mat()))
            .collect();
        let gammas: Vec<f64> = s.equality_constraints.iter().map(|&(_, v)| v).collect();
        let pe_rows: Vec<DVector<f64>> = s
            .pe_observables
            .iter()
            .map(|g| coords_of(g.mat()))
            .collect();
        let fbar = s.target_freq.clone();

        let n_vars = n + 2 * k;
        let n_nonneg = if k > 0 { 4 * k + 1 } else { 0 };
        let psd_len = (2 * d) * (2 * d + 1) / 2;
        let n_rows = n_eq + n_nonneg + psd_len;

        let mut a = DMatrix::zeros(n_rows, n_vars);
        let mut b = vec![0.0; n_rows];

        for (r, row) in eq_rows.iter().enumerate() {
            for c in 0..n {
                a[(r, c)] = row[c];
            }
            b[r] = gammas[r];
        }
        if k > 0 {
            let p1 = n_eq;
            let p2 = n_eq + k;
            let p3 = n_eq + 2 * k;
            let p4 = p3 + 1;
            for j in 0..k {
                for c in 0..n {
                    a[(p1 + j, c)] = pe_rows[j][c];
                    a[(p2 + j, c)] = -pe_rows[j][c];
                }
                a[(p1 + j, n + j)] = -1.0;
                a[(p2 + j, n + k + j)] = -1.0;
                b[p1 + j] = fbar[j];
                b[p2 + j] = -fbar[j];
                a[(p3, n + j)] = 1.0;
                a[(p3, n + k + j)] = 1.0;
                a[(p4 + j, n + j)] = -1.0;
                a[(p4 + k + j, n + k + j)] = -1.0;
            }
            b[p3] = mu_eff;
        }
        let psd_start = n_eq + n_nonneg;
        let basis = linalg::hermitian_basis(d);
        for (c, h) in basis.iter().enumerate() {
            let col = svec(&emb(h));
            for r in 0..psd_len {
                if col[r] != 0.0 {
                    a[(psd_start + r, c)] = -col[r];
                }
            }
        }

        let mut cones = Vec::new();
        if n_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_eq));
        }
        if n_nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_nonneg));
        }
        cones.push(SupportedConeT::PSDTriangleConeT(2 * d));

        // express the identity in the equality observables so the constant
        // feasible trace is known (needed to repair a dual certificate)
        let trace_combo = if n_eq > 0 {
            let mut gt = DMatrix::zeros(n, n_eq);
            for (c, row) in eq_rows.iter().enumerate() {
                gt.set_column(c, row);
            }
            let target = coords_of(&CMat::identity(d, d));
            let svd = gt.clone().svd(true, true);
            match svd.solve(&target, 1e-12) {
                Ok(c) => {
                    let residual = (&gt * &c - &target).norm();
                    if residual < 1e-8 {
                        let tr: f64 = c.iter().zip(&gammas).map(|(ci, gi)| ci * gi).sum();
                        Some((c.iter().copied().collect(), tr))
                    } else {
                        None
                    }
                }
                Err(_) => None,
            }
        } else {
            None
        };

        Ok(Self {
            d,
            n,
            k,
            n_eq,
            mu_eff,
            gammas,
            fbar,
            eq_rows,
            pe_rows,
            trace_combo,
            a_dense: a,
            b,
            cones,
            n_vars,
        })
    }

    fn settings(kind: SolveKind) -> DefaultSettings<f64> {
        let base = DefaultSettings::<f64> {
            verbose: false,
            max_iter: 200,
            tol_feas: 1e-10,
            tol_gap_abs: 1e-10,
            tol_gap_rel: 1e-10,
            ..Default::default()
        };
        match kind {
            // interior optimum: the default 1e-8 KKT regularization floors
            // the achievable equality residual at the same 1e-8, and the
            // well-conditioned KKT system does not need it
            SolveKind::Quadratic => DefaultSettings {
                static_regularization_constant: 1e-10,
                ..base
            },
            // degenerate vertex optimum: keep the stabilizing regularization
            // but let the solver crawl further before declaring a stall
            SolveKind::Linear => DefaultSettings {
                max_iter: 500,
                min_terminate_step_length: 1e-7,
                ..base
            },
        }
    }

    fn solve(&self, p: &CscMatrix<f64>, q: &[f64], kind: SolveKind) -> Result<RawSolution> {
        let a = csc_from_dense(&self.a_dense);
        let mut solver = DefaultSolver::new(p, q, &a, &self.b, &self.cones, Self::settings(kind))
            .map_err(|e| Error::SolverFailure {
            status: format!("setup: {e:?}"),
        })?;
        solver.solve();
        let status = solver.solution.status;
        let status_str = format!("{status:?}");
        match status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {}
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                return Err(Error::Infeasible {
                    detail: format!("constraint system rejected by solver ({status_str})"),
                });
            }
            _ => {
                return Err(Error::SolverFailure { status: status_str });
            }
        }
        Ok(RawSolution {
            x: solver.solution.x.clone(),
            z: solver.solution.z.clone(),
            obj_val: solver.solution.obj_val,
            status: status_str,
        })
    }

    /// Minimizes <sigma, grad> over the set. The returned matrix is
    /// eigenvalue-clipped to remove the solver's negative dust.
    pub fn solve_linear(&self, grad_coords: &DVector<f64>) -> Result<LinearSolution> {
        // solve with a unit-scale objective (argmin-invariant) so the
        // interior-point tolerances mean the same thing at every order
        let scale = grad_coords.amax().max(f64::MIN_POSITIVE);
        let p = CscMatrix::zeros((self.n_vars, self.n_vars));
        let mut q = vec![0.0; self.n_vars];
        for c in 0..self.n {
            q[c] = grad_coords[c] / scale;
        }
        let mut raw = self.solve(&p, &q, SolveKind::Linear)?;
        raw.obj_val *= scale;
        for z in &mut raw.z {
            *z *= scale;
        }
        Ok(self.finish(raw))
    }

    /// Minimizes the Frobenius distance to I/d over the set.
    pub fn solve_nearest_identity(&self) -> Result<LinearSolution> {
        let mut p_dense = DMatrix::zeros(self.n_vars, self.n_vars);
        for c in 0..self.n {
            p_dense[(c, c)] = 2.0;
        }
        let p = csc_from_dense(&p_dense);
        let target = coords_of(&(CMat::identity(self.d, self.d) / C64::new(self.d as f64, 0.0)));
        let mut q = vec![0.0; self.n_vars];
        for c in 0..self.n {
            q[c] = -2.0 * target[c];
        }
        let raw = self.solve(&p, &q, SolveKind::Quadratic)?;
        Ok(self.finish(raw))
    }

    fn finish(&self, raw: RawSolution) -> LinearSolution {
        let coords = DVector::from_iterator(self.n, raw.x[..self.n].iter().copied());
        let m = from_coords(&coords, self.d);
        let eig = matfun::eig_trusted(&m);
        let mut sigma = eig.apply(|l| l.max(0.0));
        // clipping and solver tolerance leave the trace off by ~1e-10;
        // the equalities pin it exactly, so snap back when they do
        if let Some((_, tr_target)) = &self.trace_combo {
            let tr = linalg::trace_re(&sigma);
            if tr > 0.0 && (tr - tr_target).abs() < 1e-5 * tr_target.abs().max(1.0) {
                sigma *= C64::new(tr_target / tr, 0.0);
            }
        }
        LinearSolution {
            sigma,
            primal_obj: raw.obj_val,
            z: raw.z,
            status: raw.status,
        }
    }

    /// Turns the solver's multipliers for the linear problem into a feasible
    /// point of the explicit dual
    ///     max  gamma.y + fbar.z - a mu
    ///     s.t. sum_i y_i Gamma_i + sum_j z_j PE_j <= grad,  |z_j| <= a,
    /// repairing small infeasibilities so the reported value stays a true
    /// lower bound on min <sigma, grad>.
    pub fn certify(&self, grad: &CMat, sol: &LinearSolution) -> Result<DualCertificate> {
        let mut repair = 0.0f64;
        let y_raw: Vec<f64> = sol.z[..self.n_eq].iter().map(|&z| -z).collect();
        let (a, z_named) = if self.k > 0 {
            let p1 = &sol.z[self.n_eq..self.n_eq + self.k];
            let p2 = &sol.z[self.n_eq + self.k..self.n_eq + 2 * self.k];
            let a_raw = sol.z[self.n_eq + 2 * self.k];
            let a = a_raw.max(0.0);
            repair += a - a_raw;
            let mut z = Vec::with_capacity(self.k);
            for j in 0..self.k {
                let raw = p2[j] - p1[j];
                let clipped = raw.clamp(-a, a);
                repair += (clipped - raw).abs();
                z.push(clipped);
            }
            (a, z)
        } else {
            (0.0, Vec::new())
        };

        // M = grad - sum y Gamma - sum z PE must be PSD; shift along the
        // identity combination if the solver's multipliers undershoot
        let mut m = grad.clone();
        for (gmat, &yi) in self.equality_matrices().iter().zip(y_raw.iter()) {
            m -= gmat * C64::new(yi, 0.0);
        }
        for (pmat, &zj) in self.pe_matrices().iter().zip(z_named.iter()) {
            m -= pmat * C64::new(zj, 0.0);
        }
        let min_eig = matfun::eig_trusted(&linalg::hermitian_part(&m)).min_eigenvalue();
        let deficit = (-min_eig).max(0.0);

        let mut y = y_raw;
        let mut dual_raw: f64 = y.iter().zip(&self.gammas).map(|(a, b)| a * b).sum::<f64>()
            + z_named
                .iter()
                .zip(&self.fbar)
                .map(|(a, b)| a * b)
                .sum::<f64>()
            - a * self.mu_eff;
        if deficit > 0.0 {
            let Some((combo, tr_value)) = &self.trace_combo else {
                return Err(Error::CertificateRejected { residual: deficit });
            };
            for (yi, ci) in y.iter_mut().zip(combo) {
                *yi -= deficit * ci;
            }
            dual_raw -= deficit * tr_value;
            repair += deficit;
        }

        Ok(DualCertificate {
            y,
            z: z_named,
            a,
            value: dual_raw,
            residual: repair,
            duality_gap: (sol.primal_obj - dual_raw).abs(),
        })
    }

    fn equality_matrices(&self) -> Vec<CMat> {
        self.eq_rows
            .iter()
            .map(|r| from_coords(r, self.d))
            .collect()
    }

    fn pe_matrices(&self) -> Vec<CMat> {
        self.pe_rows
            .iter()
            .map(|r| from_coords(r, self.d))
            .collect()
    }
}

pub(crate) struct RawSolution {
    x: Vec<f64>,
    z: Vec<f64>,
    obj_val: f64,
    status: String,
}

pub(crate) struct LinearSolution {
    /// Optimizer over the set, eigenvalue-clipped.
    pub sigma: CMat,
    pub primal_obj: f64,
    pub z: Vec<f64>,
    pub status: String,
}

pub(crate) struct DualCertificate {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub a: f64,
    /// Certified lower bound on the linear minimum.
    pub value: f64,
    /// Total repair applied to make the multipliers dual feasible.
    pub residual: f64,
    pub duality_gap: f64,
}
