//! Protocol descriptions: completely positive maps in Kraus form, the
//! key-generation postprocessing map, and the single-photon BB84
//! prepare-and-measure instance with loss and depolarizing noise.

use nalgebra::DVector;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matfun;
use crate::types::{CMat, DensityOperator, HermitianMatrix, PinchingMap, C64};

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Completely positive, trace-nonincreasing map in Kraus form.
///
/// An optional depolarizing component rho -> (1-w) K(rho) + w Tr(K rho) I/d
/// is kept structured instead of expanded into d^2 extra Kraus operators;
/// `materialize_kraus` expands it on demand.
#[derive(Debug, Clone)]
pub struct CPMap {
    kraus: Vec<CMat>,
    in_dim: usize,
    out_dim: usize,
    depol_mix: f64,
    trace_preserving: bool,
}

impl CPMap {
    /// Validates dimensions and the trace-nonincreasing condition
    /// sum K'K <= I + 1e-10.
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter {
                name: "kraus operator count",
                value: 0.0,
            });
        }
        let out_dim = kraus[0].nrows();
        let in_dim = kraus[0].ncols();
        let mut gram = CMat::zeros(in_dim, in_dim);
        for k in &kraus {
            if k.nrows() != out_dim || k.ncols() != in_dim {
                return Err(Error::DimensionMismatch {
                    expected: in_dim,
                    found: k.ncols(),
                });
            }
            gram += k.adjoint() * k;
        }
        let eig = matfun::eig_trusted(&linalg::hermitian_part(&gram));
        let max = eig.max_eigenvalue();
        if max > 1.0 + 1e-10 {
            return Err(Error::IncompletePovm {
                deviation: max - 1.0,
            });
        }
        let tp_dev = linalg::max_abs(&(&gram - CMat::identity(in_dim, in_dim)));
        Ok(Self {
            kraus,
            in_dim,
            out_dim,
            depol_mix: 0.0,
            trace_preserving: tp_dev <= 1e-10,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kraus: vec![CMat::identity(dim, dim)],
            in_dim: dim,
            out_dim: dim,
            depol_mix: 0.0,
            trace_preserving: true,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// The structured Kraus operators, excluding any depolarizing component.
    pub fn kraus_ops(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn depol_mix(&self) -> f64 {
        self.depol_mix
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Mixes a depolarizing component onto the output:
    /// rho -> (1-eps) M(rho) + eps Tr(M rho) I/out_dim. Composing twice
    /// multiplies the surviving weights.
    pub fn with_depolarizing_mix(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter {
                name: "depolarizing weight",
                value: eps,
            });
        }
        let mut out = self.clone();
        out.depol_mix = 1.0 - (1.0 - self.depol_mix) * (1.0 - eps);
        Ok(out)
    }

    /// Action on a raw matrix (not necessarily a state).
    pub(crate) fn apply_raw(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        if self.depol_mix > 0.0 {
            let t = out.trace();
            let w = self.depol_mix;
            out *= cr(1.0 - w);
            let add = t * C64::new(w / self.out_dim as f64, 0.0);
            for i in 0..self.out_dim {
                out[(i, i)] += add;
            }
        }
        out
    }

    /// Adjoint action sum K' X K, with the depolarizing component
    /// transposed to X -> (1-w) X + w Tr(X) I / out_dim applied first.
    pub(crate) fn adjoint_raw(&self, x: &CMat) -> CMat {
        let y = if self.depol_mix > 0.0 {
            let w = self.depol_mix;
            let t = x.trace();
            let mut y = x * cr(1.0 - w);
            let add = t * C64::new(w / self.out_dim as f64, 0.0);
            for i in 0..self.out_dim {
                y[(i, i)] += add;
            }
            y
        } else {
            x.clone()
        };
        let mut out = CMat::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            out += k.adjoint() * &y * k;
        }
        out
    }

    /// Expands the depolarizing component into explicit Kraus operators
    /// {sqrt(1-w) K_m} + {sqrt(w/d) |i><j| K_m}.
    pub fn materialize_kraus(&self) -> Vec<CMat> {
        if self.depol_mix == 0.0 {
            return self.kraus.clone();
        }
        let w = self.depol_mix;
        let d = self.out_dim;
        let mut out = Vec::with_capacity(self.kraus.len() * (1 + d * d));
        for k in &self.kraus {
            out.push(k * cr((1.0 - w).sqrt()));
        }
        let amp = cr((w / d as f64).sqrt());
        for k in &self.kraus {
            for i in 0..d {
                for j in 0..d {
                    // |i><j| K picks row j of K into row i
                    let mut op = CMat::zeros(d, self.in_dim);
                    for c in 0..self.in_dim {
                        op[(i, c)] = amp * k[(j, c)];
                    }
                    out.push(op);
                }
            }
        }
        out
    }
}

/// M(rho) = sum_k K rho K'.
pub fn apply_cp_map(m: &CPMap, rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dim() != m.in_dim {
        return Err(Error::DimensionMismatch {
            expected: m.in_dim,
            found: rho.dim(),
        });
    }
    let out = m.apply_raw(rho.mat());
    let trace = out.trace().re;
    if trace <= 0.0 {
        return Err(Error::TraceOutOfRange { trace });
    }
    Ok(DensityOperator::trusted(out))
}

/// M'(X) = sum_k K' X K, the Hilbert-Schmidt adjoint.
pub fn adjoint_cp_map(m: &CPMap, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    if x.dim() != m.out_dim {
        return Err(Error::DimensionMismatch {
            expected: m.out_dim,
            found: x.dim(),
        });
    }
    Ok(HermitianMatrix::trusted(m.adjoint_raw(x.mat())))
}

/// Builds the postprocessing map with Kraus operators
/// G_s = sum_x |g(x,s)>_R (x) sqrt(M^(x,s)) (x) sqrt(p_s B_s) (x) |s>_S,
/// acting A(x)B -> R(x)A(x)B(x)S with R slowest.
///
/// `povm[s][x]` are Alice's in-basis measurement operators (zero matrices for
/// outcomes not announced under s); `bob_ops`, one PSD operator per
/// announcement, select which Bob events are kept (identity when absent).
pub fn build_postprocessing_map(
    povm: &[Vec<CMat>],
    key_map: &dyn Fn(usize, usize) -> usize,
    announce_probs: &[f64],
    bob_dim: usize,
    bob_ops: Option<&[CMat]>,
) -> Result<CPMap> {
    let n_s = povm.len();
    if n_s == 0 || announce_probs.len() != n_s {
        return Err(Error::InvalidParameter {
            name: "announcement count",
            value: n_s as f64,
        });
    }
    let d_a = povm[0]
        .first()
        .map(|m| m.nrows())
        .ok_or(Error::InvalidParameter {
            name: "povm outcomes",
            value: 0.0,
        })?;
    let p_total: f64 = announce_probs.iter().sum();
    if announce_probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) || p_total > 1.0 + 1e-10 {
        return Err(Error::InvalidParameter {
            name: "announcement probabilities",
            value: p_total,
        });
    }
    if let Some(ops) = bob_ops {
        if ops.len() != n_s {
            return Err(Error::DimensionMismatch {
                expected: n_s,
                found: ops.len(),
            });
        }
    }

    // key register size from the range of g over announced outcomes
    let mut d_r = 0usize;
    for (s, elems) in povm.iter().enumerate() {
        for (x, m) in elems.iter().enumerate() {
            if linalg::max_abs(m) > 0.0 {
                d_r = d_r.max(key_map(x, s) + 1);
            }
        }
    }
    if d_r == 0 {
        return Err(Error::InvalidParameter {
            name: "key alphabet size",
            value: 0.0,
        });
    }

    let in_dim = d_a * bob_dim;
    let mut kraus = Vec::with_capacity(n_s);
    for (s, elems) in povm.iter().enumerate() {
        // per-announcement completeness: sum_x M^(x,s) <= I
        let mut sum = CMat::zeros(d_a, d_a);
        for m in elems {
            if m.nrows() != d_a || m.ncols() != d_a {
                return Err(Error::DimensionMismatch {
                    expected: d_a,
                    found: m.nrows(),
                });
            }
            sum += m;
        }
        let max_eig = matfun::eig_trusted(&linalg::hermitian_part(&sum)).max_eigenvalue();
        if max_eig > 1.0 + 1e-10 {
            return Err(Error::IncompletePovm {
                deviation: max_eig - 1.0,
            });
        }

        let bob_weight = match bob_ops {
            Some(ops) => {
                let h = HermitianMatrix::new(ops[s].clone())?;
                matfun::matrix_power(&h, 0.5)?.into_matrix()
            }
            None => CMat::identity(bob_dim, bob_dim),
        } * cr(announce_probs[s].sqrt());

        let mut g = CMat::zeros(d_r * d_a * bob_dim * n_s, in_dim);
        for (x, m) in elems.iter().enumerate() {
            if linalg::max_abs(m) == 0.0 {
                continue;
            }
            let h = HermitianMatrix::new(m.clone())?;
            let sqrt_m = matfun::matrix_power(&h, 0.5)?.into_matrix();
            let key_vec = linalg::basis_vector(d_r, key_map(x, s));
            let s_vec = linalg::basis_vector(n_s, s);
            // |g(x,s)>_R (x) sqrt(M) (x) sqrt(p_s B_s) (x) |s>_S
            let term = key_vec
                .kronecker(&sqrt_m)
                .kronecker(&bob_weight)
                .kronecker(&s_vec);
            g += term;
        }
        kraus.push(g);
    }
    CPMap::new(kraus)
}

/// Register dimensions of a postprocessed protocol space R (x) A (x) B (x) S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RegisterDims {
    pub r: usize,
    pub a: usize,
    pub b: usize,
    pub s: usize,
}

impl RegisterDims {
    pub fn in_dim(&self) -> usize {
        self.a * self.b
    }

    pub fn out_dim(&self) -> usize {
        self.r * self.a * self.b * self.s
    }
}

/// A fully specified protocol: honest state, postprocessing map, key
/// pinching, constraint observables with their honest values, and the
/// conditional entropy driving the error-correction cost.
#[derive(Debug, Clone)]
pub struct ProtocolInstance {
    pub rho_ideal: DensityOperator,
    pub gmap: CPMap,
    pub zmap: PinchingMap,
    /// (Gamma_i, gamma_i) pairs fixing Tr(Gamma_i rho) exactly.
    pub equality_observables: Vec<(HermitianMatrix, f64)>,
    /// Statistical observables whose frequencies live in the l1 ball.
    pub pe_observables: Vec<HermitianMatrix>,
    /// Honest frequencies of `pe_observables`.
    pub target_freq: Vec<f64>,
    /// H(Z|Y) per kept round, from the honest statistics.
    pub hzy: f64,
    pub dims: RegisterDims,
    /// Tr G(rho_ideal): fraction of rounds kept for key generation.
    pub sift_prob: f64,
}

impl ProtocolInstance {
    /// Validates cross-field consistency: dimensions line up, the honest
    /// state reproduces gamma and the target frequencies, hzy is a valid
    /// entropy for the key alphabet.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho_ideal: DensityOperator,
        gmap: CPMap,
        zmap: PinchingMap,
        equality_observables: Vec<(HermitianMatrix, f64)>,
        pe_observables: Vec<HermitianMatrix>,
        target_freq: Vec<f64>,
        hzy: f64,
        dims: RegisterDims,
    ) -> Result<Self> {
        if rho_ideal.dim() != dims.in_dim() || gmap.in_dim() != dims.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: dims.in_dim(),
                found: rho_ideal.dim(),
            });
        }
        if gmap.out_dim() != dims.out_dim() || zmap.dim() != dims.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: dims.out_dim(),
                found: gmap.out_dim(),
            });
        }
        for (g, v) in &equality_observables {
            let have = g.inner(&rho_ideal.as_hermitian());
            if (have - v).abs() > 1e-10 {
                return Err(Error::Infeasible {
                    detail: format!(
                        "equality observable expects {v:.6e} but honest state gives {have:.6e}"
                    ),
                });
            }
        }
        let freq = expected_frequency(&rho_ideal, &pe_observables)?;
        if freq.len() != target_freq.len() {
            return Err(Error::DimensionMismatch {
                expected: target_freq.len(),
                found: freq.len(),
            });
        }
        for (have, want) in freq.iter().zip(&target_freq) {
            if (have - want).abs() > 1e-10 {
                return Err(Error::Infeasible {
                    detail: format!(
                        "target frequency {want:.6e} violated by honest state ({have:.6e})"
                    ),
                });
            }
        }
        if target_freq.iter().any(|&f| f < -1e-12)
            || (target_freq.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter {
                name: "target frequency normalization",
                value: target_freq.iter().sum::<f64>(),
            });
        }
        let max_h = (zmap.num_blocks() as f64).log2();
        if !(0.0..=max_h + 1e-12).contains(&hzy) {
            return Err(Error::InvalidParameter {
                name: "hzy",
                value: hzy,
            });
        }
        let sift_prob = gmap.apply_raw(rho_ideal.mat()).trace().re;
        if !(sift_prob > 0.0 && sift_prob <= 1.0 + 1e-10) {
            return Err(Error::TraceOutOfRange { trace: sift_prob });
        }
        Ok(Self {
            rho_ideal,
            gmap,
            zmap,
            equality_observables,
            pe_observables,
            target_freq,
            hzy,
            dims,
            sift_prob,
        })
    }

    /// Structured dump (dims, Kraus matrices, observables, frequencies) for
    /// reproducibility records.
    pub fn to_json(&self) -> Value {
        json!({
            "dims": self.dims,
            "rho_ideal": mat_json(self.rho_ideal.mat()),
            "gmap_kraus": self.gmap.materialize_kraus().iter().map(mat_json).collect::<Vec<_>>(),
            "equality_observables": self.equality_observables.iter()
                .map(|(g, v)| json!({"observable": mat_json(g.mat()), "value": v}))
                .collect::<Vec<_>>(),
            "pe_observables": self.pe_observables.iter()
                .zip(&self.target_freq)
                .map(|(g, f)| json!({"observable": mat_json(g.mat()), "frequency": f}))
                .collect::<Vec<_>>(),
            "hzy": self.hzy,
            "sift_prob": self.sift_prob,
            "key_blocks": self.zmap.num_blocks(),
        })
    }
}

/// Complex matrix as rows of [re, im] pairs.
fn mat_json(m: &CMat) -> Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect();
    json!(rows)
}

/// Frequencies Tr(rho Gamma_i) of a complete observable set.
pub fn expected_frequency(rho: &DensityOperator, obs: &[HermitianMatrix]) -> Result<Vec<f64>> {
    if obs.is_empty() {
        return Err(Error::IncompletePovm { deviation: 1.0 });
    }
    let d = rho.dim();
    let mut sum = CMat::zeros(d, d);
    for g in obs {
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: g.dim(),
            });
        }
        sum += g.mat();
    }
    let dev = linalg::max_abs(&(&sum - CMat::identity(d, d)));
    if dev > 1e-8 {
        return Err(Error::IncompletePovm { deviation: dev });
    }
    Ok(obs.iter().map(|g| g.inner(&rho.as_hermitian())).collect())
}

/// Tunable pieces of the BB84 prepare-and-measure model that the underlying
/// analysis leaves open.
#[derive(Debug, Clone)]
pub struct Bb84Options {
    /// Probability of the computational basis, for Alice's priors and Bob's
    /// measurement choice alike.
    pub z_basis_prob: f64,
    /// Keep basis-matched no-click rounds in key generation (they then count
    /// as erasures in the error-correction cost) instead of discarding them.
    pub include_no_click: bool,
}

impl Default for Bb84Options {
    fn default() -> Self {
        Self {
            z_basis_prob: 0.5,
            include_no_click: false,
        }
    }
}

/// Single-photon BB84 with a lossy then depolarizing channel, default options.
pub fn bb84_pm_instance(p_depol: f64, loss: f64) -> Result<ProtocolInstance> {
    bb84_pm_instance_with(p_depol, loss, &Bb84Options::default())
}

/// Single-photon BB84 with explicit model options.
///
/// Registers: R (key bit, 2) (x) A (signal index, 4) (x) B (qubit + vacuum, 3)
/// (x) S (basis announcement, 2). Signals |0>,|1>,|+>,|-> are prepared with
/// the basis-weighted priors; the channel sends the qubit through loss into
/// the vacuum level and depolarizes the surviving qubit; Bob measures Z or X
/// with a no-click outcome; matched-basis detected rounds are kept.
pub fn bb84_pm_instance_with(
    p_depol: f64,
    loss: f64,
    opts: &Bb84Options,
) -> Result<ProtocolInstance> {
    if !(0.0..=1.0).contains(&p_depol) {
        return Err(Error::InvalidParameter {
            name: "p_depol",
            value: p_depol,
        });
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::InvalidParameter {
            name: "loss",
            value: loss,
        });
    }
    let q = opts.z_basis_prob;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter {
            name: "z_basis_prob",
            value: q,
        });
    }

    let dims = RegisterDims {
        r: 2,
        a: 4,
        b: 3,
        s: 2,
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let signals: [DVector<C64>; 4] = [
        DVector::from_vec(vec![cr(1.0), cr(0.0)]),
        DVector::from_vec(vec![cr(0.0), cr(1.0)]),
        DVector::from_vec(vec![cr(s), cr(s)]),
        DVector::from_vec(vec![cr(s), cr(-s)]),
    ];
    let priors = [q / 2.0, q / 2.0, (1.0 - q) / 2.0, (1.0 - q) / 2.0];

    // channel C2 -> C3: embed, send weight `loss` to the vacuum level,
    // depolarize the surviving qubit
    let mut embed = CMat::zeros(3, 2);
    embed[(0, 0)] = cr(1.0);
    embed[(1, 1)] = cr(1.0);
    let paulis = {
        let mut x = CMat::zeros(2, 2);
        x[(0, 1)] = cr(1.0);
        x[(1, 0)] = cr(1.0);
        let mut y = CMat::zeros(2, 2);
        y[(0, 1)] = C64::new(0.0, -1.0);
        y[(1, 0)] = C64::new(0.0, 1.0);
        let mut z = CMat::zeros(2, 2);
        z[(0, 0)] = cr(1.0);
        z[(1, 1)] = cr(-1.0);
        [CMat::identity(2, 2), x, y, z]
    };
    let weights = [
        1.0 - 0.75 * p_depol,
        0.25 * p_depol,
        0.25 * p_depol,
        0.25 * p_depol,
    ];
    let mut channel = Vec::new();
    for (pauli, w) in paulis.iter().zip(weights) {
        if w > 0.0 {
            channel.push(&embed * pauli * cr((w * (1.0 - loss)).sqrt()));
        }
    }
    if loss > 0.0 {
        for j in 0..2 {
            let mut k = CMat::zeros(3, 2);
            k[(2, j)] = cr(loss.sqrt());
            channel.push(k);
        }
    }

    // source-replacement state, channel applied to the flying qubit
    let mut psi = DVector::zeros(8);
    for (x, (sig, p)) in signals.iter().zip(priors).enumerate() {
        let mut ax = DVector::zeros(4);
        ax[x] = cr(p.sqrt());
        psi += ax.kronecker(sig);
    }
    let pure = linalg::outer(&psi);
    let mut rho = CMat::zeros(12, 12);
    let eye4 = CMat::identity(4, 4);
    for k in &channel {
        let lifted = eye4.kronecker(k);
        rho += &lifted * &pure * lifted.adjoint();
    }
    let rho_ideal = DensityOperator::new(rho)?;

    // Bob's POVM on C3: basis-weighted qubit projectors plus no-click
    let ket = |v: &DVector<C64>| {
        let mut w = DVector::zeros(3);
        w[0] = v[0];
        w[1] = v[1];
        w
    };
    let bob_povm: Vec<CMat> = vec![
        linalg::outer(&ket(&signals[0])) * cr(q),
        linalg::outer(&ket(&signals[1])) * cr(q),
        linalg::outer(&ket(&signals[2])) * cr(1.0 - q),
        linalg::outer(&ket(&signals[3])) * cr(1.0 - q),
        linalg::outer(&linalg::basis_vector(3, 2)),
    ];

    // postprocessing: announcement s = basis, key bit g(x,s) = x mod 2
    let proj_a = |x: usize| linalg::outer(&linalg::basis_vector(4, x));
    let zero4 = CMat::zeros(4, 4);
    let povm = vec![
        vec![proj_a(0), proj_a(1), zero4.clone(), zero4.clone()],
        vec![zero4.clone(), zero4.clone(), proj_a(2), proj_a(3)],
    ];
    let click = {
        let mut c = CMat::zeros(3, 3);
        c[(0, 0)] = cr(1.0);
        c[(1, 1)] = cr(1.0);
        c
    };
    let kept: Vec<CMat> = if opts.include_no_click {
        vec![CMat::identity(3, 3), CMat::identity(3, 3)]
    } else {
        vec![click.clone(), click]
    };
    let gmap = build_postprocessing_map(&povm, &|x, _s| x % 2, &[q, 1.0 - q], 3, Some(&kept))?;
    let zmap = PinchingMap::key_register(2, dims.out_dim() / 2);

    // equality constraints pin Alice's marginal completely
    let eye3 = CMat::identity(3, 3);
    let rho_h = rho_ideal.as_hermitian();
    let equality_observables: Vec<(HermitianMatrix, f64)> = linalg::hermitian_basis(4)
        .into_iter()
        .map(|theta| {
            let gamma = HermitianMatrix::trusted(theta.kronecker(&eye3));
            let value = gamma.inner(&rho_h);
            (gamma, value)
        })
        .collect();

    // statistical observables: joint (signal, Bob outcome) frequencies
    let mut pe_observables = Vec::with_capacity(20);
    for a in 0..4 {
        for m in &bob_povm {
            pe_observables.push(HermitianMatrix::trusted(proj_a(a).kronecker(m)));
        }
    }
    let target_freq = expected_frequency(&rho_ideal, &pe_observables)?;

    let hzy = conditional_entropy_bits(&target_freq, q, opts.include_no_click);

    ProtocolInstance::new(
        rho_ideal,
        gmap,
        zmap,
        equality_observables,
        pe_observables,
        target_freq,
        hzy,
        dims,
    )
}

/// H(Z|Y) over kept rounds, from the joint (signal, Bob outcome) frequencies
/// laid out as freq[5a + b] with b = 4 the no-click outcome.
fn conditional_entropy_bits(freq: &[f64], q: f64, include_no_click: bool) -> f64 {
    // rows (z, y): detected matched-basis outcomes, plus per-basis no-click
    // columns when those rounds are kept
    let mut table: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..4usize {
        let s = a / 2;
        let z = a % 2;
        let bob_range = if s == 0 { 0..2 } else { 2..4 };
        for b in bob_range {
            table.push((z, b, freq[5 * a + b]));
        }
        if include_no_click {
            let qs = if s == 0 { q } else { 1.0 - q };
            table.push((z, 4 + s, qs * freq[5 * a + 4]));
        }
    }
    let total: f64 = table.iter().map(|t| t.2).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    let ys: std::collections::BTreeSet<usize> = table.iter().map(|t| t.1).collect();
    for y in ys {
        let p0: f64 = table
            .iter()
            .filter(|t| t.1 == y && t.0 == 0)
            .map(|t| t.2)
            .sum();
        let p1: f64 = table
            .iter()
            .filter(|t| t.1 == y && t.0 == 1)
            .map(|t| t.2)
            .sum();
        let py = p0 + p1;
        if py <= 0.0 {
            continue;
        }
        for p in [p0, p1] {
            if p > 0.0 {
                h -= p * (p / py).log2();
            }
        }
    }
    h / total
}
