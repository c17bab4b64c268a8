//! Helpers shared by the integration test targets: seeded random operators
//! and an independent quadrature oracle for the resolvent integral.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use renyi_qkd::types::{CMat, DensityOperator, HermitianMatrix, C64};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Square matrix with entries uniform on the complex unit box.
pub fn random_complex(rng: &mut impl Rng, d: usize) -> CMat {
    DMatrix::from_fn(d, d, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> HermitianMatrix {
    let g = random_complex(rng, d);
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    HermitianMatrix::new(h).expect("hermitian by construction")
}

/// Full-rank density operator: Wishart sample floored away from singularity.
pub fn random_density(rng: &mut impl Rng, d: usize) -> DensityOperator {
    let g = random_complex(rng, d);
    let mut w = &g * g.adjoint();
    for i in 0..d {
        w[(i, i)] += c(0.05 * d as f64, 0.0);
    }
    let tr: f64 = (0..d).map(|i| w[(i, i)].re).sum();
    DensityOperator::new(w * c(1.0 / tr, 0.0)).expect("normalized wishart")
}

/// Strictly positive matrix with spectrum roughly in [floor, floor + O(1)].
pub fn random_positive(rng: &mut impl Rng, d: usize, floor: f64) -> HermitianMatrix {
    let g = random_complex(rng, d);
    let mut w = (&g * g.adjoint()) * c(1.0 / d as f64, 0.0);
    for i in 0..d {
        w[(i, i)] += c(floor, 0.0);
    }
    HermitianMatrix::new(w).expect("positive by construction")
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// n-point Gauss-Legendre rule on [-1, 1], nodes by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // P_n and P_n' at x via the three-term recurrence
    fn legendre(n: usize, x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 1..n {
            let kf = k as f64;
            let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = x;
        weights[k] = w;
        nodes[n - 1 - k] = -x;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

pub struct QuadratureResult {
    pub value: CMat,
    pub converged: bool,
}

/// ∫₀^∞ (B+t)⁻¹ A (B+t)⁻¹ t^μ dt by direct numerical integration.
///
/// Substituting t = eˣ makes the integrand analytic with exponential decay at
/// rate μ+1 on the left and 1-μ on the right, so composite Gauss-Legendre
/// panels converge spectrally; panels are doubled until two refinements agree.
pub fn frechet_quadrature(a: &CMat, b: &CMat, mu: f64) -> QuadratureResult {
    assert!(mu > 0.0 && mu < 1.0, "mu must lie in (0,1)");
    let d = b.nrows();
    let eig = b.clone().symmetric_eigen();
    let lmin = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    assert!(lmin > 0.0, "B must be positive definite");

    // truncate where each exponential tail drops below 1e-15 of its knee value
    let lo = lmin.ln() - 34.6 / (mu + 1.0);
    let hi = lmax.ln() + 34.6 / (1.0 - mu);

    let integrand = |x: f64| -> CMat {
        let t = x.exp();
        let mut m = b.clone();
        for i in 0..d {
            m[(i, i)] += c(t, 0.0);
        }
        let inv = m.lu().try_inverse().expect("B + tI is invertible");
        (&inv * a * &inv) * c(((mu + 1.0) * x).exp(), 0.0)
    };

    let (nodes, weights) = gauss_legendre(24);
    let integrate = |panels: usize| -> CMat {
        let h = (hi - lo) / panels as f64;
        let mut acc = CMat::zeros(d, d);
        for p in 0..panels {
            let (a0, a1) = (lo + p as f64 * h, lo + (p + 1) as f64 * h);
            let (mid, half) = (0.5 * (a0 + a1), 0.5 * (a1 - a0));
            for (x, w) in nodes.iter().zip(&weights) {
                acc += integrand(mid + half * x) * c(half * w, 0.0);
            }
        }
        acc
    };

    let mut panels = ((hi - lo) / 2.0).ceil() as usize;
    let mut prev = integrate(panels);
    for _ in 0..6 {
        panels *= 2;
        let next = integrate(panels);
        let diff = (&next - &prev).norm();
        let scale = next.norm().max(f64::MIN_POSITIVE);
        if diff <= 1e-11 * scale {
            return QuadratureResult {
                value: next,
                converged: true,
            };
        }
        prev = next;
    }
    QuadratureResult {
        value: prev,
        converged: false,
    }
}
