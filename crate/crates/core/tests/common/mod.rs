//! Instance generators and independent reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use maxent::f64::{CMat, FilterBank, HermMat, SpectrumGrid};
use maxent::scalar::{cis, cplx, creal};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}

pub fn random_real(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| uniform(r, -1.0, 1.0))
}

pub fn random_cmat(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cplx(uniform(r, -1.0, 1.0), uniform(r, -1.0, 1.0)))
}

/// Real symmetric positive definite matrix with smallest eigenvalue >= `floor`.
pub fn random_spd(r: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = random_real(r, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

pub fn random_hpd(r: &mut ChaCha8Rng, n: usize, floor: f64) -> HermMat {
    let a = random_cmat(r, n, n);
    HermMat::new(&a * a.adjoint() + CMat::identity(n, n) * creal(floor)).unwrap()
}

pub fn scalar(v: f64) -> CMat {
    CMat::from_element(1, 1, creal(v))
}

/// Stable filter bank with `n` states and `m` inputs: random `A` rescaled to
/// spectral radius `radius`, random `B`.
pub fn random_bank(r: &mut ChaCha8Rng, n: usize, m: usize, radius: f64) -> FilterBank {
    loop {
        let a = random_real(r, n, n);
        let rho = a.clone().complex_eigenvalues().iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if rho < 1e-3 {
            continue;
        }
        let a = (a * (radius / rho)).map(creal);
        let b = random_real(r, n, m).map(creal);
        if let Ok(fb) = FilterBank::new(a, b) {
            return fb;
        }
    }
}

/// Bank with a pole at zero, `A = diag(0, 0.5, -0.3)`, `B = 1`.
pub fn bank_with_zero_pole() -> FilterBank {
    let a = CMat::from_diagonal(&DVector::from_vec(vec![creal(0.0), creal(0.5), creal(-0.3)]));
    FilterBank::new(a, CMat::from_element(3, 1, creal(1.0))).unwrap()
}

/// Strictly positive `m x m` spectrum `H H* + floor I` with `H` a random
/// trigonometric polynomial of degree 2.
pub fn random_spectrum(r: &mut ChaCha8Rng, m: usize, g: usize, floor: f64) -> SpectrumGrid {
    let h: Vec<CMat> = (0..3).map(|_| random_cmat(r, m, m) * creal(0.6)).collect();
    SpectrumGrid::from_fn(m, g, |t| {
        let mut v = CMat::zeros(m, m);
        for (k, hk) in h.iter().enumerate() {
            v += hk * cis(-(k as f64) * t);
        }
        &v * v.adjoint() + CMat::identity(m, m) * creal(floor)
    })
    .unwrap()
}

/// Real positive scalar spectrum.
pub fn random_scalar_spectrum(r: &mut ChaCha8Rng, g: usize) -> SpectrumGrid {
    let (a, b, c, d) = (uniform(r, -0.4, 0.4), uniform(r, -0.4, 0.4), uniform(r, -0.2, 0.2), uniform(r, 0.5, 2.0));
    SpectrumGrid::scalar_fn(g, |t| d * (1.0 + a * t.cos() + b * (2.0 * t).sin() + c * (3.0 * t).cos())).unwrap()
}

/// Covariance lags `C_k = Σ_i H_{i+k} H_i*` of a moving-average process.
pub fn ma_lags(r: &mut ChaCha8Rng, m: usize, count: usize, depth: usize) -> Vec<CMat> {
    let h: Vec<CMat> = (0..depth).map(|i| random_cmat(r, m, m) * creal(if i == 0 { 1.0 } else { 0.5 })).collect();
    (0..count)
        .map(|k| {
            let mut c = CMat::zeros(m, m);
            for i in 0..depth.saturating_sub(k) {
                c += &h[i + k] * h[i].adjoint();
            }
            c
        })
        .collect()
}

/// Scalar lags generated from reflection coefficients in `(-1, 1)`.
pub fn lags_from_reflections(ks: &[f64]) -> Vec<f64> {
    let mut r = vec![1.0];
    let mut a: Vec<f64> = Vec::new();
    let mut v = 1.0;
    for &k in ks {
        let p = a.len();
        r.push(k * v + (0..p).map(|i| a[i] * r[p - i]).sum::<f64>());
        let mut na: Vec<f64> = (0..p).map(|i| a[i] - k * a[p - 1 - i]).collect();
        na.push(k);
        a = na;
        v *= 1.0 - k * k;
    }
    r
}

/// Textbook Levinson-Durbin: predictor `a_1..a_p` and innovation variance.
pub fn levinson(r: &[f64]) -> (Vec<f64>, f64) {
    let mut a: Vec<f64> = Vec::new();
    let mut e = r[0];
    for p in 1..r.len() {
        let acc: f64 = r[p] - (0..a.len()).map(|i| a[i] * r[p - 1 - i]).sum::<f64>();
        let k = acc / e;
        let mut na: Vec<f64> = (0..a.len()).map(|i| a[i] - k * a[a.len() - 1 - i]).collect();
        na.push(k);
        a = na;
        e *= 1.0 - k * k;
    }
    (a, e)
}

/// Solves `X - A X A* = Q` through the Kronecker-vectorized linear system.
pub fn stein_kron(a: &CMat, q: &CMat) -> CMat {
    let n = a.nrows();
    let big = CMat::identity(n * n, n * n) - a.conjugate().kronecker(a);
    let vq = DVector::from_iterator(n * n, q.iter().copied());
    let x = big.lu().solve(&vq).unwrap();
    CMat::from_iterator(n, n, x.iter().copied())
}

/// Root of an increasing function on `[lo, hi]` by bisection to `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0, "bracket does not contain a root");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Dense log-determinant of a Hermitian positive definite matrix via Cholesky.
pub fn dense_log_det(m: &CMat) -> Option<f64> {
    let ch = m.clone().cholesky()?;
    Some(2.0 * ch.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

/// Largest block norm difference between two block sequences.
pub fn max_block_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
