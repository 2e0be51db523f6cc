//! Maximum-entropy extension of a block-Toeplitz covariance sequence.
//!
//! The extension's spectrum `Φ_c` has an inverse that is a pseudo-polynomial
//! of degree `n - 1`, with zero coefficients at every missing lag. Complete
//! sequences are handled by Levinson-Durbin (scalar) or Whittle's
//! multichannel recursion; sequences with missing lags go through the
//! trigonometric log-det dual.

use std::f64::consts::PI;

use crate::dual::{minimize, TrigDual};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, CMat, HermMat};
use crate::scalar::{creal, lit, to_f64, Real};
use crate::spectrum::{eval_pseudo_poly, grid_theta, SpectrumGrid};

/// Covariance lags `C_0..C_{n-1}` with `C_k = E[y(t+k) y(t)*]`, and a set of
/// lags in `1..n` whose values are unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct CovSequence<T: Real> {
    m: usize,
    lags: Vec<CMat<T>>,
    missing: Vec<usize>,
}

impl<T: Real> CovSequence<T> {
    /// Values at missing lags are ignored.
    pub fn new(mut lags: Vec<CMat<T>>, missing: &[usize]) -> Result<Self> {
        let n = lags.len();
        if n == 0 {
            return Err(Error::InvalidInput("at least C_0 is required".into()));
        }
        let m = lags[0].nrows();
        for (k, c) in lags.iter().enumerate() {
            if c.nrows() != m || c.ncols() != m {
                return Err(Error::DimensionMismatch(format!("lag {k} is {}x{}, expected {m}x{m}", c.nrows(), c.ncols())));
            }
        }
        let mut missing = missing.to_vec();
        missing.sort_unstable();
        missing.dedup();
        if let Some(&k) = missing.iter().find(|&&k| k == 0 || k >= n) {
            return Err(Error::InvalidInput(format!("missing lag {k} must lie in 1..{}", n - 1)));
        }
        for &k in &missing {
            lags[k] = CMat::zeros(m, m);
        }
        lags[0] = hermitian_part(&lags[0]);
        HermMat::new(lags[0].clone())?.require_pd("C_0")?;
        let seq = Self { m, lags, missing };
        if seq.missing.is_empty() {
            seq.toeplitz()?.require_pd("block-Toeplitz matrix of the covariance lags")?;
        }
        Ok(seq)
    }

    pub fn scalar(lags: &[f64], missing: &[usize]) -> Result<Self> {
        Self::new(lags.iter().map(|&c| CMat::from_element(1, 1, creal(lit(c)))).collect(), missing)
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.lags.len()
    }

    pub fn lags(&self) -> &[CMat<T>] {
        &self.lags
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn is_missing(&self, k: usize) -> bool {
        self.missing.binary_search(&k).is_ok()
    }

    /// Lags with known values, including 0.
    pub fn available(&self) -> Vec<usize> {
        (0..self.order()).filter(|&k| !self.is_missing(k)).collect()
    }

    /// `nm x nm` Hermitian block-Toeplitz matrix with block `(i, j) = C_{j-i}`.
    pub fn toeplitz(&self) -> Result<HermMat<T>> {
        if !self.missing.is_empty() {
            return Err(Error::InvalidInput("Toeplitz matrix undefined with missing lags".into()));
        }
        Ok(block_toeplitz(&self.lags))
    }
}

/// Block `(i, j) = C_{j-i}`, `C_{-k} = C_k*`.
pub fn block_toeplitz<T: Real>(lags: &[CMat<T>]) -> HermMat<T> {
    let n = lags.len();
    let m = lags[0].nrows();
    let mut t = CMat::zeros(n * m, n * m);
    for i in 0..n {
        for j in 0..n {
            let blk = if j >= i { lags[j - i].clone() } else { lags[i - j].adjoint() };
            t.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
        }
    }
    HermMat::new(t).expect("finite lags")
}

/// Maximum-entropy AR model: `Φ_c^{-1} = Σ_{|k|<n} A_k e^{-jϑk}`, equivalently
/// `y(t) = Σ_k a_k y(t-k) + e(t)` with innovation covariance `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArModel<T: Real> {
    /// `A_0..A_{n-1}`.
    pub coeffs: Vec<CMat<T>>,
    /// `a_1..a_{n-1}`.
    pub predictor: Vec<CMat<T>>,
    pub innovation: HermMat<T>,
}

impl<T: Real> ArModel<T> {
    pub fn block_dim(&self) -> usize {
        self.innovation.dim()
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `Φ^{-1}` at angle `theta`.
    pub fn inverse_spectrum_at(&self, theta: T) -> CMat<T> {
        eval_pseudo_poly(&self.coeffs, theta)
    }
}

/// Scalar Levinson-Durbin on `r_0..r_p`: returns `(a_1..a_p, innovation variance)`.
pub fn levinson_durbin<T: Real>(r: &[T]) -> Result<(Vec<T>, T)> {
    if r.is_empty() || !(r[0] > T::zero()) {
        return Err(Error::NotPositiveDefinite("r_0 must be positive".into()));
    }
    let mut a: Vec<T> = Vec::new();
    let mut v = r[0];
    for p in 1..r.len() {
        let acc = (0..a.len()).fold(r[p], |s, k| s - a[k] * r[p - 1 - k]);
        let kappa = acc / v;
        let mut next = a.clone();
        for k in 0..a.len() {
            next[k] = a[k] - kappa * a[a.len() - 1 - k];
        }
        next.push(kappa);
        a = next;
        v *= T::one() - kappa * kappa;
        if !(v > T::zero()) {
            return Err(Error::NotPositiveDefinite("Toeplitz matrix is not positive definite".into()));
        }
    }
    Ok((a, v))
}

/// Whittle's multichannel recursion on `C_0..C_p`: returns forward
/// coefficients `a_1..a_p` and the forward innovation covariance.
pub fn whittle<T: Real>(c: &[CMat<T>]) -> Result<(Vec<CMat<T>>, HermMat<T>)> {
    let m = c[0].nrows();
    let mut a: Vec<CMat<T>> = Vec::new();
    let mut b: Vec<CMat<T>> = Vec::new();
    let mut vf = HermMat::new(c[0].clone())?;
    let mut vb = vf.clone();
    for p in 0..(c.len() - 1) {
        let mut delta = c[p + 1].clone();
        for k in 1..=p {
            delta -= &a[k - 1] * &c[p + 1 - k];
        }
        let vb_inv = vb.inverse_pd().map_err(|_| not_pd())?;
        let vf_inv = vf.inverse_pd().map_err(|_| not_pd())?;
        let kf = &delta * vb_inv.as_matrix();
        let kb = delta.adjoint() * vf_inv.as_matrix();
        let mut na = Vec::with_capacity(p + 1);
        let mut nb = Vec::with_capacity(p + 1);
        for k in 1..=p {
            na.push(&a[k - 1] - &kf * &b[p - k]);
            nb.push(&b[k - 1] - &kb * &a[p - k]);
        }
        na.push(kf.clone());
        nb.push(kb.clone());
        vf = HermMat::new(vf.as_matrix() - &kf * delta.adjoint())?;
        vb = HermMat::new(vb.as_matrix() - &kb * &delta)?;
        vf.require_pd("forward innovation covariance").map_err(|_| not_pd())?;
        a = na;
        b = nb;
    }
    debug_assert_eq!(vf.dim(), m);
    Ok((a, vf))
}

fn not_pd() -> Error {
    Error::NotPositiveDefinite("block-Toeplitz matrix of the covariance lags".into())
}

/// Predictor form from lags `C_0..C_{n-1}`.
pub fn predictor<T: Real>(c: &[CMat<T>]) -> Result<(Vec<CMat<T>>, HermMat<T>)> {
    if c[0].nrows() == 1 {
        let r: Vec<T> = c.iter().map(|x| x[(0, 0)].re).collect();
        if c.iter().all(|x| x[(0, 0)].im == T::zero()) {
            let (a, v) = levinson_durbin(&r)?;
            return Ok((a.into_iter().map(|x| CMat::from_element(1, 1, creal(x))).collect(), HermMat::diag(&[v])));
        }
    }
    whittle(c)
}

/// `A_d = Σ_k α_k* R^{-1} α_{k+d}` with `α_0 = I`, `α_k = -a_k`.
pub fn pseudo_poly_from_predictor<T: Real>(a: &[CMat<T>], r: &HermMat<T>) -> Result<Vec<CMat<T>>> {
    let m = r.dim();
    let rinv = r.inverse_pd()?.into_matrix();
    let mut alpha = vec![CMat::identity(m, m)];
    alpha.extend(a.iter().map(|x| -x));
    let n = alpha.len();
    let coeffs = (0..n)
        .map(|d| {
            let mut s = CMat::zeros(m, m);
            for k in 0..(n - d) {
                s += alpha[k].adjoint() * &rinv * &alpha[k + d];
            }
            if d == 0 { hermitian_part(&s) } else { s }
        })
        .collect();
    Ok(coeffs)
}

/// Dual tolerance for the missing-lag path.
pub const DUAL_TOL: f64 = 1e-12;
pub const DUAL_MAX_ITER: usize = 200;

/// Maximum-entropy extension on a grid of `grid_size` points.
pub fn burg_extend<T: Real>(c: &CovSequence<T>, grid_size: usize) -> Result<(ArModel<T>, SpectrumGrid<T>)> {
    burg_extend_with(c, grid_size, lit(DUAL_TOL), DUAL_MAX_ITER)
}

/// [`burg_extend`] with explicit dual settings for the missing-lag path.
pub fn burg_extend_with<T: Real>(
    c: &CovSequence<T>,
    grid_size: usize,
    tol: T,
    max_iter: usize,
) -> Result<(ArModel<T>, SpectrumGrid<T>)> {
    let n = c.order();
    if !grid_size.is_power_of_two() || grid_size < 4 {
        return Err(Error::InvalidInput(format!("grid size must be a power of two >= 4, got {grid_size}")));
    }
    if n >= grid_size / 4 {
        return Err(Error::InvalidInput(format!("order {n} too large for a grid of {grid_size} points (need n < G/4)")));
    }
    let m = c.block_dim();
    let model = if c.missing().is_empty() {
        let (a, r) = predictor(c.lags())?;
        let coeffs = pseudo_poly_from_predictor(&a, &r)?;
        ArModel { coeffs, predictor: a, innovation: r }
    } else {
        let thetas: Vec<T> = (0..grid_size).map(|k| grid_theta(grid_size, k)).collect();
        let avail = c.available();
        let targets: Vec<CMat<T>> = avail.iter().map(|&k| c.lags()[k].clone()).collect();
        let dual = TrigDual::new(m, thetas, None, &avail, &targets)?;
        let q0 = HermMat::new(c.lags()[0].clone())?.inverse_pd()?;
        let x0 = dual.constant_point(q0.as_matrix());
        let out = minimize(&dual, x0, tol, max_iter)?;
        if !out.converged && out.residual > tol.sqrt() {
            return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(out.residual) });
        }
        let mut coeffs = dual.coefficients(&out.x);
        coeffs.resize(n, CMat::zeros(m, m));
        let phi = SpectrumGrid::new(m, dual.spectrum(&out.x).ok_or_else(|| Error::DualDiverged("iterate left the domain".into()))?)?;
        let lags: Vec<CMat<T>> = (0..n as i64).map(|k| phi.fourier_coeff(k)).collect::<Result<_>>()?;
        let (a, r) = predictor(&lags)?;
        ArModel { coeffs, predictor: a, innovation: r }
    };
    let q = SpectrumGrid::from_pseudo_poly(&model.coeffs, grid_size)?;
    let a0 = HermMat::new(model.coeffs[0].clone())?.norm();
    let min_eig = q.min_eigenvalue();
    if !(min_eig > lit::<T>(1e-10) * a0) {
        return Err(Error::NonCoercive { min_eig: to_f64(min_eig) });
    }
    let phi = q.inverse()?;
    Ok((model, phi))
}

/// Kolmogorov entropy rate `(m/2) log(2πe) + (1/4π) ∫ log det Φ`.
pub fn entropy_rate<T: Real>(phi: &SpectrumGrid<T>) -> Result<T> {
    let m = lit::<T>(phi.block_dim() as f64);
    let half = lit::<T>(0.5);
    Ok(half * m * lit::<T>(2.0 * PI * std::f64::consts::E).ln() + half * phi.mean_log_det()?)
}

/// Szegö-Kolmogorov one-step prediction error `det R = exp((1/2π) ∫ log det Φ)`.
pub fn szego_check<T: Real>(phi: &SpectrumGrid<T>) -> Result<T> {
    Ok(phi.mean_log_det()?.exp())
}
