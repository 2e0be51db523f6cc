//! Matrix spectral densities sampled on a uniform grid over `[-pi, pi)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, cmat_inner, hermitian_part, min_eigenvalue, pd_cholesky, CMat, HermMat};
use crate::scalar::{cis, creal, lit, to_f64, Cplx, Real};
use crate::sum::pairwise;

/// Default number of grid points.
pub const DEFAULT_GRID: usize = 4096;

/// Grid angle `-pi + 2 pi k / g`.
pub fn grid_theta<T: Real>(g: usize, k: usize) -> T {
    lit::<T>(-PI + 2.0 * PI * (k as f64) / (g as f64))
}

/// Hermitian `m x m` matrix function sampled at `theta_k = -pi + 2 pi k / G`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid<T: Real> {
    m: usize,
    values: Vec<CMat<T>>,
}

impl<T: Real> SpectrumGrid<T> {
    /// Builds a grid from samples; every sample is symmetrized.
    pub fn new(m: usize, values: Vec<CMat<T>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("block dimension must be at least 1".into()));
        }
        let g = values.len();
        if g < 2 || !g.is_power_of_two() {
            return Err(Error::InvalidInput(format!("grid size must be a power of two >= 2, got {g}")));
        }
        for (k, v) in values.iter().enumerate() {
            if v.nrows() != m || v.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "grid value {k} is {}x{}, expected {m}x{m}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidInput(format!("grid value {k} is not finite")));
            }
        }
        let values = values.iter().map(hermitian_part).collect();
        Ok(Self { m, values })
    }

    pub fn from_fn<F: Fn(T) -> CMat<T>>(m: usize, g: usize, f: F) -> Result<Self> {
        let values = (0..g).map(|k| f(grid_theta(g, k))).collect();
        Self::new(m, values)
    }

    /// Scalar grid from a real function.
    pub fn scalar_fn<F: Fn(T) -> T>(g: usize, f: F) -> Result<Self> {
        Self::from_fn(1, g, |t| CMat::from_element(1, 1, creal(f(t))))
    }

    pub fn constant(c: &HermMat<T>, g: usize) -> Result<Self> {
        Self::new(c.dim(), vec![c.as_matrix().clone(); g])
    }

    /// Evaluates the pseudo-polynomial `sum_{|k|<n} A_k e^{-j theta k}` with
    /// `A_{-k} = A_k*`, given `A_0..A_{n-1}`.
    pub fn from_pseudo_poly(coeffs: &[CMat<T>], g: usize) -> Result<Self> {
        let m = coeffs.first().map(|c| c.nrows()).ok_or_else(|| Error::InvalidInput("empty coefficient list".into()))?;
        Self::from_fn(m, g, |t| eval_pseudo_poly(coeffs, t))
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[CMat<T>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &CMat<T> {
        &self.values[k]
    }

    pub fn theta(&self, k: usize) -> T {
        grid_theta(self.grid_size(), k)
    }

    /// Uniform average `(1/G) sum_k values[k]`, i.e. `(1/2pi) int Phi`.
    pub fn quadrature(&self) -> HermMat<T> {
        let g = self.grid_size();
        let s = pairwise(g, &CMat::zeros(self.m, self.m), &|k| self.values[k].clone());
        HermMat::new(s / creal(lit::<T>(g as f64))).expect("quadrature of Hermitian samples")
    }

    /// Fourier coefficient `C_k = (1/G) sum_t values[t] e^{j theta_t k}`.
    pub fn fourier_coeff(&self, k: i64) -> Result<CMat<T>> {
        let g = self.grid_size();
        if k.unsigned_abs() as usize >= g / 2 {
            return Err(Error::InvalidInput(format!("|k| = {} must be below G/2 = {}", k.abs(), g / 2)));
        }
        let kk = lit::<T>(k as f64);
        let s = pairwise(g, &CMat::zeros(self.m, self.m), &|t| {
            &self.values[t] * cis(self.theta(t) * kk)
        });
        Ok(s / creal(lit::<T>(g as f64)))
    }

    /// Smallest eigenvalue over all grid points.
    pub fn min_eigenvalue(&self) -> T {
        self.values
            .iter()
            .map(min_eigenvalue)
            .fold(T::max_value().unwrap_or_else(|| lit(f64::MAX)), |a, b| if b < a { b } else { a })
    }

    /// Certifies coercivity (every sample positive definite) and returns the
    /// smallest eigenvalue.
    pub fn require_coercive(&self) -> Result<T> {
        let ok = self.values.iter().all(|v| pd_cholesky(v).is_some());
        let me = self.min_eigenvalue();
        if ok && me > T::zero() {
            Ok(me)
        } else {
            Err(Error::NonCoercive { min_eig: to_f64(me) })
        }
    }

    /// Pointwise inverse of a coercive grid.
    pub fn inverse(&self) -> Result<Self> {
        let mut out = Vec::with_capacity(self.grid_size());
        for v in &self.values {
            let ch = pd_cholesky(v).ok_or_else(|| Error::NonCoercive { min_eig: to_f64(min_eigenvalue(v)) })?;
            out.push(hermitian_part(&ch.inverse()));
        }
        Ok(Self { m: self.m, values: out })
    }

    /// `(1/G) sum_k log det values[k]` for a coercive grid.
    pub fn mean_log_det(&self) -> Result<T> {
        let mut logs = Vec::with_capacity(self.grid_size());
        for v in &self.values {
            let ch = pd_cholesky(v).ok_or_else(|| Error::NonCoercive { min_eig: to_f64(min_eigenvalue(v)) })?;
            logs.push(chol_log_det(&ch));
        }
        let g = logs.len();
        Ok(pairwise(g, &T::zero(), &|k| logs[k]) / lit(g as f64))
    }

    /// Grid inner product `(1/G) sum_k tr(Phi_k Psi_k)`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        let g = self.grid_size();
        Ok(pairwise(g, &T::zero(), &|k| cmat_inner(&self.values[k], &other.values[k])) / lit(g as f64))
    }

    /// Grid `L2` norm.
    pub fn norm(&self) -> T {
        let g = self.grid_size();
        (pairwise(g, &T::zero(), &|k| self.values[k].norm_squared()) / lit(g as f64)).sqrt()
    }

    /// Largest Frobenius norm over the grid.
    pub fn sup_norm(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn map<F: Fn(usize, &CMat<T>) -> CMat<T>>(&self, f: F) -> Result<Self> {
        Self::new(self.m, self.values.iter().enumerate().map(|(k, v)| f(k, v)).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { m: self.m, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { m: self.m, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, s: T) -> Self {
        Self { m: self.m, values: self.values.iter().map(|v| v * creal(s)).collect() }
    }

    /// Values of a scalar grid as reals.
    pub fn scalar_values(&self) -> Result<Vec<T>> {
        if self.m != 1 {
            return Err(Error::NotScalar(self.m));
        }
        Ok(self.values.iter().map(|v| v[(0, 0)].re).collect())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.m != other.m || self.grid_size() != other.grid_size() {
            return Err(Error::DimensionMismatch(format!(
                "grids differ: {}x{} on {} points vs {}x{} on {} points",
                self.m,
                self.m,
                self.grid_size(),
                other.m,
                other.m,
                other.grid_size()
            )));
        }
        Ok(())
    }
}

/// `sum_{|k|<n} A_k e^{-j theta k}` with `A_{-k} = A_k*`.
pub fn eval_pseudo_poly<T: Real>(coeffs: &[CMat<T>], theta: T) -> CMat<T> {
    let mut q = coeffs[0].clone();
    for (k, a) in coeffs.iter().enumerate().skip(1) {
        let w = cis(-theta * lit(k as f64));
        q += a * w + a.adjoint() * w.conj();
    }
    hermitian_part(&q)
}

/// Embeds a real matrix.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMat<T> {
    m.map(creal)
}

/// `1x1` complex matrix.
pub fn scalar_mat<T: Real>(z: Cplx<T>) -> CMat<T> {
    CMat::from_element(1, 1, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ar1(g: usize, rho: f64, s2: f64) -> SpectrumGrid<f64> {
        SpectrumGrid::scalar_fn(g, |t: f64| s2 / (1.0 - 2.0 * rho * t.cos() + rho * rho)).unwrap()
    }

    #[test]
    fn rejects_bad_grid_sizes() {
        assert!(SpectrumGrid::<f64>::new(1, vec![CMat::identity(1, 1); 3]).is_err());
        assert!(SpectrumGrid::<f64>::new(2, vec![CMat::identity(1, 1); 4]).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let c = HermMat::<f64>::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let g = SpectrumGrid::constant(&c, 16).unwrap();
        assert_relative_eq!((&g.quadrature() - &c).norm(), 0.0, epsilon = 1e-15);

        let cosg = SpectrumGrid::<f64>::from_fn(2, 64, |t| CMat::identity(2, 2) * creal(2.0 * t.cos())).unwrap();
        assert!(cosg.quadrature().norm() < 1e-14);

        let q = SpectrumGrid::scalar_fn(4096, |t: f64| 1.0 / (1.0 - t.cos() + 0.25)).unwrap().quadrature();
        assert_relative_eq!(q.get(0, 0).re, 4.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn fourier_coeff_examples() {
        let c = HermMat::<f64>::from_rows(&[&[2.0]]).unwrap();
        let g = SpectrumGrid::constant(&c, 8).unwrap();
        assert_relative_eq!(g.fourier_coeff(0).unwrap()[(0, 0)].re, 2.0, epsilon = 1e-15);
        assert!(g.fourier_coeff(1).unwrap()[(0, 0)].norm() < 1e-15);
        assert!(g.fourier_coeff(4).is_err());

        let phi = ar1(4096, 0.5, 0.75);
        let c1 = phi.fourier_coeff(1).unwrap()[(0, 0)];
        assert_relative_eq!(c1.re, 0.5, epsilon = 1e-13);
        assert!(c1.im.abs() < 1e-13);
    }

    #[test]
    fn pseudo_poly_coefficients_recovered() {
        let a0 = HermMat::<f64>::from_rows(&[&[3.0, 0.2], &[0.2, 2.0]]).unwrap().into_matrix();
        let mut a1 = CMat::<f64>::zeros(2, 2);
        a1[(0, 1)] = Cplx::new(0.3, -0.1);
        a1[(1, 0)] = Cplx::new(-0.2, 0.05);
        let coeffs = vec![a0.clone(), a1.clone()];
        let g = SpectrumGrid::from_pseudo_poly(&coeffs, 16).unwrap();
        // fourier_coeff(k) picks the e^{-j theta k} coefficient
        assert!((g.fourier_coeff(1).unwrap() - &a1).norm() < 1e-14);
        assert!((g.fourier_coeff(-1).unwrap() - a1.adjoint()).norm() < 1e-14);
        assert!((g.fourier_coeff(0).unwrap() - a0).norm() < 1e-14);
    }

    #[test]
    fn inverse_and_log_det() {
        let phi = ar1(1024, 0.5, 0.75);
        let inv = phi.inverse().unwrap();
        assert_relative_eq!(inv.value(3)[(0, 0)].re * phi.value(3)[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(phi.mean_log_det().unwrap(), 0.75f64.ln(), epsilon = 1e-13);
        let neg = phi.scale(-1.0);
        assert!(matches!(neg.require_coercive(), Err(Error::NonCoercive { .. })));
    }
}
