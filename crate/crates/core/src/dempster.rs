//! Maximum-entropy completion of a partially specified covariance matrix.
//!
//! The completion's inverse vanishes on every unspecified position. It is
//! computed through the dual: minimize `-log det K + <K, S>` over `K ≻ 0`
//! supported on the specified pattern, then return `K^{-1}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;

use crate::dual::{minimize, MatrixLogDet};
use crate::error::{Error, Result};
use crate::linalg::{CMat, HermMat, SubspaceBasis};
use crate::scalar::{creal, lit, to_f64, Real};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Set of specified positions `(i, j)` with `i <= j` (0-based). The diagonal
/// is always specified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    specified: Vec<(usize, usize)>,
}

impl Pattern {
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("pattern dimension must be at least 1".into()));
        }
        let mut specified: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("index ({i}, {j}) outside a {n}x{n} matrix")));
            }
            specified.push((i.min(j), i.max(j)));
        }
        specified.sort_unstable();
        specified.dedup();
        for i in 0..n {
            if specified.binary_search(&(i, i)).is_err() {
                return Err(Error::InvalidInput(format!("diagonal entry ({i}, {i}) must be specified")));
            }
        }
        Ok(Self { n, specified })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn specified(&self) -> &[(usize, usize)] {
        &self.specified
    }

    pub fn is_specified(&self, i: usize, j: usize) -> bool {
        self.specified.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    /// Unspecified off-diagonal positions `(i, j)`, `i < j`.
    pub fn free(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.is_specified(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Basis of `V`: symmetric matrices supported on the unspecified positions.
    pub fn free_basis<T: Real>(&self) -> SubspaceBasis<T> {
        let elements = self.free().into_iter().map(|(i, j)| sym_unit(self.n, i, j)).collect();
        SubspaceBasis::new(self.n, elements).expect("unit matrices are independent")
    }

    /// Basis of the symmetric matrices supported on the specified positions.
    pub fn specified_basis<T: Real>(&self) -> SubspaceBasis<T> {
        let elements = self.specified.iter().map(|&(i, j)| sym_unit(self.n, i, j)).collect();
        SubspaceBasis::new(self.n, elements).expect("unit matrices are independent")
    }
}

/// `E_ii`, or `E_ij + E_ji` for `i != j`.
pub fn sym_unit<T: Real>(n: usize, i: usize, j: usize) -> HermMat<T> {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = creal(T::one());
    m[(j, i)] = creal(T::one());
    HermMat::new(m).expect("finite")
}

/// Covariance with values on a [`Pattern`].
#[derive(Clone, Debug, PartialEq)]
pub struct PartialCov<T: Real> {
    pattern: Pattern,
    values: BTreeMap<(usize, usize), T>,
}

impl<T: Real> PartialCov<T> {
    /// Entries are `(i, j, value)`, 0-based; `(i, j)` and `(j, i)` are the
    /// same position and must agree if both are given.
    pub fn new(n: usize, entries: &[(usize, usize, T)]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for &(i, j, v) in entries {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not finite")));
            }
            let key = (i.min(j), i.max(j));
            if let Some(&old) = values.get(&key) {
                if old != v {
                    return Err(Error::InvalidInput(format!("conflicting values for entry ({i}, {j})")));
                }
            }
            values.insert(key, v);
        }
        let pairs: Vec<_> = values.keys().copied().collect();
        let pattern = Pattern::new(n, &pairs)?;
        for i in 0..n {
            if !(values[&(i, i)] > T::zero()) {
                return Err(Error::InvalidInput(format!("diagonal entry ({i}, {i}) must be positive")));
            }
        }
        for (&(i, j), &v) in &values {
            if i != j && v.abs() > (values[&(i, i)] * values[&(j, j)]).sqrt() {
                return Err(Error::Infeasible(format!(
                    "|sigma_{i}{j}| exceeds sqrt(sigma_{i}{i} sigma_{j}{j})"
                )));
            }
        }
        Ok(Self { pattern, values })
    }

    /// Restricts a full matrix to a pattern.
    pub fn from_matrix(sigma: &HermMat<T>, pattern: &Pattern) -> Result<Self> {
        if sigma.dim() != pattern.dim() {
            return Err(Error::DimensionMismatch("matrix and pattern sizes differ".into()));
        }
        let entries: Vec<_> = pattern.specified().iter().map(|&(i, j)| (i, j, sigma.get(i, j).re)).collect();
        Self::new(pattern.dim(), &entries)
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<T> {
        self.values.get(&(i.min(j), i.max(j))).copied()
    }

    /// Specified values with zeros elsewhere.
    pub fn zero_filled(&self) -> HermMat<T> {
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for (&(i, j), &v) in &self.values {
            m[(i, j)] = creal(v);
            m[(j, i)] = creal(v);
        }
        HermMat::new(m).expect("finite")
    }

    /// `|P(sigma - S)| / |P S|`, with `P` the restriction to specified
    /// positions.
    pub fn constraint_residual(&self, sigma: &HermMat<T>) -> Result<T> {
        if sigma.dim() != self.dim() {
            return Err(Error::DimensionMismatch("matrix and pattern sizes differ".into()));
        }
        let two = lit::<T>(2.0);
        let (mut num, mut den) = (T::zero(), T::zero());
        for (&(i, j), &v) in &self.values {
            let w = if i == j { T::one() } else { two };
            let d = sigma.get(i, j) - creal(v);
            num += w * d.norm_sqr();
            den += w * v * v;
        }
        Ok((num / den).sqrt())
    }
}

/// Result of [`complete`].
#[derive(Clone, Debug)]
pub struct Completion<T: Real> {
    pub sigma: HermMat<T>,
    pub iterations: usize,
    pub constraint_residual: T,
}

/// Maximum-entropy positive-definite completion.
pub fn complete<T: Real>(p: &PartialCov<T>, tol: T, max_iter: usize) -> Result<Completion<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let n = p.dim();
    let pairs = p.pattern().specified();
    let two = lit::<T>(2.0);
    let basis: Vec<CMat<T>> = pairs.iter().map(|&(i, j)| sym_unit::<T>(n, i, j).into_matrix()).collect();
    let b = DVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| {
            let v = p.value(i, j).expect("specified");
            if i == j { v } else { two * v }
        }),
    );
    let x0 = DVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| if i == j { T::one() / p.value(i, i).expect("diagonal") } else { T::zero() }),
    );
    let scale = b.norm();
    let obj = MatrixLogDet { base: CMat::zeros(n, n), basis, b, scale };
    let inner_tol = tol.min(lit(1e-13));
    let out = match minimize(&obj, x0, inner_tol, max_iter) {
        Ok(o) => o,
        Err(Error::DualDiverged(msg)) => {
            return Err(Error::Infeasible(format!("no positive definite completion ({msg})")));
        }
        Err(e) => return Err(e),
    };
    let k = HermMat::new(obj.assemble(&out.x))?;
    let sigma = k.inverse_pd()?;
    let residual = p.constraint_residual(&sigma)?;
    if residual > tol {
        return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(residual) });
    }
    Ok(Completion { sigma, iterations: out.iterations, constraint_residual: residual })
}

/// Differential entropy `½ log det Σ + ½ n (1 + log 2π)` of `N(0, Σ)`.
pub fn gaussian_entropy<T: Real>(sigma: &HermMat<T>) -> Result<T> {
    let ld = sigma.log_det_pd()?;
    let n = lit::<T>(sigma.dim() as f64);
    let half = lit::<T>(0.5);
    Ok(half * ld + half * n * (T::one() + lit::<T>(2.0 * PI).ln()))
}
