//! Hermitian matrix algebra and the orthogonality certificate.
//!
//! Every maximum-entropy problem in this crate is posed over an affine set
//! `W = offset + V`. A feasible point is a critical point of a smooth entropy
//! functional exactly when the functional's gradient there is orthogonal to
//! `V`. [`orthogonality_residual`] measures how far a gradient is from `V^⊥`
//! and is the check every solver output is put through.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{cplx, creal, lit, to_f64, Cplx, Real};

/// Dense complex matrix.
pub type CMat<T> = DMatrix<Cplx<T>>;

/// Cutoff used by the Gram-matrix pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Relative pivot threshold for the positive-definiteness test.
pub const PD_PIVOT: f64 = 1e-12;

/// Dense `n x n` Hermitian matrix.
///
/// Construction symmetrizes the input as `(M + M*)/2`, so the stored entries
/// satisfy `a[i][j] == conj(a[j][i])` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMat<T: Real> {
    m: CMat<T>,
}

impl<T: Real> HermMat<T> {
    pub fn new(m: CMat<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self { m: hermitian_part(&m) })
    }

    /// Embeds a real matrix (symmetrized).
    pub fn from_real(m: &DMatrix<T>) -> Result<Self> {
        Self::new(m.map(creal))
    }

    /// Builds from row-major real `f64` rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMat::<T>::zeros(n, n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch(format!("row {i} has length {}, expected {n}", r.len())));
            }
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = creal(lit(*v));
            }
        }
        Self::new(m)
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMat::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: CMat::zeros(n, n) }
    }

    pub fn diag(d: &[T]) -> Self {
        let n = d.len();
        let mut m = CMat::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = creal(*v);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMat<T> {
        &self.m
    }

    pub fn into_matrix(self) -> CMat<T> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Cplx<T> {
        self.m[(i, j)]
    }

    /// Real part of every entry.
    pub fn real(&self) -> DMatrix<T> {
        self.m.map(|z| z.re)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.m.norm()
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| acc + self.m[(i, i)].re)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { m: self.m.map(|z| z * s) }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        let mut ev: Vec<T> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        min_eigenvalue(&self.m)
    }

    /// Cholesky positive-definiteness test with pivot threshold
    /// `1e-12 * trace / n`.
    pub fn is_positive_definite(&self) -> bool {
        pd_cholesky(&self.m).is_some()
    }

    pub fn require_pd(&self, what: &str) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite(format!(
                "{what} (smallest eigenvalue {:e})",
                to_f64(self.min_eigenvalue())
            )))
        }
    }

    /// `log det` of a positive definite matrix.
    pub fn log_det_pd(&self) -> Result<T> {
        let ch = pd_cholesky(&self.m)
            .ok_or_else(|| Error::NotPositiveDefinite("log det requires a positive definite matrix".into()))?;
        Ok(chol_log_det(&ch))
    }

    /// Inverse of a nonsingular Hermitian matrix.
    pub fn inverse(&self) -> Result<Self> {
        check_nonsingular(&self.m)?;
        let inv = self
            .m
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { ratio: 0.0 })?;
        Ok(Self { m: hermitian_part(&inv) })
    }

    /// Inverse via Cholesky; fails unless positive definite.
    pub fn inverse_pd(&self) -> Result<Self> {
        let ch = pd_cholesky(&self.m)
            .ok_or_else(|| Error::NotPositiveDefinite("inverse requires a positive definite matrix".into()))?;
        Ok(Self { m: hermitian_part(&ch.inverse()) })
    }

    /// Congruence `X self X*`.
    pub fn congruence(&self, x: &CMat<T>) -> Self {
        Self { m: hermitian_part(&(x * &self.m * x.adjoint())) }
    }

    /// Coordinates in the orthonormal real basis of Hermitian matrices.
    pub fn coords(&self) -> DVector<T> {
        herm_coords(&self.m)
    }

    pub fn from_coords(n: usize, c: &DVector<T>) -> Self {
        Self { m: herm_from_coords(n, c) }
    }
}

impl<T: Real> Add for &HermMat<T> {
    type Output = HermMat<T>;
    fn add(self, rhs: &HermMat<T>) -> HermMat<T> {
        HermMat { m: &self.m + &rhs.m }
    }
}

impl<T: Real> Sub for &HermMat<T> {
    type Output = HermMat<T>;
    fn sub(self, rhs: &HermMat<T>) -> HermMat<T> {
        HermMat { m: &self.m - &rhs.m }
    }
}

impl<T: Real> Mul<T> for &HermMat<T> {
    type Output = HermMat<T>;
    fn mul(self, rhs: T) -> HermMat<T> {
        self.scale(rhs)
    }
}

/// `(M + M*)/2`.
pub fn hermitian_part<T: Real>(m: &CMat<T>) -> CMat<T> {
    let half = lit::<T>(0.5);
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = creal(m[(i, i)].re);
        for j in (i + 1)..n {
            let a = (m[(i, j)] + m[(j, i)].conj()) * half;
            out[(i, j)] = a;
            out[(j, i)] = a.conj();
        }
    }
    out
}

/// Cholesky factor if `m` passes the positive-definiteness test.
pub fn pd_cholesky<T: Real>(m: &CMat<T>) -> Option<Cholesky<Cplx<T>, Dyn>> {
    let n = m.nrows();
    let tr = (0..n).fold(T::zero(), |a, i| a + m[(i, i)].re);
    if !(tr > T::zero()) {
        return None;
    }
    let thr = lit::<T>(PD_PIVOT) * tr / lit(n as f64);
    let ch = Cholesky::new(m.clone())?;
    let l = ch.l_dirty();
    for i in 0..n {
        let p = l[(i, i)].re;
        if !(p * p > thr) || !p.is_finite() {
            return None;
        }
    }
    Some(ch)
}

pub fn chol_log_det<T: Real>(ch: &Cholesky<Cplx<T>, Dyn>) -> T {
    let l = ch.l_dirty();
    let two = lit::<T>(2.0);
    (0..l.nrows()).fold(T::zero(), |a, i| a + two * l[(i, i)].re.ln())
}

pub fn min_eigenvalue<T: Real>(m: &CMat<T>) -> T {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap_or_else(|| lit(f64::MAX)), |a, b| if b < a { b } else { a })
}

fn check_nonsingular<T: Real>(m: &CMat<T>) -> Result<()> {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
    let min = sv.iter().copied().fold(max, |a, b| if b < a { b } else { a });
    if !(max > T::zero()) || min <= lit::<T>(1e-12) * max {
        let ratio = if max > T::zero() { to_f64(min / max) } else { 0.0 };
        return Err(Error::Singular { ratio });
    }
    Ok(())
}

/// Coordinates `(x_ii, sqrt2 Re x_ij, sqrt2 Im x_ij)` of a Hermitian matrix in
/// an orthonormal basis of the real space of `n x n` Hermitian matrices.
pub fn herm_coords<T: Real>(m: &CMat<T>) -> DVector<T> {
    let n = m.nrows();
    let s2 = lit::<T>(2.0).sqrt();
    let mut c = DVector::zeros(n * n);
    let mut k = 0;
    for i in 0..n {
        c[k] = m[(i, i)].re;
        k += 1;
    }
    let half = lit::<T>(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (m[(i, j)] + m[(j, i)].conj()) * half;
            c[k] = s2 * a.re;
            c[k + 1] = s2 * a.im;
            k += 2;
        }
    }
    c
}

pub fn herm_from_coords<T: Real>(n: usize, c: &DVector<T>) -> CMat<T> {
    assert_eq!(c.len(), n * n, "coordinate vector length");
    let r2 = T::one() / lit::<T>(2.0).sqrt();
    let mut m = CMat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = creal(c[k]);
        k += 1;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let z = cplx(c[k] * r2, c[k + 1] * r2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// `<M1, M2> = tr(M1* M2)`, real for Hermitian arguments.
pub fn trace_inner<T: Real>(m1: &HermMat<T>, m2: &HermMat<T>) -> Result<T> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch(format!("trace_inner: {} vs {}", m1.dim(), m2.dim())));
    }
    Ok(cmat_inner(m1.as_matrix(), m2.as_matrix()))
}

/// `Re tr(A* B)` for arbitrary equally sized complex matrices.
pub fn cmat_inner<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
}

/// Gradient of `log|det M|`, i.e. `M^{-*}` (equal to `M^{-1}` for Hermitian `M`).
pub fn logdet_grad<T: Real>(m: &HermMat<T>) -> Result<HermMat<T>> {
    m.inverse()
}

/// Explicit basis of a subspace `V` of Hermitian matrices.
#[derive(Clone, Debug)]
pub struct SubspaceBasis<T: Real> {
    ambient_dim: usize,
    elements: Vec<HermMat<T>>,
}

impl<T: Real> SubspaceBasis<T> {
    /// Validates dimensions and linear independence (relative rank
    /// tolerance `1e-10`).
    pub fn new(ambient_dim: usize, elements: Vec<HermMat<T>>) -> Result<Self> {
        if let Some(bad) = elements.iter().find(|e| e.dim() != ambient_dim) {
            return Err(Error::DimensionMismatch(format!(
                "basis element is {}x{}, ambient dimension {ambient_dim}",
                bad.dim(),
                bad.dim()
            )));
        }
        let b = Self { ambient_dim, elements };
        if !b.elements.is_empty() {
            let sv = b.coords_matrix().singular_values();
            let max = sv.iter().copied().fold(T::zero(), |a, x| if x > a { x } else { a });
            let rank = sv.iter().filter(|&&x| x > lit::<T>(1e-10) * max).count();
            if rank < b.elements.len() {
                return Err(Error::InvalidInput(format!(
                    "basis elements are linearly dependent (rank {rank} < {})",
                    b.elements.len()
                )));
            }
        }
        Ok(b)
    }

    /// The trivial subspace `{0}`.
    pub fn empty(ambient_dim: usize) -> Self {
        Self { ambient_dim, elements: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn elements(&self) -> &[HermMat<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `n^2 x k` matrix whose columns are the element coordinates.
    pub fn coords_matrix(&self) -> DMatrix<T> {
        let n2 = self.ambient_dim * self.ambient_dim;
        let mut b = DMatrix::zeros(n2, self.elements.len());
        for (k, e) in self.elements.iter().enumerate() {
            b.set_column(k, &e.coords());
        }
        b
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, d: &HermMat<T>) -> Result<HermMat<T>> {
        if d.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, subspace ambient dimension {}",
                d.dim(),
                d.dim(),
                self.ambient_dim
            )));
        }
        if self.elements.is_empty() {
            return Ok(HermMat::zeros(self.ambient_dim));
        }
        let b = self.coords_matrix();
        let p = project_onto_columns(&b, &d.coords());
        Ok(HermMat::from_coords(self.ambient_dim, &p))
    }

    /// Basis of the orthogonal complement `V^⊥` in the real space of
    /// Hermitian matrices.
    pub fn complement(&self) -> SubspaceBasis<T> {
        let n = self.ambient_dim;
        let cols = complement_columns(&self.coords_matrix(), n * n);
        let elements = cols
            .column_iter()
            .map(|c| HermMat::from_coords(n, &c.into_owned()))
            .collect();
        SubspaceBasis { ambient_dim: n, elements }
    }
}

/// Affine set `offset + span(basis)`.
#[derive(Clone, Debug)]
pub struct AffineProblem<T: Real> {
    pub offset: HermMat<T>,
    pub basis: SubspaceBasis<T>,
}

impl<T: Real> AffineProblem<T> {
    pub fn new(offset: HermMat<T>, basis: SubspaceBasis<T>) -> Result<Self> {
        if offset.dim() != basis.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "offset is {}x{}, basis ambient dimension {}",
                offset.dim(),
                offset.dim(),
                basis.ambient_dim()
            )));
        }
        Ok(Self { offset, basis })
    }

    pub fn dim(&self) -> usize {
        self.offset.dim()
    }

    /// Relative distance of `m` from the affine set.
    pub fn membership_residual(&self, m: &HermMat<T>) -> Result<T> {
        let diff = m - &self.offset;
        let p = self.basis.project(&diff)?;
        let scale = if m.norm() > T::zero() { m.norm() } else { T::one() };
        Ok((&diff - &p).norm() / scale)
    }
}

/// Norm of the orthogonal projection of `d` onto `span(v)`, divided by the
/// norm of `d`; zero certifies `d ∈ V^⊥`. Returns 0 for `d = 0`.
pub fn orthogonality_residual<T: Real>(d: &HermMat<T>, v: &SubspaceBasis<T>) -> Result<T> {
    let p = v.project(d)?;
    let nd = d.norm();
    if nd == T::zero() {
        return Ok(T::zero());
    }
    Ok(p.norm() / nd)
}

/// Least-squares projection of `x` onto the column span of `b` using the
/// Gram-matrix pseudo-inverse with relative cutoff [`PINV_CUTOFF`].
pub fn project_onto_columns<T: Real>(b: &DMatrix<T>, x: &DVector<T>) -> DVector<T> {
    if b.ncols() == 0 {
        return DVector::zeros(x.len());
    }
    let gram = b.transpose() * b;
    let rhs = b.transpose() * x;
    let c = pinv_solve_sym(&gram, &rhs, lit(PINV_CUTOFF));
    b * c
}

/// Solves the symmetric system `g c = r` through the eigen-decomposition of
/// `g`, dropping eigenvalues below `cutoff * max`.
pub fn pinv_solve_sym<T: Real>(g: &DMatrix<T>, r: &DVector<T>, cutoff: T) -> DVector<T> {
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().copied().fold(T::zero(), |a, x| if x.abs() > a { x.abs() } else { a });
    let mut out = DVector::zeros(r.len());
    if max == T::zero() {
        return out;
    }
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > cutoff * max {
            let u = eig.eigenvectors.column(i);
            let coef = u.dot(r) / lam;
            out += u * coef;
        }
    }
    out
}

/// Orthonormal columns spanning the complement of `span(b)` in `R^dim`.
pub fn complement_columns<T: Real>(b: &DMatrix<T>, dim: usize) -> DMatrix<T> {
    let mut p = DMatrix::<T>::identity(dim, dim);
    if b.ncols() > 0 {
        for j in 0..dim {
            let e = DVector::from_fn(dim, |i, _| if i == j { T::one() } else { T::zero() });
            let pe = project_onto_columns(b, &e);
            for i in 0..dim {
                p[(i, j)] -= pe[i];
            }
        }
    }
    let p = (&p + p.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(p);
    let half = lit::<T>(0.5);
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > half).collect();
    let mut out = DMatrix::zeros(dim, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(rows: &[&[f64]]) -> HermMat<f64> {
        HermMat::from_rows(rows).unwrap()
    }

    #[test]
    fn construction_symmetrizes() {
        let mut m = CMat::<f64>::zeros(2, 2);
        m[(0, 1)] = cplx(1.0, 2.0);
        m[(1, 0)] = cplx(3.0, 0.0);
        let a = HermMat::new(m).unwrap();
        assert_eq!(a.get(0, 1), a.get(1, 0).conj());
        assert_eq!(a.get(0, 1), cplx(2.0, 1.0));
    }

    #[test]
    fn rejects_non_square_and_empty() {
        assert!(HermMat::<f64>::new(CMat::zeros(2, 3)).is_err());
        assert!(HermMat::<f64>::new(CMat::zeros(0, 0)).is_err());
    }

    #[test]
    fn trace_inner_trivial_cases() {
        assert_eq!(trace_inner(&HermMat::<f64>::identity(2), &HermMat::identity(2)).unwrap(), 2.0);
        let a = HermMat::diag(&[1.0, 2.0]);
        let b = HermMat::diag(&[3.0, 4.0]);
        assert_eq!(trace_inner(&a, &b).unwrap(), 11.0);
        assert!(trace_inner(&a, &HermMat::identity(3)).is_err());
    }

    #[test]
    fn logdet_grad_diagonal() {
        assert_eq!(logdet_grad(&HermMat::<f64>::identity(3)).unwrap(), HermMat::identity(3));
        let g = logdet_grad(&HermMat::diag(&[2.0, 4.0])).unwrap();
        assert_relative_eq!(g.get(0, 0).re, 0.5);
        assert_relative_eq!(g.get(1, 1).re, 0.25);
        assert!(matches!(
            logdet_grad(&h(&[&[1.0, 1.0], &[1.0, 1.0]])),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn orthogonality_residual_examples() {
        // diagonal identity against the hollow symmetric matrices
        let hollow = SubspaceBasis::new(2, vec![h(&[&[0.0, 1.0], &[1.0, 0.0]])]).unwrap();
        assert_eq!(orthogonality_residual(&HermMat::identity(2), &hollow).unwrap(), 0.0);

        let d = h(&[&[0.0, 3.0], &[3.0, 0.0]]);
        assert_relative_eq!(orthogonality_residual(&d, &hollow).unwrap(), 1.0, epsilon = 1e-14);

        let e11 = h(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let v = SubspaceBasis::new(2, vec![HermMat::identity(2)]).unwrap();
        // <d,b> b / |b|^2 = I/2, norm 1/sqrt2, |d| = 1
        assert_relative_eq!(
            orthogonality_residual(&e11, &v).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-14
        );

        assert_eq!(orthogonality_residual(&HermMat::zeros(2), &v).unwrap(), 0.0);
    }

    #[test]
    fn dependent_basis_rejected() {
        let a = h(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(SubspaceBasis::new(2, vec![a.clone(), a.scale(2.0)]).is_err());
    }

    #[test]
    fn complement_dimension_and_orthogonality() {
        let v = SubspaceBasis::new(3, vec![h(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]])]).unwrap();
        let c = v.complement();
        assert_eq!(c.len(), 8);
        for e in c.elements() {
            assert!(trace_inner(e, &v.elements()[0]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn coords_roundtrip_and_isometry() {
        let mut m = CMat::<f64>::zeros(3, 3);
        m[(0, 0)] = creal(1.0);
        m[(0, 2)] = cplx(0.5, -0.25);
        m[(2, 0)] = cplx(0.5, 0.25);
        m[(1, 1)] = creal(-2.0);
        let a = HermMat::new(m).unwrap();
        let c = a.coords();
        assert_relative_eq!(c.norm(), a.norm(), epsilon = 1e-14);
        assert_eq!(HermMat::from_coords(3, &c), a);
    }

    #[test]
    fn pd_test_and_logdet() {
        let a = h(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!(a.is_positive_definite());
        assert_relative_eq!(a.log_det_pd().unwrap(), 3f64.ln(), epsilon = 1e-14);
        assert!(!h(&[&[1.0, 2.0], &[2.0, 1.0]]).is_positive_definite());
    }

    #[test]
    fn affine_membership() {
        let v = SubspaceBasis::new(2, vec![h(&[&[0.0, 1.0], &[1.0, 0.0]])]).unwrap();
        let w = AffineProblem::new(HermMat::identity(2), v).unwrap();
        assert!(w.membership_residual(&h(&[&[1.0, 0.3], &[0.3, 1.0]])).unwrap() < 1e-15);
        assert!(w.membership_residual(&h(&[&[1.1, 0.3], &[0.3, 1.0]])).unwrap() > 1e-3);
    }
}
