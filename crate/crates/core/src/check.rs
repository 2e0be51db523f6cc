//! Solver-independent optimality certificates.
//!
//! A candidate `w_c` of an entropy problem over `W = h + V` is a critical
//! point exactly when the entropy gradient at `w_c` annihilates `V`. Each
//! function here recomputes that gradient from the candidate alone and reports
//! the normalized size of its component along `V`, together with the
//! constraint residual. Spectral candidates are measured in the sup norm over
//! the grid after an `L²` projection, so a change at a single frequency is
//! visible.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bridge::BridgeProblem;
use crate::burg::CovSequence;
use crate::circulant::{BlockCirculant, ReciprocalSpec};
use crate::dempster::{gaussian_entropy, PartialCov};
use crate::error::{Error, Result};
use crate::gibbs::FeatureProblem;
use crate::linalg::{orthogonality_residual, pinv_solve_sym, trace_inner, HermMat};
use crate::moment::{range_residual, FilterBank, GammaOp};
use crate::prior::{MatrixPriorProblem, SpectralPriorProblem};
use crate::scalar::{cis, creal, lit, to_f64, Real};
use crate::spectrum::SpectrumGrid;

/// Residuals of a candidate solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub constraint_residual: f64,
    pub orthogonality_residual: f64,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Certificate {
    fn build<T: Real>(constraint: T, orthogonality: T, objective: T, iterations: usize, tol: T) -> Self {
        Self {
            constraint_residual: to_f64(constraint),
            orthogonality_residual: to_f64(orthogonality),
            objective_value: to_f64(objective),
            iterations,
            converged: constraint <= tol && orthogonality <= tol,
        }
    }

    fn failed(iterations: usize) -> Self {
        Self {
            constraint_residual: f64::INFINITY,
            orthogonality_residual: f64::INFINITY,
            objective_value: f64::NAN,
            iterations,
            converged: false,
        }
    }

    /// Largest of the two residuals.
    pub fn worst(&self) -> f64 {
        self.constraint_residual.max(self.orthogonality_residual)
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }
}

/// Non-positive-definite candidates fail the certificate outright.
fn pd_or_fail<T: Real>(m: &HermMat<T>) -> Option<HermMat<T>> {
    m.is_positive_definite().then(|| m.inverse_pd().ok()).flatten()
}

/// `sup |d - P d| / sup |d|` with `P` the grid `L²` projection onto `V^⊥`.
fn spectral_residual<T: Real>(d: &SpectrumGrid<T>, projected: &SpectrumGrid<T>) -> Result<T> {
    spectral_residual_scaled(d, projected, d.sup_norm())
}

/// Same as [`spectral_residual`] with an explicit scale; used when the
/// gradient is a difference that vanishes at a feasible prior.
fn spectral_residual_scaled<T: Real>(d: &SpectrumGrid<T>, projected: &SpectrumGrid<T>, scale: T) -> Result<T> {
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok(d.sub(projected)?.sup_norm() / scale)
}

/// `|P_V d| / |reference|` for a difference gradient `d`.
fn difference_residual<T: Real>(d: &HermMat<T>, v: &crate::linalg::SubspaceBasis<T>, reference: &HermMat<T>) -> Result<T> {
    Ok(orthogonality_residual(d, v)? * d.norm() / reference.norm())
}

/// Covariance completion: `Σ^{-1}` must vanish on the unspecified entries.
pub fn check_dempster<T: Real>(p: &PartialCov<T>, sigma: &HermMat<T>, tol: T) -> Result<Certificate> {
    if sigma.dim() != p.dim() {
        return Err(Error::DimensionMismatch("candidate and pattern sizes differ".into()));
    }
    let Some(inv) = pd_or_fail(sigma) else { return Ok(Certificate::failed(0)) };
    let orth = orthogonality_residual(&inv, &p.pattern().free_basis())?;
    let cons = p.constraint_residual(sigma)?;
    Ok(Certificate::build(cons, orth, gaussian_entropy(sigma)?, 0, tol))
}

/// Covariance extension: `Φ^{-1}` must be a pseudo-polynomial supported on the
/// available lags.
pub fn check_burg<T: Real>(c: &CovSequence<T>, phi: &SpectrumGrid<T>, tol: T) -> Result<Certificate> {
    if phi.block_dim() != c.block_dim() {
        return Err(Error::DimensionMismatch("spectrum and lag sizes differ".into()));
    }
    if phi.min_eigenvalue() <= T::zero() {
        return Ok(Certificate::failed(0));
    }
    let inv = phi.inverse()?;
    let avail = c.available();
    let coeffs: Vec<_> = avail.iter().map(|&k| inv.fourier_coeff(k as i64)).collect::<Result<_>>()?;
    let proj = inv.map(|i, _| {
        let th = inv.theta(i);
        let mut q = nalgebra::DMatrix::zeros(c.block_dim(), c.block_dim());
        for (&k, ck) in avail.iter().zip(&coeffs) {
            if k == 0 {
                q += ck;
            } else {
                let w = cis(-th * lit(k as f64));
                q += ck * w + ck.adjoint() * w.conj();
            }
        }
        q
    })?;
    let orth = spectral_residual(&inv, &proj)?;
    let scale = HermMat::new(c.lags()[0].clone())?.norm();
    let mut cons = T::zero();
    for &k in &avail {
        let e = (phi.fourier_coeff(k as i64)? - &c.lags()[k]).norm() / scale;
        cons = cons.max(e);
    }
    Ok(Certificate::build(cons, orth, phi.mean_log_det()?, 0, tol))
}

/// Generalized moment problem: `Φ^{-1} ∈ Range Γ*`.
pub fn check_moment<T: Real>(fb: &FilterBank<T>, sigma: &HermMat<T>, phi: &SpectrumGrid<T>, tol: T) -> Result<Certificate> {
    if phi.min_eigenvalue() <= T::zero() {
        return Ok(Certificate::failed(0));
    }
    let op = GammaOp::new(fb, phi.grid_size());
    let inv = phi.inverse()?;
    let orth = spectral_residual(&inv, &op.project_range_adjoint(&inv)?)?;
    let cons = (&op.apply(phi)? - sigma).norm() / sigma.norm();
    Ok(Certificate::build(cons, orth, phi.mean_log_det()?, 0, tol))
}

/// Matrix problem with prior: `M^{-1} - N^{-1} ∈ V^⊥`.
pub fn check_matrix_prior<T: Real>(p: &MatrixPriorProblem<T>, m: &HermMat<T>, tol: T) -> Result<Certificate> {
    let Some(inv) = pd_or_fail(m) else { return Ok(Certificate::failed(0)) };
    let d = &inv - &p.prior.inverse_pd()?;
    let orth = difference_residual(&d, &p.constraint.basis, &inv)?;
    let cons = p.constraint.membership_residual(m)?;
    Ok(Certificate::build(cons, orth, p.divergence(m)?, 0, tol))
}

/// Structured covariance approximation: `Σ_c ∈ Range Γ` and
/// `Σ_c^{-1} - Σ̂^{-1}` orthogonal to `Range Γ`.
pub fn check_cov_approx<T: Real>(fb: &FilterBank<T>, sigma_hat: &HermMat<T>, sigma_c: &HermMat<T>, tol: T) -> Result<Certificate> {
    let Some(inv) = pd_or_fail(sigma_c) else { return Ok(Certificate::failed(0)) };
    let d = &inv - &sigma_hat.inverse_pd()?;
    let orth = difference_residual(&d, &fb.range_basis(), &inv)?;
    let cons = range_residual(fb, sigma_c)?;
    let obj = sigma_hat.log_det_pd()? - sigma_c.log_det_pd()? + trace_inner(&sigma_hat.inverse_pd()?, sigma_c)?;
    Ok(Certificate::build(cons, orth, obj, 0, tol))
}

/// Itakura-Saito approximation: `Φ^{-1} - Ψ^{-1} ∈ Range Γ*`.
pub fn check_is<T: Real>(p: &SpectralPriorProblem<T>, phi: &SpectrumGrid<T>, tol: T) -> Result<Certificate> {
    if phi.min_eigenvalue() <= T::zero() {
        return Ok(Certificate::failed(0));
    }
    let op = GammaOp::new(&p.fb, phi.grid_size());
    let inv = phi.inverse()?;
    let d = inv.sub(&p.prior.inverse()?)?;
    let orth = spectral_residual_scaled(&d, &op.project_range_adjoint(&d)?, inv.sup_norm())?;
    let cons = (&op.apply(phi)? - &p.sigma).norm() / p.sigma.norm();
    let obj = crate::prior::itakura_saito_rate(&p.prior, phi)?;
    Ok(Certificate::build(cons, orth, obj, 0, tol))
}

/// Kullback-Leibler approximation: `Ψ/Φ ∈ Range Γ*`.
pub fn check_kl<T: Real>(p: &SpectralPriorProblem<T>, phi: &SpectrumGrid<T>, tol: T) -> Result<Certificate> {
    if phi.block_dim() != 1 {
        return Err(Error::NotScalar(phi.block_dim()));
    }
    if phi.min_eigenvalue() <= T::zero() {
        return Ok(Certificate::failed(0));
    }
    let op = GammaOp::new(&p.fb, phi.grid_size());
    let ratio = phi.map(|k, v| p.prior.value(k) * creal(T::one() / v[(0, 0)].re))?;
    let orth = spectral_residual(&ratio, &op.project_range_adjoint(&ratio)?)?;
    let cons = (&op.apply(phi)? - &p.sigma).norm() / p.sigma.norm();
    let psi = p.prior.scalar_values()?;
    let ph = phi.scalar_values()?;
    let g = psi.len();
    let obj = crate::sum::pairwise(g, &T::zero(), &|k| psi[k] * (psi[k] / ph[k]).ln()) / lit(g as f64);
    Ok(Certificate::build(cons, orth, obj, 0, tol))
}

/// Block-circulant completion: `Σ_c^{-1} (- Σ_p^{-1})` banded at the
/// reciprocal order.
pub fn check_circulant<T: Real>(
    spec: &ReciprocalSpec<T>,
    prior: Option<&BlockCirculant<T>>,
    sigma: &BlockCirculant<T>,
    tol: T,
) -> Result<Certificate> {
    if sigma.circle_len() != spec.circle_len() || sigma.block_dim() != spec.block_dim() {
        return Err(Error::DimensionMismatch("candidate does not match the specification".into()));
    }
    if !sigma.is_positive_definite() {
        return Ok(Certificate::failed(0));
    }
    let inv = sigma.inverse()?;
    let mut row: Vec<_> = inv.first_block_row().to_vec();
    if let Some(p) = prior {
        for (r, q) in row.iter_mut().zip(p.inverse()?.first_block_row()) {
            *r -= q;
        }
    }
    let n = spec.order();
    let nc = row.len();
    let total = row.iter().fold(T::zero(), |s, b| s + b.norm_squared());
    let off = (n + 1..nc - n).fold(T::zero(), |s, d| s + row[d].norm_squared());
    let orth = if total == T::zero() { T::zero() } else { (off / total).sqrt() };
    let cons = spec.constraint_residual(sigma);
    Ok(Certificate::build(cons, orth, sigma.log_det()?, 0, tol))
}

/// Shannon problem: `-1 + log p ∈ span{1, rows of L}` in the μ inner product.
pub fn check_gibbs<T: Real>(fp: &FeatureProblem<T>, p: &[T], tol: T) -> Result<Certificate> {
    if p.len() != fp.support_size() {
        return Err(Error::DimensionMismatch("candidate and support sizes differ".into()));
    }
    let mu = fp.base();
    let mass = p.iter().zip(mu).fold(T::zero(), |s, (a, b)| s + *a * *b);
    let moments = fp.features() * DVector::from_iterator(p.len(), p.iter().zip(mu).map(|(a, b)| *a * *b));
    let cons = (moments - fp.target()).norm().max((mass - T::one()).abs());
    if p.iter().any(|v| !(*v > T::zero())) {
        return Ok(Certificate::failed(0));
    }
    let (d, k) = fp.features().shape();
    let sq: Vec<T> = mu.iter().map(|m| m.sqrt()).collect();
    let a = DMatrix::from_fn(k, d + 1, |r, c| if c == 0 { sq[r] } else { fp.features()[(c - 1, r)] * sq[r] });
    let y = DVector::from_fn(k, |r, _| (p[r].ln() - T::one()) * sq[r]);
    let coef = a.clone().svd(true, true).solve(&y, lit(1e-13)).map_err(|e| Error::InvalidInput(e.into()))?;
    let orth = (a * coef - &y).norm() / y.norm();
    let obj = p.iter().zip(mu).fold(T::zero(), |s, (v, m)| s - *v * v.ln() * *m);
    Ok(Certificate::build(cons, orth, obj, 0, tol))
}

/// Schrödinger bridge: `log(q/P)` additively separable and marginals matched.
pub fn check_bridge<T: Real>(bp: &BridgeProblem<T>, q: &DMatrix<T>, tol: T) -> Result<Certificate> {
    let k = bp.kernel().nrows();
    if q.shape() != (k, k) {
        return Err(Error::DimensionMismatch("joint law and kernel sizes differ".into()));
    }
    let rows = DVector::from_iterator(k, q.row_iter().map(|r| r.sum()));
    let cols = DVector::from_iterator(k, q.column_iter().map(|c| c.sum()));
    let cons = (rows - bp.rho0()).lp_norm(1).max((cols - bp.rho1()).lp_norm(1));
    if q.iter().any(|v| *v < T::zero()) {
        return Ok(Certificate::failed(0));
    }
    // least-squares fit of log(q/P) by f(x) + g(y) on the support of q, via
    // the 2K x 2K normal equations
    let mut gram = DMatrix::<T>::zeros(2 * k, 2 * k);
    let mut rhs = DVector::<T>::zeros(2 * k);
    let mut support = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if q[(i, j)] > T::zero() {
                let v = (q[(i, j)] / bp.kernel()[(i, j)]).ln();
                gram[(i, i)] += T::one();
                gram[(k + j, k + j)] += T::one();
                gram[(i, k + j)] += T::one();
                gram[(k + j, i)] += T::one();
                rhs[i] += v;
                rhs[k + j] += v;
                support.push((i, j, v));
            }
        }
    }
    let coef = pinv_solve_sym(&gram, &rhs, lit(1e-12));
    let (mut res2, mut y2) = (T::zero(), T::zero());
    for &(i, j, v) in &support {
        let e = coef[i] + coef[k + j] - v;
        res2 += e * e;
        y2 += v * v;
    }
    let (res, ynorm) = (res2.sqrt(), y2.sqrt());
    let orth = if ynorm == T::zero() { res } else { res / ynorm.max(T::one()) };
    let obj = crate::bridge::relative_entropy(q, bp.kernel());
    Ok(Certificate::build(cons, orth, obj, 0, tol))
}
