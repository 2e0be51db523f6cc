//! Entropy problems with a prior.
//!
//! Matrix case: minimize `log det N - log det M + tr(N^{-1} M)` over the
//! positive definite points of an affine set `W`. Spectral case: minimize the
//! Itakura-Saito or Kullback-Leibler divergence from a prior spectrum subject
//! to the moment constraint `Γ(Φ) = Σ`.

use nalgebra::{DMatrix, DVector};

use crate::dual::{minimize, MatrixLogDet, Objective};
use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, cmat_inner, hermitian_part, pd_cholesky, trace_inner, AffineProblem, CMat, HermMat};
use crate::moment::{range_residual, FilterBank, GammaOp, RANGE_TOL};
use crate::scalar::{creal, lit, to_f64, Cplx, Real};
use crate::spectrum::SpectrumGrid;
use crate::sum::pairwise;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

fn inner_tol<T: Real>(tol: T) -> T {
    tol.min(lit(1e-12))
}

/// Prior `N ≻ 0` and affine constraint set `W = offset + V`.
#[derive(Clone, Debug)]
pub struct MatrixPriorProblem<T: Real> {
    pub prior: HermMat<T>,
    pub constraint: AffineProblem<T>,
}

impl<T: Real> MatrixPriorProblem<T> {
    pub fn new(prior: HermMat<T>, constraint: AffineProblem<T>) -> Result<Self> {
        if prior.dim() != constraint.dim() {
            return Err(Error::DimensionMismatch("prior and constraint sizes differ".into()));
        }
        prior.require_pd("prior N")?;
        Ok(Self { prior, constraint })
    }

    /// `log det N - log det M + tr(N^{-1} M)`.
    pub fn divergence(&self, m: &HermMat<T>) -> Result<T> {
        let ninv = self.prior.inverse_pd()?;
        Ok(self.prior.log_det_pd()? - m.log_det_pd()? + trace_inner(&ninv, m)?)
    }
}

/// Solution of a matrix problem.
#[derive(Clone, Debug)]
pub struct MatrixSolution<T: Real> {
    pub m: HermMat<T>,
    pub iterations: usize,
    pub constraint_residual: T,
}

/// Minimizes the prior divergence over `W`; at the optimum
/// `M_c^{-1} - N^{-1} ∈ V^⊥`.
pub fn matrix_prior_solve<T: Real>(p: &MatrixPriorProblem<T>, tol: T, max_iter: usize) -> Result<MatrixSolution<T>> {
    check_tol(tol)?;
    let w = &p.constraint;
    let perp = w.basis.complement();
    let basis: Vec<CMat<T>> = perp.elements().iter().map(|e| e.as_matrix().clone()).collect();
    let b = DVector::from_iterator(
        basis.len(),
        perp.elements().iter().map(|u| trace_inner(u, &w.offset).expect("same dimension")),
    );
    let ninv = p.prior.inverse_pd()?;
    let scale = w.offset.norm().max(p.prior.norm());
    let obj = MatrixLogDet { base: ninv.as_matrix().clone(), basis, b, scale };
    let x0 = DVector::zeros(obj.basis.len());
    let out = match minimize(&obj, x0, inner_tol(tol), max_iter) {
        Ok(o) => o,
        Err(Error::DualDiverged(msg)) => return Err(Error::Infeasible(format!("no positive definite point in W ({msg})"))),
        Err(e) => return Err(e),
    };
    let m = HermMat::new(obj.assemble(&out.x))?.inverse_pd()?;
    let residual = w.membership_residual(&m)?;
    if residual > tol {
        return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(residual) });
    }
    Ok(MatrixSolution { m, iterations: out.iterations, constraint_residual: residual })
}

/// Structured covariance approximation and its multiplier.
#[derive(Clone, Debug)]
pub struct CovApprox<T: Real> {
    pub sigma: HermMat<T>,
    /// `Λ` with `Σ_c^{-1} = Σ̂^{-1} + Δ*((I-Π_B) Λ (I-Π_B))`, `Δ*(X) = X - A* X A`.
    pub lambda: HermMat<T>,
    /// Relative residual of that decomposition.
    pub lambda_fit_residual: T,
    pub iterations: usize,
    pub range_residual: T,
}

/// Closest point of `Range Γ` to `Σ̂` in the prior divergence.
pub fn cov_approx<T: Real>(fb: &FilterBank<T>, sigma_hat: &HermMat<T>, tol: T, max_iter: usize) -> Result<CovApprox<T>> {
    check_tol(tol)?;
    let n = fb.state_dim();
    if sigma_hat.dim() != n {
        return Err(Error::DimensionMismatch(format!("Σ̂ is {}x{}, state dimension {n}", sigma_hat.dim(), sigma_hat.dim())));
    }
    sigma_hat.require_pd("Σ̂")?;
    let q = fb.null_b_adjoint();
    let k = q.ncols();
    // coordinates E_i of Hermitian k x k matrices, U_i = Δ*(Q E_i Q*)
    let inner: Vec<CMat<T>> = (0..k * k)
        .map(|i| {
            let mut c = DVector::zeros(k * k);
            c[i] = T::one();
            HermMat::from_coords(k, &c).into_matrix()
        })
        .collect();
    let lifted: Vec<CMat<T>> = inner.iter().map(|e| &q * e * q.adjoint()).collect();
    let basis: Vec<CMat<T>> = lifted.iter().map(|x| hermitian_part(&fb.stein_adjoint(x))).collect();
    let shat_inv = sigma_hat.inverse_pd()?;
    let obj = MatrixLogDet { base: shat_inv.as_matrix().clone(), basis, b: DVector::zeros(k * k), scale: sigma_hat.norm() };
    let out = minimize(&obj, DVector::zeros(k * k), inner_tol(tol), max_iter)?;
    let kmat = HermMat::new(obj.assemble(&out.x))?;
    let sigma = kmat.inverse_pd()?;
    let rr = range_residual(fb, &sigma)?;
    if rr > tol {
        return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(rr) });
    }
    let mut lam = CMat::zeros(n, n);
    for (x, l) in out.x.iter().zip(&lifted) {
        lam += l * creal(*x);
    }
    let lambda = HermMat::new(lam)?;
    let p = CMat::identity(n, n) - fb.range_projector();
    let pl = &p * lambda.as_matrix() * &p;
    let recon = shat_inv.as_matrix() + fb.stein_adjoint(&pl);
    let fit = (kmat.as_matrix() - recon).norm() / kmat.norm();
    Ok(CovApprox { sigma, lambda, lambda_fit_residual: fit, iterations: out.iterations, range_residual: rr })
}

/// Sample state covariance of `x_{k+1} = A x_k + B y_k` from `x_0 = 0`,
/// dropping the first `burn_in` states.
pub fn sample_covariance<T: Real>(fb: &FilterBank<T>, y: &[DVector<Cplx<T>>], burn_in: usize) -> Result<HermMat<T>> {
    let n = fb.state_dim();
    let m = fb.input_dim();
    if y.len() <= burn_in + n {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for burn-in {burn_in} and state dimension {n}",
            y.len()
        )));
    }
    if let Some((i, _)) = y.iter().enumerate().find(|(_, v)| v.len() != m) {
        return Err(Error::DimensionMismatch(format!("sample {i} does not have {m} components")));
    }
    let mut x = DVector::<Cplx<T>>::zeros(n);
    let mut acc = CMat::<T>::zeros(n, n);
    let mut count = 0usize;
    for (k, yk) in y.iter().enumerate() {
        x = fb.a() * &x + fb.b() * yk;
        if k >= burn_in {
            acc += &x * x.adjoint();
            count += 1;
        }
    }
    HermMat::new(acc / creal(lit::<T>(count as f64)))
}

/// Default burn-in `10 n`.
pub fn default_burn_in<T: Real>(fb: &FilterBank<T>) -> usize {
    10 * fb.state_dim()
}

/// Prior spectrum, filter bank and target state covariance.
#[derive(Clone, Debug)]
pub struct SpectralPriorProblem<T: Real> {
    pub prior: SpectrumGrid<T>,
    pub fb: FilterBank<T>,
    pub sigma: HermMat<T>,
}

impl<T: Real> SpectralPriorProblem<T> {
    pub fn new(prior: SpectrumGrid<T>, fb: FilterBank<T>, sigma: HermMat<T>) -> Result<Self> {
        if prior.block_dim() != fb.input_dim() || sigma.dim() != fb.state_dim() {
            return Err(Error::DimensionMismatch("prior, filter bank and Σ sizes disagree".into()));
        }
        prior.require_coercive()?;
        sigma.require_pd("Σ")?;
        let r = range_residual(&fb, &sigma)?;
        if r > lit(RANGE_TOL) {
            return Err(Error::NotInRange { residual: to_f64(r) });
        }
        Ok(Self { prior, fb, sigma })
    }
}

/// Spectral solution with its multiplier `Λ_c ∈ Range Γ`.
#[derive(Clone, Debug)]
pub struct SpectralSolution<T: Real> {
    pub phi: SpectrumGrid<T>,
    pub lambda: HermMat<T>,
    pub iterations: usize,
    /// `|Γ(Φ_c) - Σ| / |Σ|`.
    pub moment_residual: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Divergence {
    ItakuraSaito,
    KullbackLeibler,
}

/// Dual over `Λ = Σ x_i R_i` with `R_i` an orthonormal basis of `Range Γ`.
struct SpectralDual<T: Real> {
    kind: Divergence,
    m: usize,
    psi: Vec<CMat<T>>,
    psi_inv: Vec<CMat<T>>,
    /// `h[k][i] = G_k* R_i G_k`.
    h: Vec<Vec<CMat<T>>>,
    b: DVector<T>,
    scale: T,
}

impl<T: Real> SpectralDual<T> {
    fn build(kind: Divergence, p: &SpectralPriorProblem<T>, op: &GammaOp<T>, basis: &[HermMat<T>]) -> Result<Self> {
        let g = op.grid_size();
        let h = (0..g)
            .map(|k| basis.iter().map(|r| op.adjoint_at(r.as_matrix(), k)).collect())
            .collect();
        let b = DVector::from_iterator(basis.len(), basis.iter().map(|r| trace_inner(r, &p.sigma).expect("same dimension")));
        let psi_inv = match kind {
            Divergence::ItakuraSaito => p.prior.inverse()?.values().to_vec(),
            Divergence::KullbackLeibler => Vec::new(),
        };
        Ok(Self {
            kind,
            m: p.prior.block_dim(),
            psi: p.prior.values().to_vec(),
            psi_inv,
            h,
            b,
            scale: p.sigma.norm(),
        })
    }

    fn q_at(&self, x: &DVector<T>, k: usize) -> CMat<T> {
        let mut q = match self.kind {
            Divergence::ItakuraSaito => self.psi_inv[k].clone(),
            Divergence::KullbackLeibler => CMat::zeros(self.m, self.m),
        };
        for (hi, &xi) in self.h[k].iter().zip(x.iter()) {
            q += hi * creal(xi);
        }
        hermitian_part(&q)
    }

    /// Per-point value contribution, or `None` outside the domain.
    fn point_value(&self, x: &DVector<T>, k: usize) -> Option<T> {
        let q = self.q_at(x, k);
        match self.kind {
            Divergence::ItakuraSaito => pd_cholesky(&q).map(|ch| -chol_log_det(&ch)),
            Divergence::KullbackLeibler => {
                let qv = q[(0, 0)].re;
                (qv > T::zero()).then(|| -self.psi[k][(0, 0)].re * qv.ln())
            }
        }
    }

    fn spectrum(&self, x: &DVector<T>) -> Result<Vec<CMat<T>>> {
        (0..self.h.len())
            .map(|k| {
                let q = self.q_at(x, k);
                match self.kind {
                    Divergence::ItakuraSaito => pd_cholesky(&q)
                        .map(|ch| hermitian_part(&ch.inverse()))
                        .ok_or_else(|| Error::DualDiverged("iterate left the dual domain".into())),
                    Divergence::KullbackLeibler => {
                        let qv = q[(0, 0)].re;
                        if qv > T::zero() {
                            Ok(CMat::from_element(1, 1, creal(self.psi[k][(0, 0)].re / qv)))
                        } else {
                            Err(Error::DualDiverged("G* Λ G not positive on the grid".into()))
                        }
                    }
                }
            })
            .collect()
    }

    fn lambda(&self, x: &DVector<T>, basis: &[HermMat<T>]) -> HermMat<T> {
        let n = basis[0].dim();
        let mut l = CMat::zeros(n, n);
        for (r, &xi) in basis.iter().zip(x.iter()) {
            l += r.as_matrix() * creal(xi);
        }
        HermMat::new(l).expect("finite multiplier")
    }
}

impl<T: Real> Objective<T> for SpectralDual<T> {
    fn value(&self, x: &DVector<T>) -> Option<T> {
        let g = self.h.len();
        let vals: Option<Vec<T>> = (0..g).map(|k| self.point_value(x, k)).collect();
        let vals = vals?;
        let v = pairwise(g, &T::zero(), &|k| vals[k]) / lit(g as f64) + x.dot(&self.b);
        v.is_finite().then_some(v)
    }

    fn derivs(&self, x: &DVector<T>) -> Option<(T, DVector<T>, DMatrix<T>)> {
        let g = self.h.len();
        let p = self.b.len();
        let len = 1 + p + p * p;
        let mut parts: Vec<DVector<T>> = Vec::with_capacity(g);
        for k in 0..g {
            let mut v = DVector::zeros(len);
            let q = self.q_at(x, k);
            match self.kind {
                Divergence::ItakuraSaito => {
                    let ch = pd_cholesky(&q)?;
                    v[0] = -chol_log_det(&ch);
                    let phi = hermitian_part(&ch.inverse());
                    let xs: Vec<CMat<T>> = self.h[k].iter().map(|hi| &phi * hi).collect();
                    for i in 0..p {
                        v[1 + i] = (0..self.m).fold(T::zero(), |s, d| s + xs[i][(d, d)].re);
                        for j in i..p {
                            let t = cmat_inner(&xs[i].adjoint(), &xs[j]);
                            v[1 + p + i * p + j] = t;
                            v[1 + p + j * p + i] = t;
                        }
                    }
                }
                Divergence::KullbackLeibler => {
                    let qv = q[(0, 0)].re;
                    if !(qv > T::zero()) {
                        return None;
                    }
                    let psi = self.psi[k][(0, 0)].re;
                    v[0] = -psi * qv.ln();
                    let hs: Vec<T> = self.h[k].iter().map(|hi| hi[(0, 0)].re).collect();
                    let r1 = psi / qv;
                    let r2 = r1 / qv;
                    for i in 0..p {
                        v[1 + i] = r1 * hs[i];
                        for j in i..p {
                            let t = r2 * hs[i] * hs[j];
                            v[1 + p + i * p + j] = t;
                            v[1 + p + j * p + i] = t;
                        }
                    }
                }
            }
            parts.push(v);
        }
        let s = pairwise(g, &DVector::zeros(len), &|k| parts[k].clone()) / lit::<T>(g as f64);
        let value = s[0] + x.dot(&self.b);
        let grad = DVector::from_iterator(p, (0..p).map(|i| self.b[i] - s[1 + i]));
        let hess = DMatrix::from_fn(p, p, |i, j| s[1 + p + i * p + j]);
        Some((value, grad, hess))
    }

    fn residual_scale(&self) -> T {
        self.scale
    }
}

fn spectral_solve<T: Real>(
    kind: Divergence,
    p: &SpectralPriorProblem<T>,
    x0: Option<HermMat<T>>,
    tol: T,
    max_iter: usize,
) -> Result<SpectralSolution<T>> {
    check_tol(tol)?;
    let op = GammaOp::new(&p.fb, p.prior.grid_size());
    let basis = p.fb.range_basis().elements().to_vec();
    let dual = SpectralDual::build(kind, p, &op, &basis)?;
    let start = match x0 {
        Some(l) => DVector::from_iterator(basis.len(), basis.iter().map(|r| trace_inner(r, &l).expect("same dimension"))),
        None => DVector::zeros(basis.len()),
    };
    let out = minimize(&dual, start, inner_tol(tol), max_iter)?;
    let phi = SpectrumGrid::new(p.prior.block_dim(), dual.spectrum(&out.x)?)?;
    let lambda = dual.lambda(&out.x, &basis);
    let residual = (&op.apply(&phi)? - &p.sigma).norm() / p.sigma.norm();
    if residual > tol {
        return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(residual) });
    }
    Ok(SpectralSolution { phi, lambda, iterations: out.iterations, moment_residual: residual })
}

/// Itakura-Saito approximation: `Φ_c = (Ψ^{-1} + G* Λ_c G)^{-1}`.
pub fn is_spectral_solve<T: Real>(p: &SpectralPriorProblem<T>, tol: T, max_iter: usize) -> Result<SpectralSolution<T>> {
    spectral_solve(Divergence::ItakuraSaito, p, None, tol, max_iter)
}

/// Scalar Kullback-Leibler approximation: `Φ_c = Ψ / (G* Λ_c G)`.
pub fn kl_spectral_solve<T: Real>(p: &SpectralPriorProblem<T>, tol: T, max_iter: usize) -> Result<SpectralSolution<T>> {
    if p.prior.block_dim() != 1 {
        return Err(Error::NotScalar(p.prior.block_dim()));
    }
    let start = crate::moment::georgiou_lambda(&p.fb, &p.sigma)?;
    spectral_solve(Divergence::KullbackLeibler, p, Some(start), tol, max_iter)
}

/// Pinsker relative entropy rate
/// `(1/4π) ∫ log det(Φ_y^{-1} Φ_z) + tr(Φ_z^{-1}(Φ_y - Φ_z)) dϑ`.
pub fn itakura_saito_rate<T: Real>(phi_y: &SpectrumGrid<T>, phi_z: &SpectrumGrid<T>) -> Result<T> {
    if phi_y.block_dim() != phi_z.block_dim() || phi_y.grid_size() != phi_z.grid_size() {
        return Err(Error::DimensionMismatch("spectra differ in size".into()));
    }
    let ly = phi_y.mean_log_det()?;
    let lz = phi_z.mean_log_det()?;
    let zinv = phi_z.inverse()?;
    let m = phi_y.block_dim();
    let g = phi_y.grid_size();
    let tr = pairwise(g, &T::zero(), &|k| {
        let d = zinv.value(k) * phi_y.value(k);
        (0..m).fold(T::zero(), |s, i| s + d[(i, i)].re)
    }) / lit(g as f64);
    Ok(lit::<T>(0.5) * (lz - ly + tr - lit(m as f64)))
}

fn check_tol<T: Real>(tol: T) -> Result<()> {
    if tol > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput("tolerance must be positive".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dempster::{complete, PartialCov};
    use crate::linalg::SubspaceBasis;
    use crate::moment::{gamma_apply, maxent_spectrum};
    use approx::assert_relative_eq;

    fn bank_with_zero_pole() -> FilterBank<f64> {
        let a = CMat::from_diagonal(&DVector::from_vec(vec![creal(0.0), creal(0.5), creal(-0.3)]));
        FilterBank::new(a, CMat::from_element(3, 1, creal(1.0))).unwrap()
    }

    fn smooth_prior(g: usize) -> SpectrumGrid<f64> {
        SpectrumGrid::scalar_fn(g, |t: f64| 1.0 + 0.5 * t.cos() + 0.2 * (2.0 * t).sin()).unwrap()
    }

    #[test]
    fn prior_in_w_is_fixed() {
        let n = HermMat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]).unwrap();
        let v = SubspaceBasis::new(2, vec![HermMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()]).unwrap();
        let w = AffineProblem::new(HermMat::diag(&[2.0, 1.0]), v).unwrap();
        let p = MatrixPriorProblem::new(n.clone(), w).unwrap();
        let s = matrix_prior_solve(&p, 1e-10, 100).unwrap();
        assert!((&s.m - &n).norm() < 1e-10);
    }

    #[test]
    fn singleton_w() {
        let a0 = HermMat::from_rows(&[&[1.5, 0.2], &[0.2, 0.7]]).unwrap();
        let w = AffineProblem::new(a0.clone(), SubspaceBasis::empty(2)).unwrap();
        let p = MatrixPriorProblem::new(HermMat::identity(2), w).unwrap();
        let s = matrix_prior_solve(&p, 1e-10, 100).unwrap();
        assert!((&s.m - &a0).norm() < 1e-10);
    }

    #[test]
    fn identity_prior_on_dempster_pattern() {
        let pc = PartialCov::new(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (0, 1, 0.5), (1, 2, 0.5)]).unwrap();
        let dem = complete(&pc, 1e-10, 200).unwrap();
        let w = AffineProblem::new(pc.zero_filled(), pc.pattern().free_basis()).unwrap();
        let p = MatrixPriorProblem::new(HermMat::identity(3), w).unwrap();
        let s = matrix_prior_solve(&p, 1e-10, 200).unwrap();
        assert!((&s.m - &dem.sigma).norm() < 1e-9);
    }

    #[test]
    fn cov_approx_fixed_points() {
        let fb = bank_with_zero_pole();
        let s = gamma_apply(&fb, &smooth_prior(1024)).unwrap();
        let c = cov_approx(&fb, &s, 1e-10, 100).unwrap();
        assert!((&c.sigma - &s).norm() < 1e-9 * s.norm());
        let full = FilterBank::new(CMat::<f64>::zeros(2, 2), CMat::identity(2, 2)).unwrap();
        let sh = HermMat::from_rows(&[&[2.0, 0.4], &[0.4, 1.0]]).unwrap();
        let c = cov_approx(&full, &sh, 1e-10, 100).unwrap();
        assert!((&c.sigma - &sh).norm() < 1e-12);
    }

    #[test]
    fn cov_approx_projects_into_range() {
        let fb = bank_with_zero_pole();
        let sh = HermMat::from_rows(&[&[2.0, 0.4, 0.1], &[0.4, 1.5, 0.2], &[0.1, 0.2, 1.0]]).unwrap();
        let c = cov_approx(&fb, &sh, 1e-10, 100).unwrap();
        assert!(c.range_residual < 1e-10);
        assert!(c.lambda_fit_residual < 1e-10);
        assert!(c.sigma.is_positive_definite());
    }

    #[test]
    fn sample_covariance_examples() {
        let fb = FilterBank::new(CMat::from_element(1, 1, creal(0.0)), CMat::from_element(1, 1, creal(1.0))).unwrap();
        let zero: Vec<DVector<Cplx<f64>>> = vec![DVector::zeros(1); 50];
        assert_eq!(sample_covariance(&fb, &zero, 10).unwrap().norm(), 0.0);
        let y: Vec<DVector<Cplx<f64>>> = (0..20).map(|i| DVector::from_element(1, creal(i as f64))).collect();
        let s = sample_covariance(&fb, &y, 5).unwrap();
        let want = (5..20).map(|i| (i * i) as f64).sum::<f64>() / 15.0;
        assert_relative_eq!(s.get(0, 0).re, want, epsilon = 1e-12);
        assert!(sample_covariance(&fb, &y[..3], 5).is_err());
    }

    #[test]
    fn is_feasible_prior_returns_prior() {
        let fb = bank_with_zero_pole();
        let psi = smooth_prior(1024);
        let s = gamma_apply(&fb, &psi).unwrap();
        let p = SpectralPriorProblem::new(psi.clone(), fb, s).unwrap();
        let sol = is_spectral_solve(&p, 1e-10, 100).unwrap();
        assert!(sol.lambda.norm() < 1e-10);
        assert!(sol.phi.sub(&psi).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn is_flat_prior_matches_maxent() {
        let fb = bank_with_zero_pole();
        let s = gamma_apply(&fb, &smooth_prior(2048)).unwrap();
        let flat = SpectrumGrid::scalar_fn(2048, |_| 2.0).unwrap();
        let p = SpectralPriorProblem::new(flat, fb.clone(), s.clone()).unwrap();
        let sol = is_spectral_solve(&p, 1e-10, 100).unwrap();
        let (me, _) = maxent_spectrum(&fb, &s, 2048).unwrap();
        assert!(sol.phi.sub(&me).unwrap().sup_norm() < 1e-7);
    }

    #[test]
    fn kl_examples() {
        let fb = bank_with_zero_pole();
        let psi = smooth_prior(1024);
        let s = gamma_apply(&fb, &psi).unwrap();
        let p = SpectralPriorProblem::new(psi.clone(), fb.clone(), s.clone()).unwrap();
        let sol = kl_spectral_solve(&p, 1e-10, 100).unwrap();
        assert!(sol.phi.sub(&psi).unwrap().sup_norm() < 1e-9);
        let one = SpectrumGrid::scalar_fn(1024, |_| 1.0).unwrap();
        let p = SpectralPriorProblem::new(one, fb.clone(), s.clone()).unwrap();
        let sol = kl_spectral_solve(&p, 1e-10, 100).unwrap();
        let (me, _) = maxent_spectrum(&fb, &s, 1024).unwrap();
        assert!(sol.phi.sub(&me).unwrap().sup_norm() < 1e-7);
        let two = SpectrumGrid::constant(&HermMat::identity(2), 1024).unwrap();
        let fb2 = FilterBank::new(CMat::zeros(2, 2), CMat::identity(2, 2)).unwrap();
        let p = SpectralPriorProblem::new(two, fb2, HermMat::identity(2)).unwrap();
        assert!(matches!(kl_spectral_solve(&p, 1e-8, 10), Err(Error::NotScalar(2))));
    }

    #[test]
    fn itakura_saito_examples() {
        let a = SpectrumGrid::scalar_fn(64, |_| 2.0).unwrap();
        let b = SpectrumGrid::scalar_fn(64, |_| 3.0).unwrap();
        assert!(itakura_saito_rate::<f64>(&a, &a).unwrap().abs() < 1e-15);
        let want = 0.5 * ((3.0f64 / 2.0).ln() + 2.0 / 3.0 - 1.0);
        assert_relative_eq!(itakura_saito_rate(&a, &b).unwrap(), want, epsilon = 1e-14);
    }
}
