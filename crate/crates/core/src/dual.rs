//! Damped Newton on smooth convex dual functionals.
//!
//! Two log-det duals are provided: a dense matrix one used by the covariance
//! problems and a trigonometric one (the inverse spectrum is a banded
//! pseudo-polynomial) shared by the spectral and circulant solvers.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, cmat_inner, hermitian_part, pd_cholesky, pinv_solve_sym, CMat};
use crate::scalar::{cis, cplx, creal, eps, lit, to_f64, Cplx, Real};
use crate::sum::pairwise;

/// Armijo slope parameter.
pub const ARMIJO_SLOPE: f64 = 1e-4;
/// Backtracking shrink factor.
pub const ARMIJO_SHRINK: f64 = 0.5;

/// Convex objective with an open domain. `value` returns `None` outside it.
pub trait Objective<T: Real> {
    fn value(&self, x: &DVector<T>) -> Option<T>;
    /// Value, gradient and Hessian.
    fn derivs(&self, x: &DVector<T>) -> Option<(T, DVector<T>, DMatrix<T>)>;
    /// Normalizer for the gradient norm.
    fn residual_scale(&self) -> T;
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    /// `|grad| / residual_scale` at `x`.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `obj` from `x0` by damped Newton with Armijo backtracking.
///
/// Stops once the relative gradient norm is at most `tol`. A line search that
/// cannot make progress ends the run with `converged = false`; an objective
/// that runs off to `-inf` is reported as [`Error::DualDiverged`].
pub fn minimize<T: Real, O: Objective<T>>(obj: &O, x0: DVector<T>, tol: T, max_iter: usize) -> Result<NewtonOutcome<T>> {
    let scale = {
        let s = obj.residual_scale();
        if s > T::zero() { s } else { T::one() }
    };
    let mut x = x0;
    let (mut f, mut g, mut h) = obj
        .derivs(&x)
        .ok_or_else(|| Error::InvalidInput("starting point outside the dual domain".into()))?;
    let f0 = f;
    let bound = (T::one() + f0.abs()) / tol;
    let mut residual = g.norm() / scale;
    let mut it = 0;
    while it < max_iter {
        if !residual.is_finite() || !f.is_finite() {
            return Err(Error::DualDiverged("non-finite dual objective or gradient".into()));
        }
        if residual <= tol {
            return Ok(NewtonOutcome { x, value: f, residual, iterations: it, converged: true });
        }
        if f < -bound {
            return Err(Error::DualDiverged(format!("dual objective unbounded below ({:e})", to_f64(f))));
        }
        let mut dx = newton_direction(&h, &g);
        let mut slope = g.dot(&dx);
        if !(slope < T::zero()) || dx.iter().any(|v| !v.is_finite()) {
            dx = -g.clone();
            slope = g.dot(&dx);
        }
        let mut t = T::one();
        let shrink = lit::<T>(ARMIJO_SHRINK);
        let c = lit::<T>(ARMIJO_SLOPE);
        let noise = lit::<T>(100.0) * eps::<T>() * (T::one() + f.abs());
        let mut accepted = None;
        while t > lit(1e-18) {
            let xn = &x + &dx * t;
            if let Some(v) = obj.value(&xn) {
                if v <= f + c * t * slope || (t == T::one() && (v - f).abs() <= noise) {
                    accepted = Some(xn);
                    break;
                }
            }
            t *= shrink;
        }
        it += 1;
        let Some(xn) = accepted else {
            log::debug!("line search stalled at residual {:e}", to_f64(residual));
            return Ok(NewtonOutcome { x, value: f, residual, iterations: it, converged: false });
        };
        let (fn_, gn, hn) = obj
            .derivs(&xn)
            .ok_or_else(|| Error::DualDiverged("accepted step left the dual domain".into()))?;
        let rn = gn.norm() / scale;
        if t == T::one() && rn >= residual && fn_ >= f && rn > tol {
            // roundoff floor: a full step that improves nothing
            x = xn;
            f = fn_;
            residual = rn;
            return Ok(NewtonOutcome { x, value: f, residual, iterations: it, converged: residual <= tol });
        }
        x = xn;
        f = fn_;
        g = gn;
        h = hn;
        residual = rn;
    }
    Ok(NewtonOutcome { x, value: f, residual, iterations: it, converged: residual <= tol })
}

fn newton_direction<T: Real>(h: &DMatrix<T>, g: &DVector<T>) -> DVector<T> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        let dx = ch.solve(g);
        if dx.iter().all(|v| v.is_finite()) {
            return -dx;
        }
    }
    -pinv_solve_sym(h, g, lit(1e-14))
}

/// `-log det(C + sum_k x_k U_k) + <x, b>` over Hermitian `U_k`.
pub struct MatrixLogDet<T: Real> {
    pub base: CMat<T>,
    pub basis: Vec<CMat<T>>,
    pub b: DVector<T>,
    pub scale: T,
}

impl<T: Real> MatrixLogDet<T> {
    pub fn assemble(&self, x: &DVector<T>) -> CMat<T> {
        let mut k = self.base.clone();
        for (u, &xi) in self.basis.iter().zip(x.iter()) {
            k += u * creal(xi);
        }
        hermitian_part(&k)
    }
}

impl<T: Real> Objective<T> for MatrixLogDet<T> {
    fn value(&self, x: &DVector<T>) -> Option<T> {
        let ch = pd_cholesky(&self.assemble(x))?;
        Some(-chol_log_det(&ch) + x.dot(&self.b))
    }

    fn derivs(&self, x: &DVector<T>) -> Option<(T, DVector<T>, DMatrix<T>)> {
        let ch = pd_cholesky(&self.assemble(x))?;
        let f = -chol_log_det(&ch) + x.dot(&self.b);
        let minv = hermitian_part(&ch.inverse());
        let mu: Vec<CMat<T>> = self.basis.iter().map(|u| &minv * u).collect();
        let p = self.basis.len();
        let mut g = self.b.clone();
        for k in 0..p {
            g[k] -= trace_re(&mu[k]);
        }
        let mut h = DMatrix::zeros(p, p);
        for k in 0..p {
            for l in k..p {
                let v = trace_prod_re(&mu[k], &mu[l]);
                h[(k, l)] = v;
                h[(l, k)] = v;
            }
        }
        Some((f, g, h))
    }

    fn residual_scale(&self) -> T {
        self.scale
    }
}

fn trace_re<T: Real>(a: &CMat<T>) -> T {
    (0..a.nrows()).fold(T::zero(), |s, i| s + a[(i, i)].re)
}

/// `Re tr(A B)`.
pub fn trace_prod_re<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    let n = a.nrows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)] * b[(j, i)];
            s += z.re;
        }
    }
    s
}

/// One real coordinate of a banded pseudo-polynomial.
///
/// Contributes `x (c E_ab w + conj(c) E_ba conj(w))` with `w = e^{-j theta lag}`
/// and `c = 1` or `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrigParam {
    pub lag: usize,
    pub a: usize,
    pub b: usize,
    pub imag: bool,
}

impl TrigParam {
    fn coef<T: Real>(&self) -> Cplx<T> {
        if self.imag { cplx(T::zero(), T::one()) } else { creal(T::one()) }
    }
}

/// Real coordinates of all `m x m` coefficients at the given lags.
pub fn trig_params(m: usize, lags: &[usize]) -> Vec<TrigParam> {
    let mut out = Vec::new();
    for &lag in lags {
        if lag == 0 {
            for a in 0..m {
                out.push(TrigParam { lag, a, b: a, imag: false });
            }
            for a in 0..m {
                for b in (a + 1)..m {
                    out.push(TrigParam { lag, a, b, imag: false });
                    out.push(TrigParam { lag, a, b, imag: true });
                }
            }
        } else {
            for a in 0..m {
                for b in 0..m {
                    out.push(TrigParam { lag, a, b, imag: false });
                    out.push(TrigParam { lag, a, b, imag: true });
                }
            }
        }
    }
    out
}

/// Dual of the maximum-entropy problem with prescribed Fourier coefficients:
///
/// `J(x) = -mean_theta log det(P(theta) + Q_x(theta)) + <x, b>`
///
/// where `Q_x` is a pseudo-polynomial supported on the active lags and the
/// optional `P` is a fixed Hermitian prior term. At the minimizer
/// `Phi = (P + Q)^{-1}` has the prescribed coefficients on the active lags.
pub struct TrigDual<T: Real> {
    m: usize,
    thetas: Vec<T>,
    prior: Option<Vec<CMat<T>>>,
    params: Vec<TrigParam>,
    b: DVector<T>,
    max_lag: usize,
}

const CHUNK: usize = 16;

impl<T: Real> TrigDual<T> {
    /// `lags[i]` is an active lag and `coeffs[i]` its target coefficient
    /// `C_k = mean Phi e^{j theta k}`.
    pub fn new(
        m: usize,
        thetas: Vec<T>,
        prior: Option<Vec<CMat<T>>>,
        lags: &[usize],
        coeffs: &[CMat<T>],
    ) -> Result<Self> {
        if lags.len() != coeffs.len() {
            return Err(Error::DimensionMismatch("one coefficient per active lag".into()));
        }
        if let Some(p) = &prior {
            if p.len() != thetas.len() {
                return Err(Error::DimensionMismatch("prior must have one value per grid point".into()));
            }
        }
        let params = trig_params(m, lags);
        let b = DVector::from_iterator(
            params.len(),
            params.iter().map(|p| {
                let i = lags.iter().position(|&l| l == p.lag).expect("lag listed");
                let c = coeffs[i][(p.a, p.b)].conj() * p.coef::<T>();
                lit::<T>(2.0) * c.re
            }),
        );
        let max_lag = lags.iter().copied().max().unwrap_or(0);
        Ok(Self { m, thetas, prior, params, b, max_lag })
    }

    pub fn params(&self) -> &[TrigParam] {
        &self.params
    }

    pub fn target(&self) -> &DVector<T> {
        &self.b
    }

    /// Coordinates representing the constant matrix `q0` (lag 0 only).
    pub fn constant_point(&self, q0: &CMat<T>) -> DVector<T> {
        let half = lit::<T>(0.5);
        DVector::from_iterator(
            self.params.len(),
            self.params.iter().map(|p| {
                if p.lag != 0 {
                    T::zero()
                } else if p.a == p.b {
                    q0[(p.a, p.a)].re * half
                } else if p.imag {
                    q0[(p.a, p.b)].im
                } else {
                    q0[(p.a, p.b)].re
                }
            }),
        )
    }

    /// Pseudo-polynomial coefficients `A_0..A_K` of `Q_x`.
    pub fn coefficients(&self, x: &DVector<T>) -> Vec<CMat<T>> {
        let m = self.m;
        let mut a = vec![CMat::zeros(m, m); self.max_lag + 1];
        for (p, &xi) in self.params.iter().zip(x.iter()) {
            let c = p.coef::<T>() * xi;
            a[p.lag][(p.a, p.b)] += c;
            if p.lag == 0 {
                a[0][(p.b, p.a)] += c.conj();
            }
        }
        a
    }

    fn q_at(&self, a: &[CMat<T>], k: usize) -> CMat<T> {
        let theta = self.thetas[k];
        let mut q = match &self.prior {
            Some(p) => &p[k] + &a[0],
            None => a[0].clone(),
        };
        for (lag, al) in a.iter().enumerate().skip(1) {
            let w = cis(-theta * lit(lag as f64));
            q += al * w + al.adjoint() * w.conj();
        }
        hermitian_part(&q)
    }

    /// `(P + Q_x)` on the grid.
    pub fn inverse_spectrum(&self, x: &DVector<T>) -> Vec<CMat<T>> {
        let a = self.coefficients(x);
        (0..self.thetas.len()).map(|k| self.q_at(&a, k)).collect()
    }

    /// `(P + Q_x)^{-1}` on the grid, or `None` outside the domain.
    pub fn spectrum(&self, x: &DVector<T>) -> Option<Vec<CMat<T>>> {
        self.inverse_spectrum(x)
            .iter()
            .map(|q| pd_cholesky(q).map(|ch| hermitian_part(&ch.inverse())))
            .collect()
    }

    fn n_points(&self) -> usize {
        self.thetas.len()
    }
}

impl<T: Real> Objective<T> for TrigDual<T> {
    fn value(&self, x: &DVector<T>) -> Option<T> {
        let a = self.coefficients(x);
        let g = self.n_points();
        let mut logs = Vec::with_capacity(g);
        for k in 0..g {
            let ch = pd_cholesky(&self.q_at(&a, k))?;
            logs.push(chol_log_det(&ch));
        }
        let mean = pairwise(g, &T::zero(), &|k| logs[k]) / lit(g as f64);
        let v = -mean + x.dot(&self.b);
        v.is_finite().then_some(v)
    }

    fn derivs(&self, x: &DVector<T>) -> Option<(T, DVector<T>, DMatrix<T>)> {
        let m = self.m;
        let kmax = self.max_lag as i64;
        let g = self.n_points();
        let a = self.coefficients(x);
        let mut phis = Vec::with_capacity(g);
        let mut logs = Vec::with_capacity(g);
        for k in 0..g {
            let ch = pd_cholesky(&self.q_at(&a, k))?;
            logs.push(chol_log_det(&ch));
            phis.push(hermitian_part(&ch.inverse()));
        }
        let value = -(pairwise(g, &T::zero(), &|k| logs[k]) / lit(g as f64)) + x.dot(&self.b);

        // F_rs(d) = mean Phi_rs e^{-j theta d},  |d| <= K
        // T_ijkl(d) = mean Phi_ij Phi_kl e^{-j theta d},  |d| <= 2K
        let nf = (2 * kmax + 1) as usize;
        let nt = (4 * kmax + 1) as usize;
        let m2 = m * m;
        let len = m2 * nf + m2 * m2 * nt;
        let zero = DVector::<Cplx<T>>::zeros(len);
        let chunks = g.div_ceil(CHUNK);
        let acc = pairwise(chunks, &zero, &|c| {
            let mut v = DVector::<Cplx<T>>::zeros(len);
            let mut w = vec![Cplx::new(T::zero(), T::zero()); nt];
            for k in (c * CHUNK)..((c + 1) * CHUNK).min(g) {
                let th = self.thetas[k];
                for (i, wd) in w.iter_mut().enumerate() {
                    let d = i as i64 - 2 * kmax;
                    *wd = cis(-th * lit(d as f64));
                }
                let phi = &phis[k];
                for r in 0..m {
                    for s in 0..m {
                        let z = phi[(r, s)];
                        let base = (r * m + s) * nf;
                        for i in 0..nf {
                            v[base + i] += z * w[i + kmax as usize];
                        }
                    }
                }
                for i in 0..m {
                    for j in 0..m {
                        for kk in 0..m {
                            for l in 0..m {
                                let z = phi[(i, j)] * phi[(kk, l)];
                                let base = m2 * nf + (((i * m + j) * m + kk) * m + l) * nt;
                                for (t, wd) in w.iter().enumerate() {
                                    v[base + t] += z * *wd;
                                }
                            }
                        }
                    }
                }
            }
            v
        });
        let inv_g = creal(T::one() / lit::<T>(g as f64));
        let acc = acc * inv_g;
        let fidx = |r: usize, s: usize, d: i64| (r * m + s) * nf + (d + kmax) as usize;
        let tidx = |i: usize, j: usize, k: usize, l: usize, d: i64| {
            m2 * nf + (((i * m + j) * m + k) * m + l) * nt + (d + 2 * kmax) as usize
        };

        let np = self.params.len();
        let mut grad = self.b.clone();
        for (pi, p) in self.params.iter().enumerate() {
            let c = p.coef::<T>();
            let t = c * acc[fidx(p.b, p.a, p.lag as i64)];
            grad[pi] -= lit::<T>(2.0) * t.re;
        }
        // half terms (gamma, kappa, r, s): gamma e^{-j theta kappa} E_rs
        let halves = |p: &TrigParam| {
            let c = p.coef::<T>();
            [(c, p.lag as i64, p.a, p.b), (c.conj(), -(p.lag as i64), p.b, p.a)]
        };
        let mut hess = DMatrix::zeros(np, np);
        for pi in 0..np {
            let hp = halves(&self.params[pi]);
            for qi in pi..np {
                let hq = halves(&self.params[qi]);
                let mut s = Cplx::new(T::zero(), T::zero());
                for &(g1, k1, r1, s1) in &hp {
                    for &(g2, k2, r2, s2) in &hq {
                        s += g1 * g2 * acc[tidx(s2, r1, s1, r2, k1 + k2)];
                    }
                }
                hess[(pi, qi)] = s.re;
                hess[(qi, pi)] = s.re;
            }
        }
        Some((value, grad, hess))
    }

    fn residual_scale(&self) -> T {
        self.b.norm()
    }
}

/// `Re <A, B>` summed over two lists of matrices.
pub fn list_inner<T: Real>(a: &[CMat<T>], b: &[CMat<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + cmat_inner(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::grid_theta;

    #[test]
    fn matrix_dual_recovers_inverse() {
        // minimize -logdet(K) + <K, S> over all Hermitian K: K = S^{-1}
        let n = 2;
        let mut basis = Vec::new();
        for i in 0..n {
            let mut e = CMat::<f64>::zeros(n, n);
            e[(i, i)] = creal(1.0);
            basis.push(e);
        }
        let mut e = CMat::<f64>::zeros(n, n);
        e[(0, 1)] = creal(1.0);
        e[(1, 0)] = creal(1.0);
        basis.push(e);
        let s = [[2.0, 0.5], [0.5, 1.0]];
        let b = DVector::from_vec(vec![s[0][0], s[1][1], 2.0 * s[0][1]]);
        let obj = MatrixLogDet { base: CMat::zeros(n, n), basis, b, scale: 1.0 };
        let out = minimize(&obj, DVector::from_vec(vec![0.5, 1.0, 0.0]), 1e-13, 100).unwrap();
        assert!(out.converged);
        let det = 2.0 * 1.0 - 0.25;
        assert!((out.x[0] - 1.0 / det).abs() < 1e-12);
        assert!((out.x[1] - 2.0 / det).abs() < 1e-12);
        assert!((out.x[2] + 0.5 / det).abs() < 1e-12);
    }

    #[test]
    fn trig_dual_matches_ar1() {
        let g = 256;
        let thetas: Vec<f64> = (0..g).map(|k| grid_theta(g, k)).collect();
        let c0 = CMat::from_element(1, 1, creal(1.0));
        let c1 = CMat::from_element(1, 1, creal(0.5));
        let d = TrigDual::new(1, thetas, None, &[0, 1], &[c0.clone(), c1]).unwrap();
        let x0 = d.constant_point(&c0);
        let out = minimize(&d, x0, 1e-13, 100).unwrap();
        assert!(out.converged);
        let a = d.coefficients(&out.x);
        // Phi^{-1} = |1 - 0.5 e^{-j t}|^2 / 0.75
        assert!((a[0][(0, 0)].re - 1.25 / 0.75).abs() < 1e-10);
        assert!((a[1][(0, 0)].re + 0.5 / 0.75).abs() < 1e-10);
    }

    #[test]
    fn trig_hessian_matches_finite_differences() {
        let g = 64;
        let thetas: Vec<f64> = (0..g).map(|k| grid_theta(g, k)).collect();
        let mut c0 = CMat::<f64>::identity(2, 2);
        c0[(0, 1)] = cplx(0.2, 0.1);
        c0[(1, 0)] = cplx(0.2, -0.1);
        let mut c1 = CMat::<f64>::zeros(2, 2);
        c1[(0, 0)] = creal(0.3);
        c1[(1, 0)] = cplx(0.1, 0.05);
        let d = TrigDual::new(2, thetas, None, &[0, 1], &[c0.clone(), c1]).unwrap();
        let mut x = d.constant_point(&hermitian_part(&c0.try_inverse().unwrap()));
        x[5] = 0.05;
        x[8] = -0.03;
        let (_, g0, h) = d.derivs(&x).unwrap();
        let step = 1e-6;
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += step;
            let mut xm = x.clone();
            xm[j] -= step;
            let fd = (d.value(&xp).unwrap() - d.value(&xm).unwrap()) / (2.0 * step);
            assert!((fd - g0[j]).abs() < 1e-7, "grad {j}: {fd} vs {}", g0[j]);
            let (_, gp, _) = d.derivs(&xp).unwrap();
            let (_, gm, _) = d.derivs(&xm).unwrap();
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert!((fd - h[(i, j)]).abs() < 1e-6, "hess {i},{j}: {fd} vs {}", h[(i, j)]);
            }
        }
    }
}
