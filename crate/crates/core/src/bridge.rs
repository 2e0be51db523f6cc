//! Discrete Schrödinger bridge by alternating scaling.
//!
//! Given a positive kernel `P` and marginals `ρ0`, `ρ1`, find `φ̂₀`, `φ₁` with
//! `q_xy = φ̂₀(x) P_xy φ₁(y)` having row sums `ρ0` and column sums `ρ1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Allowed Chapman-Kolmogorov mismatch of intermediate kernels.
pub const CK_TOL: f64 = 1e-4;
const TRUNCATION_WARN: f64 = 1e-8;

fn check_uniform<T: Real>(grid: &[T]) -> Result<T> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    let dx = grid[1] - grid[0];
    if !(dx > T::zero()) {
        return Err(Error::InvalidInput("grid must be increasing".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > lit::<T>(1e-9) * dx {
            return Err(Error::InvalidInput("grid must be uniform".into()));
        }
    }
    Ok(dx)
}

/// Uniform grid of `points` nodes on `[lo, hi]`.
pub fn uniform_grid<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    let h = (hi - lo) / lit((points.max(2) - 1) as f64);
    (0..points).map(|k| lo + h * lit(k as f64)).collect()
}

/// `P_xy = (2πt)^{-1/2} exp(-(x-y)²/2t) Δx`.
pub fn heat_kernel<T: Real>(grid: &[T], t: T) -> Result<DMatrix<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidInput("diffusion time must be positive".into()));
    }
    let dx = check_uniform(grid)?;
    let k = grid.len();
    let c = dx / (lit::<T>(2.0 * std::f64::consts::PI) * t).sqrt();
    let p = DMatrix::from_fn(k, k, |i, j| {
        let d = grid[i] - grid[j];
        c * (-(d * d) / (lit::<T>(2.0) * t)).exp()
    });
    let lost = p.row_iter().fold(T::zero(), |a, r| a.max((T::one() - r.sum()).abs()));
    if lost > lit(TRUNCATION_WARN) {
        log::warn!("heat kernel loses mass {:e} at the grid boundary", to_f64(lost));
    }
    Ok(p)
}

/// Positive kernel and two marginals.
#[derive(Clone, Debug)]
pub struct BridgeProblem<T: Real> {
    kernel: DMatrix<T>,
    rho0: DVector<T>,
    rho1: DVector<T>,
}

impl<T: Real> BridgeProblem<T> {
    pub fn new(kernel: DMatrix<T>, rho0: DVector<T>, rho1: DVector<T>) -> Result<Self> {
        let k = kernel.nrows();
        if kernel.ncols() != k || rho0.len() != k || rho1.len() != k || k == 0 {
            return Err(Error::DimensionMismatch("kernel must be K x K with marginals of length K".into()));
        }
        if kernel.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput("kernel must be strictly positive".into()));
        }
        for (name, r) in [("rho0", &rho0), ("rho1", &rho1)] {
            if r.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has negative or non-finite entries")));
            }
            if (r.sum() - T::one()).abs() > lit(1e-12) {
                return Err(Error::InvalidInput(format!("{name} sums to {} instead of 1", to_f64(r.sum()))));
            }
        }
        Ok(Self { kernel, rho0, rho1 })
    }

    pub fn kernel(&self) -> &DMatrix<T> {
        &self.kernel
    }

    pub fn rho0(&self) -> &DVector<T> {
        &self.rho0
    }

    pub fn rho1(&self) -> &DVector<T> {
        &self.rho1
    }
}

/// Scalings, joint law and residual trace of [`solve_bridge`].
#[derive(Clone, Debug)]
pub struct BridgeSolution<T: Real> {
    /// Normalized to sum one.
    pub phi_hat0: DVector<T>,
    pub phi1: DVector<T>,
    pub joint: DMatrix<T>,
    pub iterations: usize,
    /// L1 column-marginal residual after each iteration.
    pub residuals: Vec<T>,
}

impl<T: Real> BridgeSolution<T> {
    /// `φ₀ = P φ₁`.
    pub fn phi0(&self, p: &DMatrix<T>) -> DVector<T> {
        p * &self.phi1
    }

    /// `φ̂₁ = Pᵀ φ̂₀`.
    pub fn phi_hat1(&self, p: &DMatrix<T>) -> DVector<T> {
        p.tr_mul(&self.phi_hat0)
    }

    /// Largest L1 error of the two boundary couplings `φ₀φ̂₀ = ρ0`, `φ₁φ̂₁ = ρ1`.
    pub fn system_residual(&self, bp: &BridgeProblem<T>) -> T {
        let p = bp.kernel();
        let r0 = (self.phi0(p).component_mul(&self.phi_hat0) - bp.rho0()).lp_norm(1);
        let r1 = (self.phi1.component_mul(&self.phi_hat1(p)) - bp.rho1()).lp_norm(1);
        r0.max(r1)
    }
}

fn scale_div<T: Real>(num: &DVector<T>, den: &DVector<T>) -> DVector<T> {
    num.zip_map(den, |a, b| if a == T::zero() { T::zero() } else { a / b })
}

/// Sinkhorn iteration `φ₁ ← ρ1 / (Pᵀφ̂₀)`, `φ̂₀ ← ρ0 / (Pφ₁)`, gauge `Σφ̂₀ = 1`.
pub fn solve_bridge<T: Real>(bp: &BridgeProblem<T>, tol: T, max_iter: usize) -> Result<BridgeSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let p = bp.kernel();
    let k = p.nrows();
    let mut phi_hat0 = DVector::from_element(k, T::one() / lit(k as f64));
    let mut phi1: DVector<T>;
    let mut residuals = Vec::new();
    for it in 1..=max_iter {
        phi1 = scale_div(bp.rho1(), &p.tr_mul(&phi_hat0));
        phi_hat0 = scale_div(bp.rho0(), &(p * &phi1));
        let c = phi_hat0.sum();
        phi_hat0 /= c;
        phi1 *= c;
        let col = phi1.component_mul(&p.tr_mul(&phi_hat0));
        let r = (col - bp.rho1()).lp_norm(1);
        residuals.push(r);
        if r <= tol {
            let joint = DMatrix::from_fn(k, k, |x, y| phi_hat0[x] * p[(x, y)] * phi1[y]);
            return Ok(BridgeSolution { phi_hat0, phi1, joint, iterations: it, residuals });
        }
    }
    Err(Error::MaxIterExceeded { iterations: max_iter, residual: to_f64(residuals.last().copied().unwrap_or(T::zero())) })
}

/// Sum of `q log(q/P)` over the support of `q`.
pub fn relative_entropy<T: Real>(q: &DMatrix<T>, p: &DMatrix<T>) -> T {
    q.iter()
        .zip(p.iter())
        .filter(|(a, _)| **a > T::zero())
        .fold(T::zero(), |s, (a, b)| s + *a * (*a / *b).ln())
}

/// Intermediate kernels `P(t₀, t)` and `P(t, t₁)` for one time.
#[derive(Clone, Debug)]
pub struct SplitKernels<T: Real> {
    pub from_start: DMatrix<T>,
    pub to_end: DMatrix<T>,
}

/// Marginals `q(·, t) = φ(·, t) φ̂(·, t)` with `φ(t) = P(t,t₁)φ₁` and
/// `φ̂(t) = P(t₀,t)ᵀφ̂₀`.
///
/// The Chapman-Kolmogorov residual is `Σ_xy φ̂₀(x) |P(t₀,t)P(t,t₁) - P|_xy φ₁(y)`,
/// the mass the factorization error adds to the joint, so truncation far
/// from the marginals' support does not count.
pub fn bridge_marginal_flow<T: Real>(
    bp: &BridgeProblem<T>,
    sol: &BridgeSolution<T>,
    splits: &[SplitKernels<T>],
) -> Result<Vec<DVector<T>>> {
    let p = bp.kernel();
    splits
        .iter()
        .map(|s| {
            // factorization error carried into the joint, in total mass
            let err = (&s.from_start * &s.to_end - p).abs();
            let ck = sol.phi_hat0.dot(&(err * &sol.phi1));
            if ck > lit(CK_TOL) {
                return Err(Error::InconsistentKernels { residual: to_f64(ck) });
            }
            let phi = &s.to_end * &sol.phi1;
            let phi_hat = s.from_start.tr_mul(&sol.phi_hat0);
            Ok(phi.component_mul(&phi_hat))
        })
        .collect()
}

/// Heat-kernel splits at the given times in `[0, total]`; the endpoints use
/// the identity kernel.
pub fn heat_splits<T: Real>(grid: &[T], total: T, times: &[T]) -> Result<Vec<SplitKernels<T>>> {
    let k = grid.len();
    let kern = |t: T| if t > T::zero() { heat_kernel(grid, t) } else { Ok(DMatrix::identity(k, k)) };
    times
        .iter()
        .map(|&t| {
            if t < T::zero() || t > total {
                return Err(Error::InvalidInput(format!("time {} outside [0, {}]", to_f64(t), to_f64(total))));
            }
            Ok(SplitKernels { from_start: kern(t)?, to_end: kern(total - t)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heat_kernel_basics() {
        let g = uniform_grid(-10.0f64, 10.0, 401);
        let p = heat_kernel(&g, 1.0).unwrap();
        assert_eq!(p, p.transpose());
        assert!((p.row(200).sum() - 1.0).abs() < 1e-8);
        assert!(heat_kernel(&g, 0.0).is_err());
        assert!(heat_kernel(&[0.0, 1.0, 3.0], 1.0).is_err());
    }

    #[test]
    fn doubly_stochastic_uniform() {
        let p = DMatrix::<f64>::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5]);
        let u = DVector::from_element(3, 1.0 / 3.0);
        let bp = BridgeProblem::new(p.clone(), u.clone(), u).unwrap();
        let s = solve_bridge(&bp, 1e-12, 1000).unwrap();
        assert!((s.joint - p / 3.0).norm() < 1e-12);
        assert!((s.phi_hat0.max() - s.phi_hat0.min()).abs() < 1e-12);
    }

    #[test]
    fn independent_coupling() {
        let r0 = DVector::from_vec(vec![0.5, 0.3, 0.2]);
        let r1 = DVector::from_vec(vec![0.1, 0.6, 0.3]);
        let p = &r0 * r1.transpose();
        let bp = BridgeProblem::new(p.clone(), r0, r1).unwrap();
        let s = solve_bridge(&bp, 1e-13, 100).unwrap();
        assert!((&s.joint - &p).norm() < 1e-13);
        assert!(s.system_residual(&bp) < 1e-12);
    }

    #[test]
    fn zero_marginal_entries() {
        let p = DMatrix::from_element(3, 3, 1.0);
        let r0 = DVector::from_vec(vec![0.0, 0.5, 0.5]);
        let r1 = DVector::from_vec(vec![0.25, 0.75, 0.0]);
        let bp = BridgeProblem::new(p, r0, r1).unwrap();
        let s = solve_bridge(&bp, 1e-12, 1000).unwrap();
        assert_relative_eq!(s.joint.row(0).sum(), 0.0);
        assert_relative_eq!(s.joint.column(2).sum(), 0.0);
    }

    #[test]
    fn boundary_times_recover_marginals() {
        let g = uniform_grid(-3.0, 3.0, 31);
        let p = heat_kernel(&g, 0.5).unwrap();
        let mk = |c: f64| {
            let v = DVector::from_iterator(31, g.iter().map(|x| (-(x - c) * (x - c)).exp()));
            let s = v.sum();
            v / s
        };
        let bp = BridgeProblem::new(p, mk(-1.0), mk(1.0)).unwrap();
        let s = solve_bridge(&bp, 1e-12, 100_000).unwrap();
        let q = bridge_marginal_flow(&bp, &s, &heat_splits(&g, 0.5, &[0.0, 0.5]).unwrap()).unwrap();
        assert!((&q[0] - bp.rho0()).lp_norm(1) < 1e-10);
        assert!((&q[1] - bp.rho1()).lp_norm(1) < 1e-10);
    }

    #[test]
    fn interior_times_conserve_mass() {
        let g = uniform_grid(-8.0, 8.0, 321);
        let p = heat_kernel(&g, 0.5).unwrap();
        let mk = |c: f64| {
            let v = DVector::from_iterator(g.len(), g.iter().map(|x| (-(x - c) * (x - c)).exp()));
            let s = v.sum();
            v / s
        };
        let bp = BridgeProblem::new(p, mk(-1.0), mk(1.0)).unwrap();
        let s = solve_bridge(&bp, 1e-12, 100_000).unwrap();
        let times = [0.05, 0.15, 0.25, 0.35, 0.45];
        let q = bridge_marginal_flow(&bp, &s, &heat_splits(&g, 0.5, &times).unwrap()).unwrap();
        for qt in &q {
            assert!((qt.sum() - 1.0).abs() < 1e-6);
        }
        // mean moves linearly from -1 to 1
        let mean = |v: &DVector<f64>| v.iter().zip(&g).map(|(a, x)| a * x).sum::<f64>();
        assert!((mean(&q[2])).abs() < 1e-6);
    }

    #[test]
    fn truncated_grid_is_rejected() {
        let g = uniform_grid(-1.0, 1.0, 16);
        let p = heat_kernel(&g, 0.5).unwrap();
        let u = DVector::from_element(16, 1.0 / 16.0);
        let bp = BridgeProblem::new(p, u.clone(), u).unwrap();
        let s = solve_bridge(&bp, 1e-12, 100_000).unwrap();
        let r = bridge_marginal_flow(&bp, &s, &heat_splits(&g, 0.5, &[0.25]).unwrap());
        assert!(matches!(r, Err(Error::InconsistentKernels { .. })));
    }
}
