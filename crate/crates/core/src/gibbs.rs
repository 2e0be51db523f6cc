//! Shannon maximum entropy on a weighted finite set.
//!
//! The maximizer of `-Σ p_k log(p_k) μ_k` under `Σ L_k p_k μ_k = c` is the
//! exponential family `p_k = C exp(<ϑ, L_k>)`. The multipliers minimize the
//! convex log-partition dual `log Σ μ_k e^{<ϑ, L_k>} - <ϑ, c>`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

const SVD_CUTOFF: f64 = 1e-12;
const MAX_COND: f64 = 1e14;

/// Probability weights with `Σ p_k μ_k = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVec<T: Real> {
    values: Vec<T>,
}

impl<T: Real> ProbVec<T> {
    pub fn new(values: Vec<T>, mu: &[T]) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::DimensionMismatch("p and μ lengths differ".into()));
        }
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be finite and nonnegative".into()));
        }
        let total = values.iter().zip(mu).fold(T::zero(), |s, (p, m)| s + *p * *m);
        if (total - T::one()).abs() > lit(1e-12) {
            return Err(Error::InvalidInput(format!("weights sum to {} instead of 1", to_f64(total))));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Feature matrix `L` (`d x K`, one column per point), target `c`, base
/// weights `μ`.
#[derive(Clone, Debug)]
pub struct FeatureProblem<T: Real> {
    features: DMatrix<T>,
    target: DVector<T>,
    base: Vec<T>,
    rank: usize,
    base_curvature: T,
}

impl<T: Real> FeatureProblem<T> {
    pub fn new(features: DMatrix<T>, target: DVector<T>, base: Vec<T>) -> Result<Self> {
        let (d, k) = features.shape();
        if k == 0 {
            return Err(Error::InvalidInput("empty support".into()));
        }
        if target.len() != d || base.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "features {d}x{k}, target {}, weights {}",
                target.len(),
                base.len()
            )));
        }
        if base.iter().any(|m| !(*m > T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidInput("base weights must be positive and finite".into()));
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature or target".into()));
        }
        let mut fp = Self { features, target, base, rank: 0, base_curvature: T::zero() };
        let total = fp.base.iter().fold(T::zero(), |s, m| s + *m);
        let w: Vec<T> = fp.base.iter().map(|m| *m / total).collect();
        let c0 = fp.covariance(&w);
        fp.rank = effective_rank(&c0);
        fp.base_curvature = if d == 0 { T::zero() } else { c0.svd(false, false).singular_values.max() };
        if fp.rank < d {
            log::warn!("features are affinely dependent: rank {} of {d}", fp.rank);
        }
        Ok(fp)
    }

    pub fn support_size(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &DMatrix<T> {
        &self.features
    }

    pub fn target(&self) -> &DVector<T> {
        &self.target
    }

    pub fn base(&self) -> &[T] {
        &self.base
    }

    /// Rank of `[1; L]` minus one.
    pub fn affine_rank(&self) -> usize {
        self.rank
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.feature_count()
    }

    /// Normalized point weights `w_k ∝ μ_k e^{<ϑ, L_k>}` and `log Σ μ_k e^{<ϑ, L_k>}`.
    fn weights(&self, theta: &DVector<T>) -> (Vec<T>, T) {
        let expo: Vec<T> = (0..self.support_size())
            .map(|k| self.base[k].ln() + self.features.column(k).dot(theta))
            .collect();
        let shift = expo.iter().skip(1).fold(expo[0], |a, b| a.max(*b));
        let e: Vec<T> = expo.iter().map(|v| (*v - shift).exp()).collect();
        let s = e.iter().fold(T::zero(), |a, b| a + *b);
        (e.iter().map(|v| *v / s).collect(), shift + s.ln())
    }

    fn mean(&self, w: &[T]) -> DVector<T> {
        let mut m = DVector::zeros(self.feature_count());
        for (k, wk) in w.iter().enumerate() {
            m += self.features.column(k) * *wk;
        }
        m
    }

    fn covariance(&self, w: &[T]) -> DMatrix<T> {
        let d = self.feature_count();
        let mean = self.mean(w);
        let mut c = DMatrix::zeros(d, d);
        for (k, wk) in w.iter().enumerate() {
            let v = self.features.column(k) - &mean;
            c += &v * v.transpose() * *wk;
        }
        c
    }

    fn dual(&self, theta: &DVector<T>) -> T {
        self.weights(theta).1 - theta.dot(&self.target)
    }

    /// `|Σ L_k p_k μ_k - c|`.
    pub fn moment_residual(&self, p: &ProbVec<T>) -> T {
        let w: Vec<T> = p.values().iter().zip(&self.base).map(|(a, b)| *a * *b).collect();
        (self.mean(&w) - &self.target).norm()
    }

    /// μ-weighted RMS distance of `log p` from `span{1, rows of L}`.
    pub fn log_span_residual(&self, p: &ProbVec<T>) -> Result<T> {
        let (d, k) = self.features.shape();
        if p.values().iter().any(|v| !(*v > T::zero())) {
            return Err(Error::InvalidInput("log p requires strictly positive p".into()));
        }
        let sq: Vec<T> = self.base.iter().map(|m| m.sqrt()).collect();
        let a = DMatrix::from_fn(k, d + 1, |r, c| if c == 0 { sq[r] } else { self.features[(c - 1, r)] * sq[r] });
        let y = DVector::from_fn(k, |r, _| p.values()[r].ln() * sq[r]);
        let coef = a.clone().svd(true, true).solve(&y, lit(1e-13)).map_err(|e| Error::InvalidInput(e.into()))?;
        let total = self.base.iter().fold(T::zero(), |s, m| s + *m);
        Ok((a * coef - y).norm() / total.sqrt())
    }
}

fn effective_rank<T: Real>(c: &DMatrix<T>) -> usize {
    if c.nrows() == 0 {
        return 0;
    }
    let sv = c.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    sv.iter().filter(|s| **s > top * lit(SVD_CUTOFF)).count()
}

/// Result of [`fit`].
#[derive(Clone, Debug)]
pub struct GibbsFit<T: Real> {
    pub p: ProbVec<T>,
    /// `ϑ` in `p_k = C e^{<ϑ, L_k>}`; the Gibbs form uses `Λ = -ϑ`.
    pub theta: DVector<T>,
    /// `C = 1 / Σ μ_k e^{<ϑ, L_k>}`.
    pub normalizer: T,
    pub iterations: usize,
    pub moment_residual: T,
    /// Dual objective after each accepted step, starting at `ϑ = 0`.
    pub dual_history: Vec<T>,
}

impl<T: Real> GibbsFit<T> {
    pub fn lambda(&self) -> DVector<T> {
        -&self.theta
    }
}

/// Damped Newton on the log-partition dual.
pub fn fit<T: Real>(fp: &FeatureProblem<T>, tol: T, max_iter: usize) -> Result<GibbsFit<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let d = fp.feature_count();
    let mut theta = DVector::zeros(d);
    let mut value = fp.dual(&theta);
    let mut history = vec![value];
    let mut iterations = 0;
    let boundary = |theta: &DVector<T>| {
        let nrm = theta.norm();
        let dir = if nrm > T::zero() { theta / nrm } else { theta.clone() };
        Error::TargetOnBoundary { direction: dir.iter().map(|v| to_f64(*v)).collect() }
    };
    loop {
        if d == 0 {
            break;
        }
        let (w, _) = fp.weights(&theta);
        let grad = fp.mean(&w) - fp.target();
        let h = fp.covariance(&w);
        let svd = h.svd(true, true);
        let mut sv: Vec<T> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        let rank = fp.affine_rank();
        if rank > 0 {
            // curvature collapsing along a direction means the target sits on a face
            let low = sv[rank - 1];
            let cond = sv[0] / low;
            if !(cond <= lit(MAX_COND)) || !(low >= fp.base_curvature / lit(MAX_COND)) {
                return Err(boundary(&theta));
            }
        }
        let cut = sv.first().copied().unwrap_or(T::zero()) * lit(SVD_CUTOFF);
        let step = svd.solve(&(-&grad), cut).map_err(|e| Error::InvalidInput(e.into()))?;
        if grad.norm() <= tol && step.norm() <= tol.sqrt() * (T::one() + theta.norm()) {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::MaxIterExceeded { iterations, residual: to_f64(grad.norm()) });
        }
        let slope = grad.dot(&step);
        let roundoff = lit::<T>(1e-13) * (T::one() + value.abs());
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let v = fp.dual(&cand);
            let armijo = v <= value + lit::<T>(1e-4) * t * slope;
            // near the optimum the decrease is below roundoff; take the full step
            let flat = t == T::one() && v <= value + roundoff;
            if v.is_finite() && (armijo || flat) {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= lit(0.5);
        }
        iterations += 1;
        if !accepted {
            return Err(Error::MaxIterExceeded { iterations, residual: to_f64(grad.norm()) });
        }
        history.push(value);
        if theta.norm() > T::one() / tol {
            return Err(boundary(&theta));
        }
    }
    let (w, log_z) = fp.weights(&theta);
    let p = ProbVec { values: w.iter().zip(fp.base()).map(|(a, m)| *a / *m).collect() };
    let moment_residual = fp.moment_residual(&p);
    Ok(GibbsFit { p, theta, normalizer: (-log_z).exp(), iterations, moment_residual, dual_history: history })
}

/// `-Σ p_k log(p_k) μ_k` with `0 log 0 = 0`.
pub fn shannon_entropy<T: Real>(p: &ProbVec<T>, mu: &[T]) -> T {
    p.values()
        .iter()
        .zip(mu)
        .filter(|(v, _)| **v > T::zero())
        .fold(T::zero(), |s, (v, m)| s - *v * v.ln() * *m)
}

/// Gibbs distribution `p ∝ e^{-h/kT}` and its free energy
/// `<h, p> - kT · shannon_entropy(p)`.
pub fn free_energy<T: Real>(h: &[T], kt: T, mu: &[T]) -> Result<(ProbVec<T>, T)> {
    if !(kt > T::zero()) {
        return Err(Error::InvalidInput("kT must be positive".into()));
    }
    if h.len() != mu.len() || h.is_empty() {
        return Err(Error::DimensionMismatch("energies and weights differ in length".into()));
    }
    let fp = FeatureProblem::new(DMatrix::zeros(0, h.len()), DVector::zeros(0), mu.to_vec())?;
    let (w, _) = fp.weights(&DVector::zeros(0));
    let expo: Vec<T> = h.iter().zip(&w).map(|(e, wk)| wk.ln() - *e / kt).collect();
    let shift = expo.iter().skip(1).fold(expo[0], |a, b| a.max(*b));
    let s = expo.iter().fold(T::zero(), |a, v| a + (*v - shift).exp());
    let vals: Vec<T> = expo.iter().zip(mu).map(|(v, m)| (*v - shift).exp() / s / *m).collect();
    let p = ProbVec::new(vals, mu)?;
    let energy = p.values().iter().zip(h).zip(mu).fold(T::zero(), |a, ((pv, e), m)| a + *pv * *e * *m);
    let f = energy - kt * shannon_entropy(&p, mu);
    Ok((p, f))
}

/// Boltzmann dice: faces `1..=faces`, unit weights, prescribed mean.
pub fn dice<T: Real>(faces: usize, mean: T, tol: T, max_iter: usize) -> Result<GibbsFit<T>> {
    let l = DMatrix::from_fn(1, faces, |_, k| lit::<T>((k + 1) as f64));
    let fp = FeatureProblem::new(l, DVector::from_element(1, mean), vec![T::one(); faces])?;
    fit(&fp, tol, max_iter)
}

/// Trapezoid weights on a uniform grid over `[-r, r]`.
pub fn trapezoid_grid<T: Real>(r: T, points: usize) -> (Vec<T>, Vec<T>) {
    let h = lit::<T>(2.0) * r / lit((points - 1) as f64);
    let x = (0..points).map(|k| -r + h * lit(k as f64)).collect();
    let w = (0..points)
        .map(|k| if k == 0 || k + 1 == points { h * lit(0.5) } else { h })
        .collect();
    (x, w)
}

/// Outcome of [`gaussian_grid_check`].
#[derive(Clone, Debug)]
pub struct GaussianCheck<T: Real> {
    pub max_deviation: T,
    pub theta: DVector<T>,
}

/// Fits features `(x, x²)` with target `(0, σ²)` on `[-r, r]` and compares the
/// result with the normal density.
pub fn gaussian_grid_check<T: Real>(sigma2: T, r: T, points: usize, tol: T, max_iter: usize) -> Result<GaussianCheck<T>> {
    if !(sigma2 > T::zero()) {
        return Err(Error::InvalidInput("variance must be positive".into()));
    }
    if r < lit::<T>(6.0) * sigma2.sqrt() || points < 2048 {
        return Err(Error::InvalidInput("need r >= 6σ and at least 2048 points".into()));
    }
    let (x, w) = trapezoid_grid(r, points);
    let l = DMatrix::from_fn(2, points, |i, k| if i == 0 { x[k] } else { x[k] * x[k] });
    let fp = FeatureProblem::new(l, DVector::from_vec(vec![T::zero(), sigma2]), w)?;
    let g = fit(&fp, tol, max_iter)?;
    let c = T::one() / (lit::<T>(2.0 * std::f64::consts::PI) * sigma2).sqrt();
    let max_deviation = x
        .iter()
        .zip(g.p.values())
        .fold(T::zero(), |a, (xk, pk)| a.max((*pk - c * (-(*xk * *xk) / (lit::<T>(2.0) * sigma2)).exp()).abs()));
    Ok(GaussianCheck { max_deviation, theta: g.theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fair_dice() {
        let g = dice(6, 3.5, 1e-12, 50).unwrap();
        for p in g.p.values() {
            assert_relative_eq!(*p, 1.0 / 6.0, epsilon = 1e-12);
        }
        assert!(g.theta.norm() < 1e-12);
    }

    #[test]
    fn no_features_gives_base_uniform() {
        let mu = vec![0.5, 1.0, 2.5];
        let fp = FeatureProblem::new(DMatrix::zeros(0, 3), DVector::zeros(0), mu.clone()).unwrap();
        let g = fit(&fp, 1e-12, 10).unwrap();
        for p in g.p.values() {
            assert_relative_eq!(*p, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn boundary_target() {
        assert!(matches!(dice(6, 6.0, 1e-10, 200), Err(Error::TargetOnBoundary { .. })));
        assert!(dice(6, 7.0, 1e-10, 200).is_err());
    }

    #[test]
    fn rank_deficiency_is_flagged_not_fatal() {
        let l = DMatrix::from_fn(2, 4, |i, k| (k as f64) * (i as f64 + 1.0));
        let fp = FeatureProblem::new(l, DVector::from_vec(vec![1.2, 2.4]), vec![1.0; 4]).unwrap();
        assert!(fp.is_rank_deficient());
        let g = fit(&fp, 1e-10, 100).unwrap();
        assert!(g.moment_residual < 1e-10);
    }

    #[test]
    fn entropy_examples() {
        let mu = vec![1.0; 6];
        let u = ProbVec::new(vec![1.0 / 6.0; 6], &mu).unwrap();
        assert_relative_eq!(shannon_entropy(&u, &mu), 6.0f64.ln(), epsilon = 1e-14);
        let atom = ProbVec::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &mu).unwrap();
        assert_eq!(shannon_entropy(&atom, &mu), 0.0);
    }

    #[test]
    fn free_energy_examples() {
        let mu = vec![1.0; 4];
        let (p, _) = free_energy::<f64>(&[2.0; 4], 1.0, &mu).unwrap();
        assert!(p.values().iter().all(|v| (v - 0.25).abs() < 1e-15));
        let (p, _) = free_energy::<f64>(&[0.0, 1.0, 2.0, 3.0], 3e6, &mu).unwrap();
        assert!(p.values().iter().all(|v| (v - 0.25).abs() < 1e-5));
        assert!(free_energy(&[0.0], 0.0, &[1.0]).is_err());
    }

    #[test]
    fn gaussian_on_grid() {
        let g = gaussian_grid_check::<f64>(1.0, 8.0, 4096, 1e-12, 100).unwrap();
        assert!(g.max_deviation < 1e-6);
        assert!(g.theta[0].abs() < 1e-6);
        assert!((g.theta[1] + 0.5).abs() < 1e-6);
    }
}
