//! Maximum-entropy block-circulant completion for stationary reciprocal
//! processes on the discrete circle `Z/NZ`.
//!
//! A block-circulant matrix is diagonalized by the discrete Fourier
//! transform, so the completion reduces to a banded trigonometric dual on the
//! `N` points `2πl/N`. The inverse of the solution is banded with first block
//! row `[M_0 | M_1 | ... | M_n | 0 | ... | 0 | M_n* | ... | M_1*]`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dual::{minimize, TrigDual};
use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, hermitian_part, pd_cholesky, CMat, HermMat};
use crate::scalar::{cis, cplx, creal, lit, to_f64, Cplx, Real};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

const SYMMETRY_TOL: f64 = 1e-10;

fn two_pi<T: Real>() -> T {
    lit(2.0 * std::f64::consts::PI)
}

/// Block-circulant Hermitian matrix stored by its first block row.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCirculant<T: Real> {
    m: usize,
    row: Vec<CMat<T>>,
}

impl<T: Real> BlockCirculant<T> {
    /// Requires `row[N-k] = row[k]*` (Hermitian symmetry of the full matrix).
    pub fn new(m: usize, row: Vec<CMat<T>>) -> Result<Self> {
        if row.is_empty() || m == 0 {
            return Err(Error::InvalidInput("empty circulant".into()));
        }
        if row.iter().any(|b| b.nrows() != m || b.ncols() != m) {
            return Err(Error::DimensionMismatch(format!("every block must be {m}x{m}")));
        }
        if row.iter().any(|b| b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        let n = row.len();
        let scale = row.iter().fold(T::one(), |s, b| s.max(b.norm()));
        for k in 0..n {
            let dev = (&row[(n - k) % n] - row[k].adjoint()).norm();
            if dev > lit::<T>(SYMMETRY_TOL) * scale {
                return Err(Error::InvalidInput(format!(
                    "first row is not Hermitian-symmetric at block {k} (deviation {:e})",
                    to_f64(dev)
                )));
            }
        }
        let mut row = row;
        for k in 0..=n / 2 {
            let j = (n - k) % n;
            let avg = (&row[k] + row[j].adjoint()) * creal(lit::<T>(0.5));
            row[j] = avg.adjoint();
            row[k] = avg;
        }
        Ok(Self { m, row })
    }

    /// Inverse transform of per-frequency blocks `Φ_l`.
    pub fn from_symbol(m: usize, symbol: &[CMat<T>]) -> Result<Self> {
        let n = symbol.len();
        let inv_n = creal(T::one() / lit(n as f64));
        let row = (0..n)
            .map(|t| {
                let mut acc = CMat::zeros(m, m);
                for (l, s) in symbol.iter().enumerate() {
                    acc += s * cis(two_pi::<T>() * lit(((l * t) % n) as f64) / lit(n as f64));
                }
                acc * inv_n
            })
            .collect();
        Self::new(m, row)
    }

    /// Circle length `N`.
    pub fn circle_len(&self) -> usize {
        self.row.len()
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn first_block_row(&self) -> &[CMat<T>] {
        &self.row
    }

    /// Block `(i, j)`, equal to `row[(j - i) mod N]`.
    pub fn block(&self, i: usize, j: usize) -> &CMat<T> {
        let n = self.row.len();
        &self.row[(j + n - i % n) % n]
    }

    /// Dense `Nm x Nm` matrix.
    pub fn materialize(&self) -> HermMat<T> {
        let (n, m) = (self.row.len(), self.m);
        let mut out = CMat::zeros(n * m, n * m);
        for i in 0..n {
            for j in 0..n {
                out.view_mut((i * m, j * m), (m, m)).copy_from(self.block(i, j));
            }
        }
        HermMat::new(hermitian_part(&out)).expect("finite entries")
    }

    /// `Φ_l = Σ_t row[t] e^{-2πi l t / N}`.
    pub fn fft_block_diag(&self) -> Vec<CMat<T>> {
        let n = self.row.len();
        (0..n)
            .map(|l| {
                let mut acc = CMat::zeros(self.m, self.m);
                for (t, r) in self.row.iter().enumerate() {
                    acc += r * cis(-two_pi::<T>() * lit(((l * t) % n) as f64) / lit(n as f64));
                }
                hermitian_part(&acc)
            })
            .collect()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.fft_block_diag().iter().all(|b| pd_cholesky(b).is_some())
    }

    pub fn log_det(&self) -> Result<T> {
        self.fft_block_diag().iter().try_fold(T::zero(), |s, b| {
            pd_cholesky(b)
                .map(|ch| s + chol_log_det(&ch))
                .ok_or_else(|| Error::NotPositiveDefinite("block-circulant matrix".into()))
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .fft_block_diag()
            .iter()
            .map(|b| {
                pd_cholesky(b)
                    .map(|ch| hermitian_part(&ch.inverse()))
                    .ok_or_else(|| Error::NotPositiveDefinite("block-circulant matrix".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_symbol(self.m, &inv)
    }

    /// Banded circulant with first row `[M_0, M_1, .., M_n, 0, .., M_n*, .., M_1*]`.
    pub fn banded(circle_len: usize, params: &[CMat<T>]) -> Result<Self> {
        let n = params.len().saturating_sub(1);
        if params.is_empty() || 2 * (n + 1) > circle_len {
            return Err(Error::InvalidInput(format!("band of order {n} does not fit on a circle of length {circle_len}")));
        }
        let m = params[0].nrows();
        let mut row = vec![CMat::zeros(m, m); circle_len];
        row[0] = params[0].clone();
        for d in 1..=n {
            row[d] = params[d].clone();
            row[circle_len - d] = params[d].adjoint();
        }
        Self::new(m, row)
    }
}

/// Dense block cyclic shift `U` with `U_{i+1,i} = I`.
pub fn shift_matrix<T: Real>(circle_len: usize, m: usize) -> CMat<T> {
    let mut u = CMat::zeros(circle_len * m, circle_len * m);
    for i in 0..circle_len {
        let r = (i + 1) % circle_len;
        for a in 0..m {
            u[(r * m + a, i * m + a)] = creal(T::one());
        }
    }
    u
}

/// Circle length, block size and the lags `Σ_0..Σ_n`.
#[derive(Clone, Debug)]
pub struct ReciprocalSpec<T: Real> {
    circle_len: usize,
    m: usize,
    lags: Vec<CMat<T>>,
}

impl<T: Real> ReciprocalSpec<T> {
    /// Lags satisfy `Σ_k = E[x_{t+k} x_t*]`; the first block row of `Σ_11` is
    /// `[Σ_0, Σ_1*, .., Σ_n*]`.
    pub fn new(circle_len: usize, lags: Vec<CMat<T>>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidInput("at least Σ_0 is required".into()));
        }
        let m = lags[0].nrows();
        if lags.iter().any(|l| l.nrows() != m || l.ncols() != m) {
            return Err(Error::DimensionMismatch(format!("every lag must be {m}x{m}")));
        }
        let n = lags.len() - 1;
        if 2 * (n + 1) > circle_len {
            return Err(Error::InvalidInput(format!("need 2(n+1) <= N, got n = {n}, N = {circle_len}")));
        }
        HermMat::new(lags[0].clone())?;
        let spec = Self { circle_len, m, lags };
        spec.sigma_11().require_pd("Σ_11")?;
        Ok(spec)
    }

    pub fn circle_len(&self) -> usize {
        self.circle_len
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    /// Reciprocal order `n`.
    pub fn order(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn lags(&self) -> &[CMat<T>] {
        &self.lags
    }

    /// `(n+1)m` block-Toeplitz matrix of the given lags.
    pub fn sigma_11(&self) -> HermMat<T> {
        let (k, m) = (self.lags.len(), self.m);
        let mut out = CMat::zeros(k * m, k * m);
        for i in 0..k {
            for j in 0..k {
                let b = if j >= i { self.lags[j - i].adjoint() } else { self.lags[i - j].clone() };
                out.view_mut((i * m, j * m), (m, m)).copy_from(&b);
            }
        }
        HermMat::new(hermitian_part(&out)).expect("finite lags")
    }

    /// `|E* C E - Σ_11| / |Σ_11|` for a circulant `C`.
    pub fn constraint_residual(&self, c: &BlockCirculant<T>) -> T {
        let num = self
            .lags
            .iter()
            .enumerate()
            .map(|(d, l)| {
                let e = (c.first_block_row()[d].clone() - l.adjoint()).norm_squared();
                let w = lit::<T>(2.0 * (self.lags.len() - d) as f64);
                if d == 0 { e * lit(self.lags.len() as f64) } else { e * w }
            })
            .fold(T::zero(), |a, b| a + b);
        num.sqrt() / self.sigma_11().norm()
    }
}

/// Completed covariance and its band parameters.
#[derive(Clone, Debug)]
pub struct CirculantSolution<T: Real> {
    pub sigma: BlockCirculant<T>,
    /// `M_0..M_n` of `Σ_c^{-1}` (of `Σ_c^{-1} - Σ_p^{-1}` with a prior).
    pub params: Vec<CMat<T>>,
    pub iterations: usize,
    pub constraint_residual: T,
}

/// Maximum-entropy completion, optionally relative to a circulant prior `Σ_p`.
pub fn circulant_complete<T: Real>(
    spec: &ReciprocalSpec<T>,
    prior: Option<&BlockCirculant<T>>,
    tol: T,
    max_iter: usize,
) -> Result<CirculantSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let (nc, m, n) = (spec.circle_len, spec.m, spec.order());
    let prior_inv = match prior {
        Some(p) => {
            if p.circle_len() != nc || p.block_dim() != m {
                return Err(Error::DimensionMismatch("prior does not match the specification".into()));
            }
            Some(p.inverse()?)
        }
        None => None,
    };
    let thetas: Vec<T> = (0..nc).map(|l| two_pi::<T>() * lit(l as f64) / lit(nc as f64)).collect();
    let lags: Vec<usize> = (0..=n).collect();
    let coeffs: Vec<CMat<T>> = spec.lags.iter().map(|l| l.adjoint()).collect();
    let p_sym = prior_inv.as_ref().map(|p| p.fft_block_diag());
    let dual = TrigDual::new(m, thetas, p_sym, &lags, &coeffs)?;
    let q0 = HermMat::new(spec.lags[0].clone())?.inverse_pd()?;
    let x0 = match &prior_inv {
        // the prior already makes the start positive definite
        Some(_) => DVector::zeros(dual.params().len()),
        None => dual.constant_point(q0.as_matrix()),
    };
    let out = match minimize(&dual, x0, tol.min(lit(1e-12)), max_iter) {
        Ok(o) => o,
        Err(Error::DualDiverged(msg)) => return Err(Error::Infeasible(msg)),
        Err(e) => return Err(e),
    };
    let sym = dual.spectrum(&out.x).ok_or_else(|| Error::Infeasible("final iterate left the domain".into()))?;
    let sigma = BlockCirculant::from_symbol(m, &sym)?;
    let residual = spec.constraint_residual(&sigma);
    if residual > tol {
        return Err(Error::MaxIterExceeded { iterations: out.iterations, residual: to_f64(residual) });
    }
    let inv = sigma.inverse()?;
    let band_row: Vec<CMat<T>> = match &prior_inv {
        Some(p) => inv.first_block_row().iter().zip(p.first_block_row()).map(|(a, b)| a - b).collect(),
        None => inv.first_block_row().to_vec(),
    };
    let scale = band_row[0].norm().max(T::one());
    let params = reciprocal_params(&band_row, n, lit::<T>(1e-6) * scale)?;
    Ok(CirculantSolution { sigma, params, iterations: out.iterations, constraint_residual: residual })
}

/// Largest block norm of `row` strictly outside the band of order `n`.
pub fn band_violation<T: Real>(row: &[CMat<T>], n: usize) -> T {
    let nc = row.len();
    (n + 1..nc.saturating_sub(n)).fold(T::zero(), |s, d| s.max(row[d].norm()))
}

/// Reads `M_0..M_n` from a banded first block row.
pub fn reciprocal_params<T: Real>(row: &[CMat<T>], n: usize, tol: T) -> Result<Vec<CMat<T>>> {
    if 2 * (n + 1) > row.len() {
        return Err(Error::InvalidInput(format!("band of order {n} does not fit a row of length {}", row.len())));
    }
    let v = band_violation(row, n);
    if v > tol {
        return Err(Error::BandViolation { max_off_band: to_f64(v) });
    }
    let mut out: Vec<CMat<T>> = row[..=n].to_vec();
    out[0] = hermitian_part(&out[0]);
    Ok(out)
}

/// Multipliers `(Λ, Θ)` with
/// `Σ_c^{-1} = E Λ E* + U Θ U* - Θ (+ Σ_p^{-1})`.
///
/// `Λ` is block Toeplitz with `Λ_{i,i+d} = N M_d / (n+1-d)` and `Θ` is the
/// solution orthogonal to the circulant matrices.
pub fn dual_variables<T: Real>(
    circle_len: usize,
    params: &[CMat<T>],
    prior: Option<&BlockCirculant<T>>,
    sigma_inv: &BlockCirculant<T>,
) -> Result<(HermMat<T>, HermMat<T>)> {
    let n = params.len() - 1;
    let m = params[0].nrows();
    let nc = circle_len;
    let k = n + 1;
    let mut lam = CMat::zeros(k * m, k * m);
    for i in 0..k {
        for d in 0..k - i {
            let b = &params[d] * creal(lit::<T>(nc as f64) / lit((k - d) as f64));
            lam.view_mut((i * m, (i + d) * m), (m, m)).copy_from(&b);
            if d > 0 {
                lam.view_mut(((i + d) * m, i * m), (m, m)).copy_from(&b.adjoint());
            }
        }
    }
    let lam = hermitian_part(&lam);
    let mut r = sigma_inv.materialize().into_matrix();
    if let Some(p) = prior {
        r -= p.inverse()?.materialize().into_matrix();
    }
    let mut corner = r.view_mut((0, 0), (k * m, k * m));
    corner -= &lam;
    let blk = |mat: &CMat<T>, i: usize, j: usize| mat.view((i * m, j * m), (m, m)).clone_owned();
    let mut theta = CMat::zeros(nc * m, nc * m);
    for d in 0..nc {
        let mut cur = CMat::zeros(m, m);
        let mut diag = vec![cur.clone()];
        for i in 1..nc {
            cur = &cur - blk(&r, i, (i + d) % nc);
            diag.push(cur.clone());
        }
        let mean = diag.iter().fold(CMat::zeros(m, m), |s, b| s + b) * creal(T::one() / lit(nc as f64));
        for (i, b) in diag.iter().enumerate() {
            theta.view_mut((i * m, ((i + d) % nc) * m), (m, m)).copy_from(&(b - &mean));
        }
    }
    Ok((HermMat::new(lam)?, HermMat::new(hermitian_part(&theta))?))
}

/// `|E Λ E* + U Θ U* - Θ (+ Σ_p^{-1}) - Σ_c^{-1}| / |Σ_c^{-1}|`.
pub fn reconstruction_residual<T: Real>(
    lambda: &HermMat<T>,
    theta: &HermMat<T>,
    prior: Option<&BlockCirculant<T>>,
    sigma_inv: &BlockCirculant<T>,
) -> Result<T> {
    let nc = sigma_inv.circle_len();
    let m = sigma_inv.block_dim();
    let u = shift_matrix::<T>(nc, m);
    let th = theta.as_matrix();
    let mut s = &u * th * u.adjoint() - th;
    let k = lambda.dim();
    let mut corner = s.view_mut((0, 0), (k, k));
    corner += lambda.as_matrix();
    if let Some(p) = prior {
        s += p.inverse()?.materialize().into_matrix();
    }
    let target = sigma_inv.materialize();
    Ok((s - target.as_matrix()).norm() / target.norm())
}

/// Zero-mean Gaussian draws with covariance `Σ_c`; `out[s][t]` is the
/// `m`-vector at time `t` of draw `s`. Real circulants give real draws.
pub fn sample_reciprocal<T: Real>(sigma: &BlockCirculant<T>, count: usize, seed: u64) -> Result<Vec<Vec<DVector<Cplx<T>>>>> {
    let (nc, m) = (sigma.circle_len(), sigma.block_dim());
    let factors = sigma
        .fft_block_diag()
        .iter()
        .map(|b| pd_cholesky(b).map(|ch| ch.l()).ok_or_else(|| Error::NotPositiveDefinite("Σ_c".into())))
        .collect::<Result<Vec<_>>>()?;
    let real = sigma.first_block_row().iter().all(|b| b.iter().all(|z| z.im == T::zero()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = lit::<T>(0.5f64.sqrt());
    let inv_sqrt_n = T::one() / lit::<T>(nc as f64).sqrt();
    let twiddle: Vec<Cplx<T>> = (0..nc).map(|j| cis(-two_pi::<T>() * lit(j as f64) / lit(nc as f64))).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let z: Vec<DVector<Cplx<T>>> = factors
            .iter()
            .map(|l| {
                let w = DVector::from_fn(m, |_, _| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    cplx(lit::<T>(a) * half, lit::<T>(b) * half)
                });
                l * w
            })
            .collect();
        let draw: Vec<DVector<Cplx<T>>> = (0..nc)
            .map(|t| {
                let mut x = DVector::zeros(m);
                for (l, zl) in z.iter().enumerate() {
                    x += zl * twiddle[(l * t) % nc];
                }
                x *= creal(inv_sqrt_n);
                if real {
                    x.map(|v| creal(v.re * lit::<T>(2.0f64.sqrt())))
                } else {
                    x
                }
            })
            .collect();
        out.push(draw);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(v: f64) -> CMat<f64> {
        CMat::from_element(1, 1, creal(v))
    }

    #[test]
    fn materialize_examples() {
        let c = BlockCirculant::new(1, vec![s(2.0), s(0.5)]).unwrap();
        let d = c.materialize();
        assert_eq!(d.get(0, 1).re, 0.5);
        assert_eq!(d.get(1, 1).re, 2.0);
        let id = BlockCirculant::new(2, vec![CMat::identity(2, 2), CMat::zeros(2, 2), CMat::zeros(2, 2)]).unwrap();
        assert_eq!(id.materialize().as_matrix(), &CMat::<f64>::identity(6, 6));
        assert!(BlockCirculant::new(1, vec![s(1.0), s(0.3), s(0.1)]).is_err());
    }

    #[test]
    fn fft_examples() {
        let c = BlockCirculant::new(1, vec![s(2.0), s(0.5)]).unwrap();
        let f = c.fft_block_diag();
        assert_relative_eq!(f[0][(0, 0)].re, 2.5, epsilon = 1e-14);
        assert_relative_eq!(f[1][(0, 0)].re, 1.5, epsilon = 1e-14);
        let row = vec![s(1.0), s(0.2), s(-0.1), s(0.2)];
        let c = BlockCirculant::new(1, row).unwrap();
        let back = BlockCirculant::from_symbol(1, &c.fft_block_diag()).unwrap();
        for (a, b) in c.first_block_row().iter().zip(back.first_block_row()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn trivial_completion() {
        let spec = ReciprocalSpec::new(4, vec![s(1.0)]).unwrap();
        let sol = circulant_complete(&spec, None, 1e-10, 100).unwrap();
        assert!((sol.sigma.materialize().into_matrix() - CMat::identity(4, 4)).norm() < 1e-10);
        assert!((&sol.params[0] - s(1.0)).norm() < 1e-10);
    }

    #[test]
    fn band_and_certificate() {
        let spec = ReciprocalSpec::new(7, vec![s(1.0), s(0.4), s(0.1)]).unwrap();
        let sol = circulant_complete(&spec, None, 1e-10, 100).unwrap();
        let inv = sol.sigma.inverse().unwrap();
        assert!(band_violation(inv.first_block_row(), 2) < 1e-10);
        let (l, t) = dual_variables(7, &sol.params, None, &inv).unwrap();
        assert!(reconstruction_residual(&l, &t, None, &inv).unwrap() < 1e-10);
    }

    #[test]
    fn band_violation_reported() {
        let row = vec![s(1.0), s(0.2), s(0.1), s(0.1), s(0.2)];
        assert!(matches!(reciprocal_params(&row, 1, 1e-8), Err(Error::BandViolation { .. })));
        assert!(reciprocal_params(&row, 1, 0.2).is_ok());
    }

    #[test]
    fn order_constraint() {
        assert!(ReciprocalSpec::new(3, vec![s(1.0), s(0.1)]).is_err());
        assert!(ReciprocalSpec::new(4, vec![s(1.0), s(0.1)]).is_ok());
    }

    #[test]
    fn sampling_is_seeded() {
        let c = BlockCirculant::new(1, vec![s(1.0), s(0.3), s(0.3)]).unwrap();
        let a = sample_reciprocal(&c, 5, 3).unwrap();
        let b = sample_reciprocal(&c, 5, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|v| v[0].im == 0.0));
    }
}
