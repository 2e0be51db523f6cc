//! Generalized moment problem for a filter bank `G(z) = (zI - A)^{-1} B`.
//!
//! `Γ(Φ) = (1/2π) ∫ G Φ G* dϑ` maps spectra to state covariances and
//! `Γ*(M) = G* M G` is its adjoint. The maximum-entropy spectrum matching a
//! state covariance `Σ` is `Φ_c = (G* Λ_c G)^{-1}` with Λ_c in closed form.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::linalg::{herm_coords, herm_from_coords, hermitian_part, pd_cholesky, pinv_solve_sym, CMat, HermMat, SubspaceBasis};
use crate::scalar::{cabs, cis, cplx, creal, lit, to_f64, Cplx, Real};
use crate::spectrum::{grid_theta, SpectrumGrid};
use crate::sum::pairwise;

/// Relative range residual above which a covariance is rejected.
pub const RANGE_TOL: f64 = 1e-6;

/// Stable, reachable pair `(A, B)` with `B` of full column rank.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T: Real> {
    a: CMat<T>,
    b: CMat<T>,
}

impl<T: Real> FilterBank<T> {
    pub fn new(a: CMat<T>, b: CMat<T>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() == 0 || b.ncols() > n {
            return Err(Error::DimensionMismatch(format!("B must be {n}xm with 1 <= m <= {n}, got {}x{}", b.nrows(), b.ncols())));
        }
        if a.iter().chain(b.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("filter bank has non-finite entries".into()));
        }
        let rho = spectral_radius(&a);
        if !(rho < lit::<T>(1.0 - 1e-9)) {
            return Err(Error::InvalidInput(format!("A is not stable (spectral radius {:e})", to_f64(rho))));
        }
        let m = b.ncols();
        if numerical_rank(&b) < m {
            return Err(Error::InvalidInput("B must have full column rank".into()));
        }
        let mut ctrb = CMat::zeros(n, n * m);
        let mut blk = b.clone();
        for k in 0..n {
            ctrb.view_mut((0, k * m), (n, m)).copy_from(&blk);
            blk = &a * blk;
        }
        if numerical_rank(&ctrb) < n {
            return Err(Error::InvalidInput("(A, B) is not reachable".into()));
        }
        Ok(Self { a, b })
    }

    /// Covariance-extension bank: `G(z) = [z^{-1} I; z^{-2} I; ...; z^{-n} I]`,
    /// whose state covariance is the block-Toeplitz matrix of `C_0..C_{n-1}`.
    pub fn covariance_extension(m: usize, n: usize) -> Result<Self> {
        let mut a = CMat::zeros(n * m, n * m);
        for i in 1..n {
            for d in 0..m {
                a[(i * m + d, (i - 1) * m + d)] = creal(T::one());
            }
        }
        let mut b = CMat::zeros(n * m, m);
        for d in 0..m {
            b[(d, d)] = creal(T::one());
        }
        Self::new(a, b)
    }

    pub fn a(&self) -> &CMat<T> {
        &self.a
    }

    pub fn b(&self) -> &CMat<T> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `(e^{jϑ} I - A)^{-1} B`.
    pub fn eval_g(&self, theta: T) -> CMat<T> {
        let n = self.state_dim();
        let mut z = -self.a.clone();
        let w = cis(theta);
        for i in 0..n {
            z[(i, i)] += w;
        }
        z.lu().solve(&self.b).expect("e^{j theta} is not an eigenvalue of a stable A")
    }

    /// `G` on the standard grid of `g` points.
    pub fn g_values(&self, g: usize) -> Vec<CMat<T>> {
        (0..g).map(|k| self.eval_g(grid_theta(g, k))).collect()
    }

    /// Orthogonal projector onto `im B`.
    pub fn range_projector(&self) -> CMat<T> {
        let bb = self.b.adjoint() * &self.b;
        let inv = bb.try_inverse().expect("B has full column rank");
        hermitian_part(&(&self.b * inv * self.b.adjoint()))
    }

    /// Orthonormal basis of `ker B*` as columns.
    pub fn null_b_adjoint(&self) -> CMat<T> {
        let n = self.state_dim();
        let p = CMat::identity(n, n) - self.range_projector();
        let eig = nalgebra::SymmetricEigen::new(hermitian_part(&p));
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > lit(0.5)).collect();
        let mut q = CMat::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            q.set_column(c, &eig.eigenvectors.column(i));
        }
        q
    }

    /// `Δ*(X) = X - A* X A`.
    pub fn stein_adjoint(&self, x: &CMat<T>) -> CMat<T> {
        x - self.a.adjoint() * x * &self.a
    }

    /// Basis of `ker Γ*`: `{X - A* X A : X = Q E Q*}` with `Q` spanning
    /// `ker B*`. Its orthogonal complement is `Range Γ`.
    pub fn kernel_adjoint_basis(&self) -> SubspaceBasis<T> {
        let n = self.state_dim();
        let q = self.null_b_adjoint();
        let k = q.ncols();
        let mut elements = Vec::with_capacity(k * k);
        for i in 0..(k * k) {
            let mut c = DVector::zeros(k * k);
            c[i] = T::one();
            let e = herm_from_coords(k, &c);
            let x = &q * e * q.adjoint();
            elements.push(HermMat::new(self.stein_adjoint(&x)).expect("finite"));
        }
        SubspaceBasis::new(n, elements).expect("Stein operator is injective for stable A")
    }

    /// Basis of `Range Γ` (dimension `2nm - m^2`).
    pub fn range_basis(&self) -> SubspaceBasis<T> {
        self.kernel_adjoint_basis().complement()
    }
}

fn spectral_radius<T: Real>(a: &CMat<T>) -> T {
    // unbounded QR iterations can stall on exact Jordan blocks such as the
    // shift matrix of the covariance-extension bank
    match Schur::try_new(a.clone(), T::default_epsilon(), 10_000) {
        Some(s) => {
            let (_, t) = s.unpack();
            (0..t.nrows()).fold(T::zero(), |r, i| {
                let v = cabs(t[(i, i)]);
                if v > r { v } else { r }
            })
        }
        None => gelfand_radius(a),
    }
}

/// `lim ||A^k||^{1/k}` by repeated squaring with `k = 2^40`, tracking the
/// scale in logarithms.
fn gelfand_radius<T: Real>(a: &CMat<T>) -> T {
    let n0 = a.norm();
    if n0 == T::zero() {
        return T::zero();
    }
    let mut p = a.unscale(n0);
    let mut log = n0.ln();
    let mut k = T::one();
    for _ in 0..40 {
        let sq = &p * &p;
        let n = sq.norm();
        if n <= T::default_epsilon() * T::default_epsilon() {
            return T::zero();
        }
        p = sq.unscale(n);
        log = log + log + n.ln();
        k = k + k;
    }
    (log / k).exp()
}

fn numerical_rank<T: Real>(m: &CMat<T>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
    sv.iter().filter(|&&s| s > lit::<T>(1e-10) * max).count()
}

/// `Γ` and `Γ*` on a fixed grid with cached filter values.
#[derive(Clone, Debug)]
pub struct GammaOp<T: Real> {
    fb: FilterBank<T>,
    gs: Vec<CMat<T>>,
}

impl<T: Real> GammaOp<T> {
    pub fn new(fb: &FilterBank<T>, grid_size: usize) -> Self {
        Self { fb: fb.clone(), gs: fb.g_values(grid_size) }
    }

    pub fn filter_bank(&self) -> &FilterBank<T> {
        &self.fb
    }

    pub fn grid_size(&self) -> usize {
        self.gs.len()
    }

    pub fn g(&self, k: usize) -> &CMat<T> {
        &self.gs[k]
    }

    pub fn apply(&self, phi: &SpectrumGrid<T>) -> Result<HermMat<T>> {
        if phi.block_dim() != self.fb.input_dim() || phi.grid_size() != self.grid_size() {
            return Err(Error::DimensionMismatch(format!(
                "spectrum is {}x{} on {} points, filter bank needs {}x{} on {}",
                phi.block_dim(),
                phi.block_dim(),
                phi.grid_size(),
                self.fb.input_dim(),
                self.fb.input_dim(),
                self.grid_size()
            )));
        }
        let n = self.fb.state_dim();
        let g = self.grid_size();
        let s = pairwise(g, &CMat::zeros(n, n), &|k| &self.gs[k] * phi.value(k) * self.gs[k].adjoint());
        HermMat::new(s / creal(lit::<T>(g as f64)))
    }

    /// `G* M G` at grid point `k`.
    pub fn adjoint_at(&self, m: &CMat<T>, k: usize) -> CMat<T> {
        hermitian_part(&(self.gs[k].adjoint() * m * &self.gs[k]))
    }

    pub fn adjoint(&self, m: &HermMat<T>) -> Result<SpectrumGrid<T>> {
        if m.dim() != self.fb.state_dim() {
            return Err(Error::DimensionMismatch(format!("M is {}x{}, state dimension {}", m.dim(), m.dim(), self.fb.state_dim())));
        }
        SpectrumGrid::new(
            self.fb.input_dim(),
            (0..self.grid_size()).map(|k| self.adjoint_at(m.as_matrix(), k)).collect(),
        )
    }

    /// Grid functions `G* E_k G` for an orthonormal basis `E_k` of Hermitian
    /// `n x n` matrices; they span `Range Γ*`.
    pub fn range_adjoint_spanning_set(&self) -> Vec<SpectrumGrid<T>> {
        let n = self.fb.state_dim();
        (0..n * n)
            .map(|i| {
                let mut c = DVector::zeros(n * n);
                c[i] = T::one();
                self.adjoint(&HermMat::from_coords(n, &c)).expect("dimensions agree")
            })
            .collect()
    }

    /// Grid-`L2` orthogonal projection onto `Range Γ*`.
    pub fn project_range_adjoint(&self, phi: &SpectrumGrid<T>) -> Result<SpectrumGrid<T>> {
        project_onto_grids(&self.range_adjoint_spanning_set(), phi)
    }

    /// Projects `phi` onto `ker Γ` (the grid-orthogonal complement of
    /// `Range Γ*`), so that `Γ` of the result vanishes.
    pub fn project_kernel(&self, phi: &SpectrumGrid<T>) -> Result<SpectrumGrid<T>> {
        phi.sub(&self.project_range_adjoint(phi)?)
    }
}

/// Least-squares projection of `phi` onto `span(basis)` in the grid inner
/// product.
pub fn project_onto_grids<T: Real>(basis: &[SpectrumGrid<T>], phi: &SpectrumGrid<T>) -> Result<SpectrumGrid<T>> {
    let k = basis.len();
    if k == 0 {
        return Ok(phi.scale(T::zero()));
    }
    let mut gram = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for i in 0..k {
        rhs[i] = basis[i].inner(phi)?;
        for j in i..k {
            let v = basis[i].inner(&basis[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let c = pinv_solve_sym(&gram, &rhs, lit(1e-12));
    let mut out = phi.scale(T::zero());
    for (b, &ci) in basis.iter().zip(c.iter()) {
        out = out.add(&b.scale(ci))?;
    }
    Ok(out)
}

pub fn eval_g<T: Real>(fb: &FilterBank<T>, theta: T) -> CMat<T> {
    fb.eval_g(theta)
}

pub fn gamma_apply<T: Real>(fb: &FilterBank<T>, phi: &SpectrumGrid<T>) -> Result<HermMat<T>> {
    GammaOp::new(fb, phi.grid_size()).apply(phi)
}

pub fn gamma_adjoint<T: Real>(fb: &FilterBank<T>, m: &HermMat<T>, grid_size: usize) -> Result<SpectrumGrid<T>> {
    GammaOp::new(fb, grid_size).adjoint(m)
}

/// `|(I - Π_B)(Σ - AΣA*)(I - Π_B)| / |Σ|`; zero iff `Σ ∈ Range Γ`.
pub fn range_residual<T: Real>(fb: &FilterBank<T>, sigma: &HermMat<T>) -> Result<T> {
    let n = fb.state_dim();
    if sigma.dim() != n {
        return Err(Error::DimensionMismatch(format!("Σ is {}x{}, state dimension {n}", sigma.dim(), sigma.dim())));
    }
    let p = CMat::identity(n, n) - fb.range_projector();
    let s = sigma.as_matrix();
    let d = s - fb.a() * s * fb.a().adjoint();
    let r = &p * d * &p;
    let ns = sigma.norm();
    Ok(if ns > T::zero() { r.norm() / ns } else { r.norm() })
}

/// Georgiou's multiplier `Λ_c = Σ^{-1} B (B* Σ^{-1} B)^{-1} B* Σ^{-1}`.
pub fn georgiou_lambda<T: Real>(fb: &FilterBank<T>, sigma: &HermMat<T>) -> Result<HermMat<T>> {
    let si = sigma.inverse_pd()?.into_matrix();
    let b = fb.b();
    let core = b.adjoint() * &si * b;
    let ch = pd_cholesky(&hermitian_part(&core)).ok_or(Error::DegenerateLambda)?;
    let core_inv = ch.inverse();
    HermMat::new(&si * b * core_inv * b.adjoint() * &si)
}

/// Maximum-entropy spectrum `Φ_c = (G* Λ_c G)^{-1}` matching `Γ(Φ_c) = Σ`.
pub fn maxent_spectrum<T: Real>(fb: &FilterBank<T>, sigma: &HermMat<T>, grid_size: usize) -> Result<(SpectrumGrid<T>, HermMat<T>)> {
    if sigma.dim() != fb.state_dim() {
        return Err(Error::DimensionMismatch(format!("Σ is {}x{}, state dimension {}", sigma.dim(), sigma.dim(), fb.state_dim())));
    }
    sigma.require_pd("Σ")?;
    let r = range_residual(fb, sigma)?;
    if r > lit(RANGE_TOL) {
        return Err(Error::NotInRange { residual: to_f64(r) });
    }
    let lambda = georgiou_lambda(fb, sigma)?;
    let q = gamma_adjoint(fb, &lambda, grid_size)?;
    let phi = q.inverse()?;
    Ok((phi, lambda))
}

/// Interpolation data `Z(p_i) = w_i` for a positive-real `Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct PickProblem<T: Real> {
    points: Vec<Cplx<T>>,
    values: Vec<Cplx<T>>,
}

impl<T: Real> PickProblem<T> {
    pub fn new(points: Vec<Cplx<T>>, values: Vec<Cplx<T>>) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::DimensionMismatch("need the same positive number of points and values".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(cabs(*p) < T::one()) {
                return Err(Error::InvalidInput(format!("point {i} is not inside the unit disc")));
            }
            for q in &points[..i] {
                if cabs(*p - *q) <= lit::<T>(1e-12) {
                    return Err(Error::InvalidInput(format!("point {i} repeats an earlier point")));
                }
            }
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &[Cplx<T>] {
        &self.points
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    /// `Σ_ij = (w_i + conj w_j) / (1 - p_i conj p_j)`.
    pub fn pick_matrix(&self) -> HermMat<T> {
        let n = self.points.len();
        let one = creal(T::one());
        let m = CMat::from_fn(n, n, |i, j| {
            (self.values[i] + self.values[j].conj()) / (one - self.points[i] * self.points[j].conj())
        });
        HermMat::new(m).expect("finite Pick matrix")
    }
}

/// Filter bank `A = diag(p)`, `B = 1` and `Σ` = the Pick matrix.
pub fn pick_to_problem<T: Real>(pp: &PickProblem<T>) -> Result<(FilterBank<T>, HermMat<T>)> {
    let sigma = pp.pick_matrix();
    if !sigma.is_positive_definite() {
        return Err(Error::PickNotPD { min_eig: to_f64(sigma.min_eigenvalue()) });
    }
    let n = pp.points.len();
    let a = CMat::from_diagonal(&DVector::from_vec(pp.points.clone()));
    let b = CMat::from_element(n, 1, creal(T::one()));
    Ok((FilterBank::new(a, b)?, sigma))
}

/// `w_k = (1/4π) ∫ (e^{jω} + p_k)/(e^{jω} - p_k) Φ(ω) dω` for a scalar grid.
pub fn recover_interpolants<T: Real>(phi: &SpectrumGrid<T>, points: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
    let vals = phi.scalar_values()?;
    let g = phi.grid_size();
    let half = lit::<T>(0.5);
    points
        .iter()
        .map(|&p| {
            if !(cabs(p) < T::one()) {
                return Err(Error::InvalidInput("interpolation point outside the unit disc".into()));
            }
            let s = pairwise(g, &cplx(T::zero(), T::zero()), &|k| {
                let e = cis(phi.theta(k));
                (e + p) / (e - p) * vals[k]
            });
            Ok(s * half / lit::<T>(g as f64))
        })
        .collect()
}

/// Solves `X = A X A* + Q` by fixed-point iteration.
pub fn stein_fixed_point<T: Real>(a: &CMat<T>, q: &CMat<T>, tol: T, max_iter: usize) -> CMat<T> {
    let mut x = q.clone();
    for _ in 0..max_iter {
        let next = a * &x * a.adjoint() + q;
        let diff = (&next - &x).norm();
        x = next;
        if diff <= tol * x.norm() {
            break;
        }
    }
    hermitian_part(&x)
}

/// Real coordinates of Hermitian matrices, re-exported for callers building
/// multipliers.
pub fn coords<T: Real>(m: &HermMat<T>) -> DVector<T> {
    herm_coords(m.as_matrix())
}
