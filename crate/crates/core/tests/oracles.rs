//! Solvers against brute-force searches and independent optimality checks.

mod common;

use common::*;
use maxent::circulant::{circulant_complete, BlockCirculant, ReciprocalSpec};
use maxent::dempster::{complete, Pattern};
use maxent::f64::{CMat, FilterBank, HermMat, PartialCov, SpectrumGrid};
use maxent::gibbs::{fit, FeatureProblem};
use maxent::moment::{maxent_spectrum, GammaOp};
use maxent::prior::{
    cov_approx, default_burn_in, is_spectral_solve, kl_spectral_solve, matrix_prior_solve, sample_covariance,
    MatrixPriorProblem, SpectralPriorProblem,
};
use maxent::scalar::creal;
use maxent::AffineProblem;
use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const G: usize = 1024;

/// Minimizes `f` over a box by nested grid refinement; `f` returns `None`
/// outside the domain.
fn zoom2<F: Fn(f64, f64) -> Option<f64>>(f: F, center: (f64, f64), half: f64, final_pitch: f64) -> (f64, f64) {
    let mut c = center;
    let mut half = half;
    let mut pitch = half / 20.0;
    while pitch > final_pitch {
        let steps = (half / pitch).round() as i64;
        let mut best = (f64::INFINITY, c);
        for a in -steps..=steps {
            for b in -steps..=steps {
                let x = (c.0 + a as f64 * pitch, c.1 + b as f64 * pitch);
                if let Some(v) = f(x.0, x.1) {
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
        }
        c = best.1;
        half = 4.0 * pitch;
        pitch /= 5.0;
    }
    c
}

fn log_det_real(m: &DMatrix<f64>) -> Option<f64> {
    let ch = m.clone().cholesky()?;
    Some(2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

#[test]
fn dempster_two_free_entries_match_grid_search() {
    let mut r = rng(101);
    for _ in 0..3 {
        let full = random_spd(&mut r, 4, 0.5);
        let pattern = Pattern::new(4, &[(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let p = PartialCov::from_matrix(&HermMat::from_real(&full).unwrap(), &pattern).unwrap();
        let c = complete(&p, 1e-12, 200).unwrap();
        let neg_log_det = |x: f64, y: f64| {
            let mut m = full.clone();
            m[(0, 2)] = x;
            m[(2, 0)] = x;
            m[(1, 3)] = y;
            m[(3, 1)] = y;
            log_det_real(&m).map(|v| -v)
        };
        let (x, y) = zoom2(neg_log_det, (full[(0, 2)], full[(1, 3)]), 4.0, 1e-9);
        assert!((c.sigma.get(0, 2).re - x).abs() < 1e-6, "{} vs {x}", c.sigma.get(0, 2).re);
        assert!((c.sigma.get(1, 3).re - y).abs() < 1e-6, "{} vs {y}", c.sigma.get(1, 3).re);
    }
}

#[test]
fn cov_approx_matches_grid_search_on_range_slice() {
    let mut r = rng(102);
    for _ in 0..3 {
        let a = random_real(&mut r, 2, 2) * 0.6;
        let b = random_real(&mut r, 2, 1);
        let fb = FilterBank::new(a.map(creal), b.map(creal)).unwrap();
        let sh = random_spd(&mut r, 2, 0.3);
        let sol = cov_approx(&fb, &HermMat::from_real(&sh).unwrap(), 1e-12, 500).unwrap();

        // real symmetric Σ = [[x, y], [y, z]] in Range Γ iff q'(Σ - A Σ A')q = 0
        // with q ⊥ B; the linear functional in (x, y, z) has a 2-D kernel
        let q = nalgebra::Vector2::new(-b[(1, 0)], b[(0, 0)]);
        let functional = |s: &Matrix2<f64>| {
            let a2 = Matrix2::new(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            (q.transpose() * (s - a2 * s * a2.transpose()) * q)[(0, 0)]
        };
        let coeff = [
            functional(&Matrix2::new(1.0, 0.0, 0.0, 0.0)),
            functional(&Matrix2::new(0.0, 1.0, 1.0, 0.0)),
            functional(&Matrix2::new(0.0, 0.0, 0.0, 1.0)),
        ];
        let kernel = null_space(&DMatrix::from_row_slice(1, 3, &coeff));
        let (u, v) = (kernel[0].clone(), kernel[1].clone());
        let sigma_of = |s: f64, t: f64| {
            let w = &u * s + &v * t;
            DMatrix::from_row_slice(2, 2, &[w[0], w[1], w[1], w[2]])
        };
        let shi = sh.clone().try_inverse().unwrap();
        let objective = |s: f64, t: f64| {
            let m = sigma_of(s, t);
            log_det_real(&m).map(|ld| (&shi * &m).trace() - ld)
        };
        let target = sol.sigma.real();
        let start = (
            (DVector::from_column_slice(&[target[(0, 0)], target[(0, 1)], target[(1, 1)]]).dot(&u)).round(),
            (DVector::from_column_slice(&[target[(0, 0)], target[(0, 1)], target[(1, 1)]]).dot(&v)).round(),
        );
        let (s, t) = zoom2(objective, start, 8.0, 1e-9);
        let err = (sigma_of(s, t) - target).abs().max();
        assert!(err < 1e-6, "grid search differs by {err:e}");
    }
}

/// Orthonormal basis of the null space of a wide matrix, from the
/// eigenvectors of `C' C` with negligible eigenvalues.
fn null_space(c: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let eig = (c.transpose() * c).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    (0..c.ncols())
        .filter(|&i| eig.eigenvalues[i] <= 1e-12 * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Null-space directions of `Γ` among low-degree real trigonometric
/// polynomials: `h` with `Γ(h) = 0` on the grid.
fn feasible_directions(fb: &FilterBank, degree: usize) -> Vec<Vec<f64>> {
    let op = GammaOp::new(fb, G);
    let funcs: Vec<Box<dyn Fn(f64) -> f64>> = (0..=degree)
        .flat_map(|j| {
            let j = j as f64;
            let c: Box<dyn Fn(f64) -> f64> = Box::new(move |t: f64| (j * t).cos());
            let s: Box<dyn Fn(f64) -> f64> = Box::new(move |t: f64| (j * t).sin());
            if j == 0.0 { vec![c] } else { vec![c, s] }
        })
        .collect();
    let grids: Vec<SpectrumGrid> = funcs.iter().map(|f| SpectrumGrid::scalar_fn(G, f).unwrap()).collect();
    let cols: Vec<DVector<f64>> = grids.iter().map(|g| op.apply(g).unwrap().coords()).collect();
    let mat = DMatrix::from_columns(&cols);
    null_space(&mat)
        .into_iter()
        .map(|w| {
            let vals: Vec<f64> = (0..G)
                .map(|k| grids.iter().enumerate().map(|(c, g)| w[c] * g.value(k)[(0, 0)].re).sum())
                .collect();
            let sup = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            vals.iter().map(|v| v / sup).collect()
        })
        .collect()
}

fn scalar(phi: &SpectrumGrid) -> Vec<f64> {
    phi.scalar_values().unwrap()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// `J(Φ ± εh) ≥ J(Φ)` for every feasible direction, with a vanishing
/// first-order change.
fn assert_stationary_minimum(j: impl Fn(&[f64]) -> f64, phi: &[f64], dirs: &[Vec<f64>]) {
    assert!(!dirs.is_empty());
    let floor = phi.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let step = |h: &[f64], e: f64| -> Vec<f64> { phi.iter().zip(h).map(|(p, d)| p + e * d).collect() };
    let base = j(phi);
    for h in dirs {
        let eps = 0.05 * floor;
        let (jp, jm) = (j(&step(h, eps)), j(&step(h, -eps)));
        assert!(jp >= base && jm >= base, "feasible step lowers the objective: {base} -> {jp}, {jm}");
        let curvature = (jp + jm - 2.0 * base) / (eps * eps);
        let e = 1e-4 * floor;
        let slope = (j(&step(h, e)) - j(&step(h, -e))) / (2.0 * e);
        assert!(slope.abs() <= 1e-6 * curvature.max(1.0), "slope {slope:e} vs curvature {curvature:e}");
    }
}

#[test]
fn maxent_spectrum_is_entropy_stationary_along_feasible_directions() {
    let mut r = rng(103);
    for _ in 0..4 {
        let n = 2 + r.random_range(0..2);
        let fb = random_bank(&mut r, n, 1, 0.7);
        let sigma = GammaOp::new(&fb, G).apply(&random_scalar_spectrum(&mut r, G)).unwrap();
        let (phi, _) = maxent_spectrum(&fb, &sigma, G).unwrap();
        let dirs = feasible_directions(&fb, 8);
        assert_stationary_minimum(|p| -mean(p.iter().map(|v| v.ln())), &scalar(&phi), &dirs);
    }
}

#[test]
fn is_and_kl_solutions_minimize_their_divergences() {
    let mut r = rng(104);
    for _ in 0..4 {
        let n = 2 + r.random_range(0..2);
        let fb = random_bank(&mut r, n, 1, 0.7);
        let sigma = GammaOp::new(&fb, G).apply(&random_scalar_spectrum(&mut r, G)).unwrap();
        let psi = random_scalar_spectrum(&mut r, G);
        let p = SpectralPriorProblem::new(psi.clone(), fb.clone(), sigma).unwrap();
        let dirs = feasible_directions(&fb, 8);
        let pv = scalar(&psi);
        let is = is_spectral_solve(&p, 1e-12, 500).unwrap();
        let d_is = |phi: &[f64]| mean(phi.iter().zip(&pv).map(|(f, s)| f / s - (f / s).ln() - 1.0));
        assert_stationary_minimum(d_is, &scalar(&is.phi), &dirs);
        let kl = kl_spectral_solve(&p, 1e-12, 500).unwrap();
        let d_kl = |phi: &[f64]| mean(phi.iter().zip(&pv).map(|(f, s)| s * (s / f).ln()));
        assert_stationary_minimum(d_kl, &scalar(&kl.phi), &dirs);
    }
}

#[test]
fn one_state_is_multiplier_matches_bisection() {
    // n = 1: Φ_λ = (Ψ^{-1} + λ|G|^2)^{-1}, and the single moment decreases in λ
    let fb = FilterBank::new(CMat::from_element(1, 1, creal(0.4)), CMat::from_element(1, 1, creal(1.0))).unwrap();
    let gain: Vec<f64> = (0..G)
        .map(|k| {
            let g = fb.eval_g(-std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / G as f64);
            g.norm_squared()
        })
        .collect();
    let mut r = rng(105);
    for _ in 0..4 {
        let psi = random_scalar_spectrum(&mut r, G);
        let target = uniform(&mut r, 0.5, 2.0);
        let pv = scalar(&psi);
        let moment = |lam: f64| mean(pv.iter().zip(&gain).map(|(s, g)| g / (1.0 / s + lam * g)));
        let lam = bisect(|l| target - moment(l), -1.0 / pv.iter().zip(&gain).map(|(s, g)| s * g).fold(0.0, f64::max) + 1e-12, 1e6, 1e-14);
        let p = SpectralPriorProblem::new(psi, fb.clone(), HermMat::diag(&[target])).unwrap();
        let sol = is_spectral_solve(&p, 1e-13, 500).unwrap();
        let got = scalar(&sol.phi);
        let err = got
            .iter()
            .zip(pv.iter().zip(&gain))
            .map(|(f, (s, g))| (f - 1.0 / (1.0 / s + lam * g)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "IS spectrum differs from bisection by {err:e}");
    }
}

#[test]
fn matrix_prior_minimizes_divergence_along_free_entries() {
    let mut r = rng(106);
    for _ in 0..4 {
        let n = 3 + r.random_range(0..3);
        let s0 = HermMat::from_real(&random_spd(&mut r, n, 0.5)).unwrap();
        let pattern = Pattern::new(n, &(0..n).map(|i| (i, i)).chain((0..n - 1).map(|i| (i, i + 1))).collect::<Vec<_>>()).unwrap();
        let pc = PartialCov::from_matrix(&s0, &pattern).unwrap();
        let basis = pattern.free_basis();
        let w = AffineProblem::new(pc.zero_filled(), basis.clone()).unwrap();
        let prior = HermMat::from_real(&random_spd(&mut r, n, 0.5)).unwrap();
        let p = MatrixPriorProblem::new(prior.clone(), w).unwrap();
        let m = matrix_prior_solve(&p, 1e-12, 500).unwrap().m;
        let ni = prior.inverse().unwrap();
        let div = |x: &CMat| {
            let y = ni.as_matrix() * x;
            Some(y.trace().re - dense_log_det(x)? + dense_log_det(prior.as_matrix())? - n as f64)
        };
        let base = div(m.as_matrix()).unwrap();
        for e in basis.elements() {
            for s in [-1e-3, 1e-3] {
                let v = div(&(m.as_matrix() + e.as_matrix() * creal(s))).unwrap();
                assert!(v >= base, "free step lowers the divergence");
                assert!(v - base <= 1e-4, "divergence is not flat to first order: {:e}", v - base);
            }
        }
    }
}

#[test]
fn gibbs_maximizes_entropy_on_feasible_set() {
    let mut r = rng(107);
    for _ in 0..5 {
        let (d, k) = (2, 7);
        let l = random_real(&mut r, d, k);
        let mu: Vec<f64> = (0..k).map(|_| uniform(&mut r, 0.5, 2.0)).collect();
        let raw: Vec<f64> = (0..k).map(|_| uniform(&mut r, 0.2, 1.0)).collect();
        let z: f64 = raw.iter().zip(&mu).map(|(a, b)| a * b).sum();
        let target = &l * DVector::from_iterator(k, raw.iter().zip(&mu).map(|(a, b)| a / z * b));
        let fp = FeatureProblem::new(l.clone(), target, mu.clone()).unwrap();
        let p = fit(&fp, 1e-13, 200).unwrap().p.values().to_vec();
        // directions preserving the μ-weighted moments and the mass
        let cons = DMatrix::from_fn(d + 1, k, |i, j| if i == d { mu[j] } else { l[(i, j)] * mu[j] });
        let dirs = null_space(&cons);
        assert_eq!(dirs.len(), k - d - 1);
        let entropy = |q: &[f64]| -q.iter().zip(&mu).map(|(a, m)| a * a.ln() * m).sum::<f64>();
        let base = entropy(&p);
        let pmin = p.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        for h in &dirs {
            for s in [-1e-3, 1e-3] {
                let q: Vec<f64> = p.iter().enumerate().map(|(j, v)| v + s * pmin * h[j]).collect();
                assert!(entropy(&q) <= base, "feasible step raises the entropy");
            }
        }
    }
}

#[test]
fn white_noise_sample_covariance_approaches_lyapunov() {
    let mut r = rng(108);
    let fb = random_bank(&mut r, 3, 1, 0.7);
    let len = 40_000;
    let y: Vec<DVector<_>> = (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut r);
            DVector::from_element(1, creal(v))
        })
        .collect();
    let burn = default_burn_in(&fb);
    let s = sample_covariance(&fb, &y, burn).unwrap();
    let want = stein_kron(fb.a(), &(fb.b() * fb.b().adjoint()));
    let err = (s.as_matrix() - &want).norm() / want.norm();
    assert!(err < 5.0 / ((len - burn) as f64).sqrt(), "relative error {err:e}");
}

#[test]
fn banded_precision_round_trips_through_completion() {
    let mut r = rng(109);
    for &(nc, m, n) in &[(8usize, 1usize, 1usize), (10, 2, 2), (12, 2, 3), (9, 3, 1)] {
        let params: Vec<CMat> = (0..=n)
            .map(|d| if d == 0 { random_hpd(&mut r, m, 3.0 * m as f64).into_matrix() } else { random_cmat(&mut r, m, m) * creal(0.3) })
            .collect();
        let prec = BlockCirculant::banded(nc, &params).unwrap();
        assert!(prec.is_positive_definite());
        let sigma = prec.inverse().unwrap();
        let lags = sigma.first_block_row()[..=n].iter().map(|b| b.adjoint()).collect();
        let spec = ReciprocalSpec::new(nc, lags).unwrap();
        let sol = circulant_complete(&spec, None, 1e-12, 1000).unwrap();
        let back = sol.sigma.inverse().unwrap();
        let err = max_block_diff(back.first_block_row(), prec.first_block_row());
        assert!(err < 1e-6, "N={nc}, m={m}, n={n}: precision differs by {err:e}");
    }
}

#[test]
fn circulant_fft_quantities_match_dense_algebra() {
    let mut r = rng(110);
    for &(nc, m) in &[(5usize, 1usize), (8, 2), (7, 3)] {
        let symbol: Vec<CMat> = (0..nc).map(|_| random_hpd(&mut r, m, 0.5).into_matrix()).collect();
        let c = BlockCirculant::from_symbol(m, &symbol).unwrap();
        let dense = c.materialize();
        let ld = dense_log_det(dense.as_matrix()).unwrap();
        assert!((c.log_det().unwrap() - ld).abs() < 1e-9 * ld.abs().max(1.0));
        let inv = c.inverse().unwrap().materialize();
        let eye = dense.as_matrix() * inv.as_matrix() - CMat::identity(nc * m, nc * m);
        assert!(eye.norm() < 1e-10);
    }
}
