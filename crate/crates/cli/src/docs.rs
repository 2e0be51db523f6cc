//! JSON documents exchanged by the subcommands.

use anyhow::{anyhow, bail, Context, Result};
use maxent::bridge::BridgeProblem;
use maxent::burg::CovSequence;
use maxent::check::{self, Certificate};
use maxent::circulant::{BlockCirculant, ReciprocalSpec};
use maxent::dempster::PartialCov;
use maxent::gibbs::FeatureProblem;
use maxent::io::{MatrixJson, SpectrumJson};
use maxent::linalg::{AffineProblem, CMat, HermMat, SubspaceBasis};
use maxent::moment::{pick_to_problem, FilterBank, PickProblem};
use maxent::prior::{MatrixPriorProblem, SpectralPriorProblem};
use maxent::scalar::cplx;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Problem description; the `type` field selects the family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProblemDoc {
    Dempster {
        n: usize,
        entries: Vec<(usize, usize, f64)>,
    },
    Burg {
        lags: Vec<MatrixJson>,
        #[serde(default)]
        missing: Vec<usize>,
    },
    Moment {
        a: MatrixJson,
        b: MatrixJson,
        sigma: MatrixJson,
    },
    Pick {
        points: Vec<[f64; 2]>,
        values: Vec<[f64; 2]>,
    },
    Covapprox {
        a: MatrixJson,
        b: MatrixJson,
        sigma_hat: MatrixJson,
    },
    IsApprox {
        a: MatrixJson,
        b: MatrixJson,
        sigma: MatrixJson,
        prior: SpectrumJson,
    },
    KlApprox {
        a: MatrixJson,
        b: MatrixJson,
        sigma: MatrixJson,
        prior: SpectrumJson,
    },
    MatrixPrior {
        prior: MatrixJson,
        offset: MatrixJson,
        basis: Vec<MatrixJson>,
    },
    Circulant {
        circle_len: usize,
        lags: Vec<MatrixJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<Vec<MatrixJson>>,
    },
    Gibbs {
        features: Vec<Vec<f64>>,
        target: Vec<f64>,
        mu: Vec<f64>,
    },
    Bridge {
        kernel: Vec<Vec<f64>>,
        rho0: Vec<f64>,
        rho1: Vec<f64>,
    },
}

/// Full output of a solver subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputDoc {
    pub problem: ProblemDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub certificate: Certificate,
}

pub fn herm(m: &MatrixJson, what: &str) -> Result<HermMat<f64>> {
    m.to_herm().with_context(|| format!("reading {what}"))
}

pub fn cmat(m: &MatrixJson, what: &str) -> Result<CMat<f64>> {
    m.to_cmat().with_context(|| format!("reading {what}"))
}

pub fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        bail!("{what}: rows have different lengths");
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn filter_bank(a: &MatrixJson, b: &MatrixJson) -> Result<FilterBank<f64>> {
    Ok(FilterBank::new(cmat(a, "A")?, cmat(b, "B")?)?)
}

pub fn spectral_problem(a: &MatrixJson, b: &MatrixJson, sigma: &MatrixJson, prior: &SpectrumJson) -> Result<SpectralPriorProblem<f64>> {
    Ok(SpectralPriorProblem::new(prior.to_grid()?, filter_bank(a, b)?, herm(sigma, "Σ")?)?)
}

pub fn circulant_rows(rows: &[MatrixJson], what: &str) -> Result<Vec<CMat<f64>>> {
    rows.iter().map(|m| cmat(m, what)).collect()
}

fn field<'a>(solution: &'a Value, name: &str) -> Result<&'a Value> {
    solution.get(name).ok_or_else(|| anyhow!("solution has no \"{name}\" field"))
}

fn parse<T: for<'de> Deserialize<'de>>(v: &Value, name: &str) -> Result<T> {
    serde_json::from_value(v.clone()).with_context(|| format!("malformed \"{name}\" field"))
}

impl ProblemDoc {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Dempster { .. } => "dempster",
            Self::Burg { .. } => "burg",
            Self::Moment { .. } => "moment",
            Self::Pick { .. } => "pick",
            Self::Covapprox { .. } => "covapprox",
            Self::IsApprox { .. } => "is-approx",
            Self::KlApprox { .. } => "kl-approx",
            Self::MatrixPrior { .. } => "matrix-prior",
            Self::Circulant { .. } => "circulant",
            Self::Gibbs { .. } => "gibbs",
            Self::Bridge { .. } => "bridge",
        }
    }

    pub fn partial_cov(n: usize, entries: &[(usize, usize, f64)]) -> Result<PartialCov<f64>> {
        Ok(PartialCov::new(n, entries)?)
    }

    pub fn pick_problem(points: &[[f64; 2]], values: &[[f64; 2]]) -> Result<PickProblem<f64>> {
        let p = points.iter().map(|z| cplx(z[0], z[1])).collect();
        let w = values.iter().map(|z| cplx(z[0], z[1])).collect();
        Ok(PickProblem::new(p, w)?)
    }

    /// Recomputes the certificate of `solution` from the problem data alone.
    pub fn certify(&self, solution: &Value, tol: f64) -> Result<Certificate> {
        let spectrum = || -> Result<_> {
            let s: SpectrumJson = parse(field(solution, "spectrum")?, "spectrum")?;
            Ok(s.to_grid()?)
        };
        let sigma = || -> Result<HermMat<f64>> {
            let m: MatrixJson = parse(field(solution, "sigma")?, "sigma")?;
            herm(&m, "solution Σ")
        };
        let cert = match self {
            Self::Dempster { n, entries } => check::check_dempster(&Self::partial_cov(*n, entries)?, &sigma()?, tol)?,
            Self::Burg { lags, missing } => {
                let lags = lags.iter().map(|m| cmat(m, "lag")).collect::<Result<Vec<_>>>()?;
                check::check_burg(&CovSequence::new(lags, missing)?, &spectrum()?, tol)?
            }
            Self::Moment { a, b, sigma: s } => check::check_moment(&filter_bank(a, b)?, &herm(s, "Σ")?, &spectrum()?, tol)?,
            Self::Pick { points, values } => {
                let (fb, s) = pick_to_problem(&Self::pick_problem(points, values)?)?;
                check::check_moment(&fb, &s, &spectrum()?, tol)?
            }
            Self::Covapprox { a, b, sigma_hat } => {
                check::check_cov_approx(&filter_bank(a, b)?, &herm(sigma_hat, "Σ̂")?, &sigma()?, tol)?
            }
            Self::IsApprox { a, b, sigma: s, prior } => check::check_is(&spectral_problem(a, b, s, prior)?, &spectrum()?, tol)?,
            Self::KlApprox { a, b, sigma: s, prior } => check::check_kl(&spectral_problem(a, b, s, prior)?, &spectrum()?, tol)?,
            Self::MatrixPrior { prior, offset, basis } => {
                let n = herm(offset, "offset")?.dim();
                let basis = basis.iter().map(|m| herm(m, "basis element")).collect::<Result<Vec<_>>>()?;
                let w = AffineProblem::new(herm(offset, "offset")?, SubspaceBasis::new(n, basis)?)?;
                let p = MatrixPriorProblem::new(herm(prior, "prior")?, w)?;
                check::check_matrix_prior(&p, &sigma()?, tol)?
            }
            Self::Circulant { circle_len, lags, prior } => {
                let spec = ReciprocalSpec::new(*circle_len, circulant_rows(lags, "lag")?)?;
                let prior = match prior {
                    Some(r) => Some(BlockCirculant::new(spec.block_dim(), circulant_rows(r, "prior row")?)?),
                    None => None,
                };
                let rows: Vec<MatrixJson> = parse(field(solution, "row")?, "row")?;
                let sig = BlockCirculant::new(spec.block_dim(), circulant_rows(&rows, "solution row")?)?;
                check::check_circulant(&spec, prior.as_ref(), &sig, tol)?
            }
            Self::Gibbs { features, target, mu } => {
                let fp = feature_problem(features, target, mu)?;
                let p: Vec<f64> = parse(field(solution, "p")?, "p")?;
                check::check_gibbs(&fp, &p, tol)?
            }
            Self::Bridge { kernel, rho0, rho1 } => {
                let bp = bridge_problem(kernel, rho0, rho1)?;
                let q: Vec<Vec<f64>> = parse(field(solution, "joint")?, "joint")?;
                check::check_bridge(&bp, &rows_to_matrix(&q, "joint")?, tol)?
            }
        };
        let iterations = solution.get("iterations").and_then(Value::as_u64).unwrap_or(0) as usize;
        Ok(cert.with_iterations(iterations))
    }
}

pub fn feature_problem(features: &[Vec<f64>], target: &[f64], mu: &[f64]) -> Result<FeatureProblem<f64>> {
    let l = if features.is_empty() { DMatrix::zeros(0, mu.len()) } else { rows_to_matrix(features, "features")? };
    Ok(FeatureProblem::new(l, DVector::from_column_slice(target), mu.to_vec())?)
}

pub fn bridge_problem(kernel: &[Vec<f64>], rho0: &[f64], rho1: &[f64]) -> Result<BridgeProblem<f64>> {
    Ok(BridgeProblem::new(
        rows_to_matrix(kernel, "kernel")?,
        DVector::from_column_slice(rho0),
        DVector::from_column_slice(rho1),
    )?)
}
