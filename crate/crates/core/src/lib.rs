//! Maximum-entropy solvers over affine constraint sets.
//!
//! Every solver returns a point whose entropy gradient is orthogonal to the
//! constraint subspace; [`check`] recomputes that certificate independently.

// `!(x > 0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod burg;
pub mod check;
pub mod circulant;
pub mod dempster;
pub mod dual;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod moment;
pub mod prior;
pub mod scalar;
pub mod spectrum;
pub mod sum;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

/// Double-precision aliases of the generic types.
pub mod f64 {
    pub type HermMat = crate::linalg::HermMat<f64>;
    pub type SubspaceBasis = crate::linalg::SubspaceBasis<f64>;
    pub type AffineProblem = crate::linalg::AffineProblem<f64>;
    pub type SpectrumGrid = crate::spectrum::SpectrumGrid<f64>;
    pub type FilterBank = crate::moment::FilterBank<f64>;
    pub type PartialCov = crate::dempster::PartialCov<f64>;
    pub type CovSequence = crate::burg::CovSequence<f64>;
    pub type MatrixPriorProblem = crate::prior::MatrixPriorProblem<f64>;
    pub type SpectralPriorProblem = crate::prior::SpectralPriorProblem<f64>;
    pub type ReciprocalSpec = crate::circulant::ReciprocalSpec<f64>;
    pub type BlockCirculant = crate::circulant::BlockCirculant<f64>;
    pub type FeatureProblem = crate::gibbs::FeatureProblem<f64>;
    pub type ProbVec = crate::gibbs::ProbVec<f64>;
    pub type BridgeProblem = crate::bridge::BridgeProblem<f64>;
    pub type CMat = crate::linalg::CMat<f64>;
}

pub use check::Certificate;
pub use linalg::{AffineProblem, HermMat, SubspaceBasis};
pub use spectrum::SpectrumGrid;
