//! Zero-shot classification of image embeddings with one regularized Gaussian
//! per class.
//!
//! Reference embeddings for each class (typically produced from generated
//! images) are summarized by a mean and an inverse Cholesky factor of
//! `Σ + εI`. New embeddings are scored with Bayes' rule in the log domain.
//! The [`normality`] module checks how Gaussian the per-class features are.
//!
//! The numeric modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the working precision to `f64`, which is what the file formats
//! and the CLI use.

// `!(x > 0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ablate;
pub mod archive;
pub mod bench;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod gmm;
pub mod linalg;
pub mod normality;
pub mod scalar;

pub use archive::{EmbeddingArchive, GenerationManifest, ManifestEntry};
pub use error::{ErrorKind, GdcError, Result};
pub use gaussian::{fit_class, log_density, DEFAULT_EPS};
pub use linalg::{cholesky_factor, invert_lower, solve_lower, sym_eig};
pub use normality::{audit, pca_project, shapiro_wilk, NormalityReport, SwResult};
pub use scalar::Real;

pub type SymMatrix = linalg::SymMatrix<f64>;
pub type LowerTriangular = linalg::LowerTriangular<f64>;
pub type Spectrum = linalg::Spectrum<f64>;
pub type ClassGaussian = gaussian::ClassGaussian<f64>;
pub type GdcModel = gmm::GdcModel<f64>;
pub type Posterior = gmm::Posterior<f64>;
pub type PcaProjection = normality::PcaProjection<f64>;

pub type SymMatrixF32 = linalg::SymMatrix<f32>;
pub type LowerTriangularF32 = linalg::LowerTriangular<f32>;
pub type ClassGaussianF32 = gaussian::ClassGaussian<f32>;
pub type GdcModelF32 = gmm::GdcModel<f32>;
