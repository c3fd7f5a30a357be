//! Posterior moments for a normal linear regression with unknown noise
//! and coefficient scales.
//!
//! The model places independent normal priors on the coefficients and a
//! lognormal-by-default prior on their common scale; the noise scale
//! carries its own weakly informative prior. Coefficients are integrated
//! out analytically after rotating into the right singular basis of the
//! design matrix, which collapses the posterior to two dimensions. The
//! remaining integrals over the two scales run on an adaptive trapezoid
//! grid, or through a random-walk sampler when a full chain is wanted.
//!
//! The typical flow is one call to [`fit`], or the explicit pipeline:
//!
//! ```
//! use svdmarg::{
//!     generate_synthetic, CovMode, Hyperparams, MarginalModel,
//!     moment_functionals, posterior_summary, quadrature, svd,
//! };
//!
//! let (data, _) = generate_synthetic::<f64>(40, 3, 1);
//! let hyper = Hyperparams::default();
//! let basis = svd::factorize(&data)?;
//! let model = MarginalModel::new(basis, &hyper)?;
//! let grid = quadrature::auto_bounds(&model, &hyper)?;
//! let acc = quadrature::integrate(&model, &grid, &moment_functionals(3, CovMode::Exact))?;
//! let summary = posterior_summary(&model, &acc, CovMode::Exact)?;
//! assert_eq!(summary.mean_beta.len(), 3);
//! # Ok::<(), svdmarg::Error>(())
//! ```
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases at the crate root pin the common choice.

pub mod error;
pub mod marginal;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod svd;

pub use error::{Error, Result};
pub use marginal::{Coeffs, ConditionalGaussian, MarginalModel};
pub use model::{generate_synthetic, Hyperparams, RegressionData};
pub use moments::{moment_functionals, posterior_summary, CovMode, PosteriorSummary};
pub use quadrature::{auto_bounds, integrate, Functional, GridSpec, MomentAccumulator};
pub use sampler::{batch_mcse, draw_beta, run_chain, Chain, SamplerConfig};
pub use scalar::Scalar;
pub use svd::SvdBasis;

/// Double-precision [`RegressionData`].
pub type RegressionData64 = RegressionData<f64>;
/// Double-precision [`Hyperparams`].
pub type Hyperparams64 = Hyperparams<f64>;
/// Double-precision [`MarginalModel`].
pub type MarginalModel64 = MarginalModel<f64>;
/// Double-precision [`PosteriorSummary`].
pub type PosteriorSummary64 = PosteriorSummary<f64>;
/// Double-precision [`GridSpec`].
pub type GridSpec64 = GridSpec<f64>;

/// Runs the full quadrature pipeline: factorize, marginalize, place the
/// grid, integrate the moment functionals, and assemble the summary.
///
/// Returns the grid alongside the summary so callers can report or reuse
/// the integration window.
pub fn fit<T: Scalar>(
    data: &RegressionData<T>,
    hyper: &Hyperparams<T>,
    mode: CovMode,
) -> Result<(PosteriorSummary<T>, GridSpec<T>)> {
    let basis = svd::factorize(data)?;
    let model = MarginalModel::new(basis, hyper)?;
    let grid = auto_bounds(&model, hyper)?;
    let acc = integrate(&model, &grid, &moment_functionals(data.k(), mode))?;
    let summary = posterior_summary(&model, &acc, mode)?;
    Ok((summary, grid))
}
