//! Posterior summaries assembled from integrated moments.
//!
//! With `m(sigma)` and `v(sigma)` the conditional mean and variance of the
//! rotated coefficients, the posterior moments of `beta = V z` follow from
//! the tower rule:
//!
//! ```text
//! E[beta]   = V E[m]
//! cov[beta] = V (diag(E[v]) + E[m m^T] - E[m] E[m]^T) V^T
//! ```
//!
//! The three covariance modes differ only in how much of the inner matrix
//! they keep. `Exact` keeps all of it. `Paper` keeps `diag(E[v])` alone,
//! dropping the spread of the conditional mean across scales; it
//! understates the variance but needs no extra functionals at all.
//! `Diagonal` keeps the exact diagonal but drops off-diagonal mean spread,
//! which needs only `k` extra functionals instead of `k (k + 1) / 2` and
//! keeps the sweep O(nodes^2 k) when only coefficient variances matter.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::marginal::MarginalModel;
use crate::quadrature::{Functional, MomentAccumulator};
use crate::scalar::Scalar;

/// How much of the coefficient covariance to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMode {
    /// Full law-of-total-variance covariance. The default.
    Exact,
    /// Conditional variances only, as published.
    Paper,
    /// Exact variances, no off-diagonal mean-spread terms.
    Diagonal,
}

impl fmt::Display for CovMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovMode::Exact => "exact",
            CovMode::Paper => "paper",
            CovMode::Diagonal => "diag",
        })
    }
}

impl FromStr for CovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CovMode::Exact),
            "paper" => Ok(CovMode::Paper),
            "diag" => Ok(CovMode::Diagonal),
            other => Err(Error::Validation(format!(
                "unknown covariance mode {other:?}; expected exact, paper, or diag"
            ))),
        }
    }
}

/// First and second posterior moments of the scales and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary<T: Scalar> {
    pub mean_sigma1: T,
    pub mean_sigma2: T,
    pub var_sigma1: T,
    pub var_sigma2: T,
    /// Posterior mean of `beta`, length `k`.
    pub mean_beta: DVector<T>,
    /// Posterior covariance of `beta`, `k x k`, symmetric.
    pub cov_beta: DMatrix<T>,
    /// Mode the covariance was assembled under.
    pub cov_mode: CovMode,
}

/// Functional names consumed by [`posterior_summary`].
const SIGMA1: &str = "sigma1";
const SIGMA2: &str = "sigma2";
const SIGMA1_SQ: &str = "sigma1_sq";
const SIGMA2_SQ: &str = "sigma2_sq";
const Z_MEAN: &str = "z_mean";
const Z_VAR: &str = "z_var";
const Z_MEAN_SQ: &str = "z_mean_sq";
const Z_OUTER: &str = "z_outer";

/// Builds the functional set [`posterior_summary`] needs under `mode` for
/// a `k`-dimensional coefficient vector.
pub fn moment_functionals<T: Scalar>(k: usize, mode: CovMode) -> Vec<Functional<T>> {
    let mut fs = vec![
        Functional::new(SIGMA1, 1, |s1, _, _: &_, out: &mut [T]| out[0] = s1),
        Functional::new(SIGMA2, 1, |_, s2, _: &_, out: &mut [T]| out[0] = s2),
        Functional::new(SIGMA1_SQ, 1, |s1, _, _: &_, out: &mut [T]| out[0] = s1 * s1),
        Functional::new(SIGMA2_SQ, 1, |_, s2, _: &_, out: &mut [T]| out[0] = s2 * s2),
        Functional::new(Z_MEAN, k, |_, _, c: &_, out: &mut [T]| {
            out.copy_from_slice(c.mean.as_slice());
        }),
        Functional::new(Z_VAR, k, |_, _, c: &_, out: &mut [T]| {
            out.copy_from_slice(c.var.as_slice());
        }),
    ];
    match mode {
        CovMode::Paper => {}
        CovMode::Diagonal => fs.push(Functional::new(Z_MEAN_SQ, k, |_, _, c: &_, out: &mut [T]| {
            for (o, &m) in out.iter_mut().zip(c.mean.iter()) {
                *o = m * m;
            }
        })),
        CovMode::Exact => {
            fs.push(Functional::new(
                Z_OUTER,
                k * (k + 1) / 2,
                move |_, _, c: &_, out: &mut [T]| {
                    let mut p = 0;
                    for i in 0..k {
                        let mi = c.mean[i];
                        for j in i..k {
                            out[p] = mi * c.mean[j];
                            p += 1;
                        }
                    }
                },
            ));
        }
    }
    fs
}

/// Assembles the posterior summary from an accumulator that was integrated
/// with [`moment_functionals`] under the same `k` and `mode`.
pub fn posterior_summary<T: Scalar>(
    model: &MarginalModel<T>,
    acc: &MomentAccumulator<T>,
    mode: CovMode,
) -> Result<PosteriorSummary<T>> {
    let k = model.k();
    let mean_sigma1 = acc.expectation_scalar(SIGMA1)?;
    let mean_sigma2 = acc.expectation_scalar(SIGMA2)?;
    // Rounding can push the variance of a tightly concentrated scale a few
    // ulps negative; the clamp keeps the nonnegativity contract.
    let var_sigma1 = (acc.expectation_scalar(SIGMA1_SQ)? - mean_sigma1 * mean_sigma1).max(T::zero());
    let var_sigma2 = (acc.expectation_scalar(SIGMA2_SQ)? - mean_sigma2 * mean_sigma2).max(T::zero());

    let zbar = expect_len(acc, Z_MEAN, k)?;
    let ev = expect_len(acc, Z_VAR, k)?;

    let cz = match mode {
        CovMode::Paper => DMatrix::from_diagonal(&DVector::from_vec(ev)),
        CovMode::Diagonal => {
            let msq = expect_len(acc, Z_MEAN_SQ, k)?;
            let diag: Vec<T> = ev
                .iter()
                .zip(&msq)
                .zip(&zbar)
                .map(|((&v, &m2), &m)| (v + m2 - m * m).max(T::zero()))
                .collect();
            DMatrix::from_diagonal(&DVector::from_vec(diag))
        }
        CovMode::Exact => {
            let packed = expect_len(acc, Z_OUTER, k * (k + 1) / 2)?;
            let mut cz = DMatrix::zeros(k, k);
            let mut p = 0;
            for i in 0..k {
                for j in i..k {
                    let c = packed[p] - zbar[i] * zbar[j];
                    p += 1;
                    cz[(i, j)] = c;
                    cz[(j, i)] = c;
                }
            }
            for i in 0..k {
                cz[(i, i)] += ev[i];
            }
            cz
        }
    };

    let zbar = DVector::from_vec(zbar);
    let v = &model.basis().v;
    let mean_beta = v * &zbar;
    let mut cov_beta = v * cz * v.transpose();
    // The rotated product is symmetric only up to rounding; mirroring the
    // lower triangle makes cov_beta symmetric exactly.
    for i in 0..k {
        for j in (i + 1)..k {
            cov_beta[(i, j)] = cov_beta[(j, i)];
        }
    }

    Ok(PosteriorSummary {
        mean_sigma1,
        mean_sigma2,
        var_sigma1,
        var_sigma2,
        mean_beta,
        cov_beta,
        cov_mode: mode,
    })
}

fn expect_len<T: Scalar>(acc: &MomentAccumulator<T>, name: &str, len: usize) -> Result<Vec<T>> {
    let e = acc.expectation(name)?;
    if e.len() != len {
        return Err(Error::Functional(format!(
            "functional {name:?} has dimension {}, expected {len}",
            e.len()
        )));
    }
    Ok(e)
}
