//! Brute-force verification route for small coefficient counts.
//!
//! Integrates the full joint density `q(sigma1, sigma2, beta)` over a
//! dense grid with no SVD, no rotation, and no code shared with the
//! production pipeline: the density is evaluated straight from `X` and
//! `y`, and coefficient moments are read off in the original basis. The
//! module is restricted to `k <= 2` and makes no attempt at generality,
//! and precisely therefore is a meaningful cross-check for the analytic
//! marginalization.
//!
//! The scale axes are fixed log-spaced trapezoid grids. The coefficient
//! integral of each `(sigma1, sigma2)` slice runs on its own grid,
//! centered on the conditional mode with steps proportional to the
//! conditional standard deviations: at fixed scales the density is
//! exactly `exp` of a quadratic in `beta`, so the placement follows from
//! completing the square, and the per-slice trapezoid error (aliasing
//! about `exp(-79)`, truncation about `exp(-55)`) is certified by
//! Gaussian tail bounds rather than tuned. A boundary guard keeps silent
//! truncation at the scale-box edges from masquerading as agreement, and
//! callers are expected to verify self-convergence by rerunning with
//! doubled node counts. Everything is f64; this route exists to produce
//! reference numbers, not to be fast or generic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Hyperparams, RegressionData};
use crate::moments::{CovMode, PosteriorSummary};

/// Default for [`BruteGrid::boundary_guard`].
const BOUNDARY_GUARD: f64 = 1e-10;
/// Slices whose continuous peak sits this far (in log density) below the
/// global peak are skipped; their total contribution is below 1e-20 of
/// the mass even after accounting for per-slice node counts.
const SLICE_CUTOFF: f64 = 56.0;
/// Half-range of each per-slice coefficient grid in conditional standard
/// deviations. The discarded Gaussian tail is about `exp(-55)`.
const WINDOW_SD: f64 = 10.5;

/// Integration box and resolution for [`brute_moments`].
///
/// The sigma boxes must hold the posterior mass; the defaults span
/// everything the priors allow for data on the scale produced by
/// [`crate::model::generate_synthetic`], and data concentrating density
/// at a box edge trips the boundary guard rather than returning a
/// truncated answer. Coefficient bounds need no configuration because
/// each slice grid follows its own conditional Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteGrid {
    /// `sigma1` bounds.
    pub sigma1: (f64, f64),
    /// `sigma2` bounds.
    pub sigma2: (f64, f64),
    /// Nodes per sigma axis.
    pub sigma_nodes: usize,
    /// Resolution knob for the per-slice coefficient grids; node spacing
    /// is inversely proportional to it. The default puts two nodes per
    /// conditional standard deviation.
    pub beta_nodes: usize,
    /// Highest admissible density on the box boundary, relative to the
    /// peak. Anything denser fails the run as truncated. Designs that
    /// interpolate y exactly (n <= k) concentrate unbounded density
    /// toward sigma2 = 0 and can only run with this loosened, trading
    /// certified accuracy for a qualitative answer.
    pub boundary_guard: f64,
}

impl Default for BruteGrid {
    fn default() -> Self {
        Self {
            sigma1: (0.02, 8.0),
            sigma2: (0.005, 12.0),
            sigma_nodes: 256,
            beta_nodes: 128,
            boundary_guard: BOUNDARY_GUARD,
        }
    }
}

impl BruteGrid {
    /// Returns a grid with every node count doubled, for self-convergence
    /// checks by grid refinement.
    pub fn doubled(&self) -> Self {
        Self {
            sigma_nodes: self.sigma_nodes * 2,
            beta_nodes: self.beta_nodes * 2,
            ..*self
        }
    }

    /// Nodes per axis of a slice grid: an odd count so the conditional
    /// mode is itself a node, which makes sign symmetries of the data
    /// carry over to the computed moments exactly.
    fn slice_nodes(&self) -> usize {
        (self.beta_nodes / 3).max(9) | 1
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
                return Err(Error::Validation(format!(
                    "oracle {name} bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.sigma_nodes < 8 || self.beta_nodes < 27 {
            return Err(Error::Validation(format!(
                "oracle needs at least 8 sigma and 27 beta nodes, got {} and {}",
                self.sigma_nodes, self.beta_nodes
            )));
        }
        if !(self.boundary_guard > 0.0 && self.boundary_guard <= 1.0) {
            return Err(Error::Validation(format!(
                "oracle boundary_guard must be in (0, 1], got {}",
                self.boundary_guard
            )));
        }
        Ok(())
    }
}

/// Closed-form description of one `(sigma1, sigma2)` slice: the density
/// restricted to the slice is `exp(lp - (beta - center)' a (beta -
/// center))` for an SPD matrix `a`, by completing the square.
struct Slice {
    /// Log density at the conditional mode, the slice's continuous peak.
    lp: f64,
    center: [f64; 2],
    /// Marginal standard deviations of the slice Gaussian per axis.
    sd: [f64; 2],
}

/// Dense quadratic-form data shared by every slice.
struct Quadratic {
    k: usize,
    /// Upper triangle of X'X: [xx11, xx12, xx22] (k = 1 uses only xx11).
    xx: [f64; 3],
    xy: [f64; 2],
    yy: f64,
}

impl Quadratic {
    fn build(data: &RegressionData<f64>) -> Self {
        let k = data.k();
        let xtx = data.x.tr_mul(&data.x);
        let xty = data.x.tr_mul(&data.y);
        let mut xx = [0.0; 3];
        let mut xy = [0.0; 2];
        xx[0] = xtx[(0, 0)];
        xy[0] = xty[0];
        if k == 2 {
            xx[1] = xtx[(0, 1)];
            xx[2] = xtx[(1, 1)];
            xy[1] = xty[1];
        }
        Self { k, xx, xy, yy: data.y.norm_squared() }
    }

    /// Completes the square of `c2 |X b - y|^2 + c1 |b|^2 + pre...` at
    /// fixed scale coefficients. `a = c2 X'X + c1 I` is SPD for c1 > 0,
    /// so the 2 x 2 solve is unconditionally well posed.
    fn slice(&self, pre: f64, c2: f64, c1: f64) -> Slice {
        let a11 = c2 * self.xx[0] + c1;
        let d1 = c2 * self.xy[0];
        if self.k == 1 {
            let center = d1 / a11;
            let gmin = c2 * self.yy - d1 * center;
            return Slice {
                lp: pre - gmin,
                center: [center, 0.0],
                sd: [(0.5 / a11).sqrt(), 0.0],
            };
        }
        let a12 = c2 * self.xx[1];
        let a22 = c2 * self.xx[2] + c1;
        let d2 = c2 * self.xy[1];
        let det = a11 * a22 - a12 * a12;
        let c1_ = (a22 * d1 - a12 * d2) / det;
        let c2_ = (a11 * d2 - a12 * d1) / det;
        let gmin = c2 * self.yy - d1 * c1_ - d2 * c2_;
        Slice {
            lp: pre - gmin,
            center: [c1_, c2_],
            sd: [(0.5 * a22 / det).sqrt(), (0.5 * a11 / det).sqrt()],
        }
    }

    /// `|X b - y|^2` and `|b|^2` folded into one quadratic evaluation.
    fn g(&self, c2: f64, c1: f64, b1: f64, b2: f64) -> f64 {
        let r = if self.k == 1 {
            self.xx[0] * b1 * b1 - 2.0 * self.xy[0] * b1 + self.yy
        } else {
            self.xx[0] * b1 * b1
                + 2.0 * self.xx[1] * b1 * b2
                + self.xx[2] * b2 * b2
                - 2.0 * (self.xy[0] * b1 + self.xy[1] * b2)
                + self.yy
        };
        let prior = b1 * b1 + b2 * b2;
        c2 * r + c1 * prior
    }
}

/// Posterior moments by direct integration over `(sigma1, sigma2, beta)`.
///
/// Only `k <= 2` is supported; the data and `hyper.gamma` define the
/// density, everything else in `hyper` is ignored. Fails with
/// [`Error::Unconverged`] when the box visibly truncates mass.
pub fn brute_moments(
    data: &RegressionData<f64>,
    hyper: &Hyperparams<f64>,
    grid: &BruteGrid,
) -> Result<PosteriorSummary<f64>> {
    data.validate()?;
    hyper.validate()?;
    grid.validate()?;
    let k = data.k();
    if k > 2 {
        return Err(Error::Validation(format!(
            "brute-force integration supports k <= 2, got k = {k}"
        )));
    }

    let n = data.n();
    let gamma = hyper.gamma;
    let quad = Quadratic::build(data);
    let s1 = log_axis(grid.sigma1.0, grid.sigma1.1, grid.sigma_nodes);
    let s2 = log_axis(grid.sigma2.0, grid.sigma2.1, grid.sigma_nodes);

    // Log-density prefactor depending on the scales alone.
    let prefactor = |a: f64, b: f64| -> f64 {
        -((k + 1) as f64) * a.ln() - (n as f64) * b.ln() - gamma * a.ln().powi(2) - b * b / 2.0
    };
    let slice_at = |a: f64, b: f64| -> Slice {
        quad.slice(prefactor(a, b), 0.5 / (b * b), 0.5 / (a * a))
    };

    // The slice peaks are closed-form, so the global and boundary peaks
    // come from one cheap sweep instead of a dense scan.
    let mut peak = f64::NEG_INFINITY;
    let mut edge_peak = f64::NEG_INFINITY;
    for (i, &(a, _)) in s1.iter().enumerate() {
        for (j, &(b, _)) in s2.iter().enumerate() {
            let lp = slice_at(a, b).lp;
            peak = peak.max(lp);
            if i == 0 || i == s1.len() - 1 || j == 0 || j == s2.len() - 1 {
                edge_peak = edge_peak.max(lp);
            }
        }
    }
    if !peak.is_finite() {
        return Err(Error::Unconverged("log density has no finite peak on the box".into()));
    }
    if edge_peak - peak > grid.boundary_guard.ln() {
        return Err(Error::Unconverged(format!(
            "relative density {:.3e} on the sigma box boundary exceeds {:.0e}; \
             widen the oracle box",
            (edge_peak - peak).exp(),
            grid.boundary_guard
        )));
    }

    // Accumulate [mass, s1, s1^2, s2, s2^2] and the coefficient moments,
    // everything rescaled by the peak. Each slice integrates beta on its
    // own grid; the moments it reports are plain numbers, so slices
    // combine under the outer trapezoid rule exactly as scalar
    // integrands would.
    let width = if k == 1 { 3 } else { 6 };
    let m_nodes = grid.slice_nodes();
    let half = (m_nodes / 2) as isize;
    let partials: Vec<Vec<f64>> = (0..s1.len())
        .into_par_iter()
        .map(|i| {
            let (a, wa) = s1[i];
            let mut acc = vec![0.0; 5 + width - 1];
            let mut inner = [0.0; 6];
            for &(b, wb) in &s2 {
                let pre = prefactor(a, b);
                let c2 = 0.5 / (b * b);
                let c1 = 0.5 / (a * a);
                let slice = quad.slice(pre, c2, c1);
                if !(slice.lp - peak > -SLICE_CUTOFF) {
                    continue;
                }
                let h1 = slice.sd[0] * WINDOW_SD / half as f64;
                let h2 = slice.sd[1] * WINDOW_SD / half as f64;
                inner.fill(0.0);
                if k == 1 {
                    for t in -half..=half {
                        let b1 = slice.center[0] + t as f64 * h1;
                        let d = (pre - quad.g(c2, c1, b1, 0.0) - peak).exp();
                        let w = if t == -half || t == half { 0.5 * h1 } else { h1 };
                        inner[0] += d * w;
                        inner[1] += d * w * b1;
                        inner[2] += d * w * b1 * b1;
                    }
                } else {
                    for t1 in -half..=half {
                        let b1 = slice.center[0] + t1 as f64 * h1;
                        let w1 = if t1 == -half || t1 == half { 0.5 * h1 } else { h1 };
                        for t2 in -half..=half {
                            let b2 = slice.center[1] + t2 as f64 * h2;
                            let d = (pre - quad.g(c2, c1, b1, b2) - peak).exp();
                            let w2 = if t2 == -half || t2 == half { 0.5 * h2 } else { h2 };
                            let w = w1 * w2;
                            inner[0] += d * w;
                            inner[1] += d * w * b1;
                            inner[2] += d * w * b2;
                            inner[3] += d * w * b1 * b1;
                            inner[4] += d * w * b1 * b2;
                            inner[5] += d * w * b2 * b2;
                        }
                    }
                }
                let w = wa * wb;
                acc[0] += w * inner[0];
                acc[1] += w * a * inner[0];
                acc[2] += w * a * a * inner[0];
                acc[3] += w * b * inner[0];
                acc[4] += w * b * b * inner[0];
                for m in 1..width {
                    acc[4 + m] += w * inner[m];
                }
            }
            acc
        })
        .collect();

    // Fixed-order reduction over the outer axis.
    let mut acc = vec![0.0; 5 + width - 1];
    for part in &partials {
        for (a, &v) in acc.iter_mut().zip(part) {
            *a += v;
        }
    }

    let mass = acc[0];
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Unconverged(format!("integrated mass {mass} is unusable")));
    }
    let mean_sigma1 = acc[1] / mass;
    let mean_sigma2 = acc[3] / mass;
    let var_sigma1 = (acc[2] / mass - mean_sigma1 * mean_sigma1).max(0.0);
    let var_sigma2 = (acc[4] / mass - mean_sigma2 * mean_sigma2).max(0.0);

    let (mean_beta, cov_beta) = match k {
        1 => {
            let m = acc[5] / mass;
            let m2 = acc[6] / mass;
            (
                DVector::from_vec(vec![m]),
                DMatrix::from_element(1, 1, (m2 - m * m).max(0.0)),
            )
        }
        _ => {
            let m1 = acc[5] / mass;
            let m2 = acc[6] / mass;
            let s11 = acc[7] / mass - m1 * m1;
            let s12 = acc[8] / mass - m1 * m2;
            let s22 = acc[9] / mass - m2 * m2;
            (
                DVector::from_vec(vec![m1, m2]),
                DMatrix::from_row_slice(2, 2, &[s11.max(0.0), s12, s12, s22.max(0.0)]),
            )
        }
    };

    Ok(PosteriorSummary {
        mean_sigma1,
        mean_sigma2,
        var_sigma1,
        var_sigma2,
        mean_beta,
        cov_beta,
        cov_mode: CovMode::Exact,
    })
}

/// Log-uniform axis with trapezoid weights in the log coordinate and the
/// Jacobian folded into the weights. Scale posteriors have near-constant
/// width in log space, so this resolves them uniformly across the box
/// where a linear axis would crowd all its nodes into the dead far tail.
fn log_axis(lo: f64, hi: f64, m: usize) -> Vec<(f64, f64)> {
    let (tlo, thi) = (lo.ln(), hi.ln());
    let h = (thi - tlo) / (m - 1) as f64;
    (0..m)
        .map(|i| {
            let x = if i == 0 {
                lo
            } else if i == m - 1 {
                hi
            } else {
                (tlo + h * i as f64).exp()
            };
            let wt = if i == 0 || i == m - 1 { 0.5 * h } else { h };
            (x, wt * x)
        })
        .collect()
}
