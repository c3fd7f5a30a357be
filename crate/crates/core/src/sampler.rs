//! Random-walk Metropolis over the marginal scale posterior.
//!
//! The chain walks `u = (ln sigma1, ln sigma2)` with isotropic Gaussian
//! proposals, targeting `ln qt(exp u1, exp u2) + u1 + u2`; the additive
//! terms are the Jacobian of the log reparameterization, so the recorded
//! `sigma` draws follow the marginal posterior itself. Coefficient draws
//! are exact conditional Gaussians on top of the scale draws, so the only
//! Monte Carlo error in coefficient moments is the scale mixing.
//!
//! Reproducibility: the generator is a ChaCha8 stream seeded explicitly;
//! each Metropolis step consumes exactly three variates (two ziggurat
//! normals for the proposal, one uniform for the accept test, in that
//! order), and [`draw_beta`] consumes one normal per coordinate in draw
//! major order. Identical seeds give bitwise identical chains.

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, StandardUniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::marginal::{ConditionalGaussian, MarginalModel};
use crate::scalar::Scalar;

/// Steps between step-scale adjustments during warmup.
const ADAPT_WINDOW: usize = 50;
/// Multiplicative nudges applied when the window acceptance rate leaves
/// the configured band.
const SHRINK: f64 = 0.8;
const GROW: f64 = 1.25;
/// Nodes per axis of the log-spaced scan that picks the chain start.
const INIT_SCAN: usize = 16;
const INIT_LO: f64 = 1e-2;
const INIT_HI: f64 = 1e2;

/// Chain length, warmup, and proposal tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig<T: Scalar> {
    /// Post-warmup draws to record.
    pub draws: usize,
    /// Warmup steps; the proposal scale adapts only here.
    pub warmup: usize,
    /// Initial proposal standard deviation in `ln sigma` units.
    pub step_scale: T,
    /// Seed of the ChaCha8 stream.
    pub seed: u64,
    /// Acceptance-rate band the warmup adaptation steers into.
    pub accept_band: (T, T),
}

impl<T: Scalar> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            draws: 10_000,
            warmup: 1_000,
            step_scale: T::lit(0.3),
            seed: 0,
            accept_band: (T::lit(0.2), T::lit(0.5)),
        }
    }
}

impl<T: Scalar> SamplerConfig<T> {
    /// Checks ranges of every field.
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Sampler("draws must be positive".into()));
        }
        if !(self.step_scale.is_finite() && self.step_scale > T::zero()) {
            return Err(Error::Sampler(format!(
                "step_scale must be positive and finite, got {:?}",
                self.step_scale
            )));
        }
        let (lo, hi) = self.accept_band;
        if !(T::zero() < lo && lo < hi && hi < T::one()) {
            return Err(Error::Sampler(format!(
                "accept_band must satisfy 0 < lo < hi < 1, got ({lo:?}, {hi:?})"
            )));
        }
        Ok(())
    }
}

/// Recorded scale draws plus the tuning state the chain froze at.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T: Scalar> {
    /// Post-warmup `(sigma1, sigma2)` draws, `draws x 2`.
    pub sigma: DMatrix<T>,
    /// Acceptance rate over the recorded draws.
    pub accept_rate: T,
    /// Proposal scale after warmup adaptation.
    pub step_scale: T,
    /// Coefficient draws, `draws x k`, if [`draw_beta`] output was
    /// attached.
    pub beta: Option<DMatrix<T>>,
}

impl<T: Scalar> Chain<T> {
    /// Number of recorded draws.
    #[inline]
    pub fn draws(&self) -> usize {
        self.sigma.nrows()
    }

    /// Sample means of `(sigma1, sigma2)`.
    pub fn mean_sigma(&self) -> (T, T) {
        let n = T::from_dim(self.draws());
        (self.sigma.column(0).sum() / n, self.sigma.column(1).sum() / n)
    }
}

/// Runs the Metropolis chain on the marginal scale posterior.
///
/// The start point is the best of a coarse log-spaced scan of the target,
/// which puts the chain inside the bulk before warmup begins.
pub fn run_chain<T>(model: &MarginalModel<T>, config: &SamplerConfig<T>) -> Result<Chain<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    config.validate()?;
    let target = |u1: T, u2: T| {
        let s1 = u1.exp();
        let s2 = u2.exp();
        if !(s1 > T::zero() && s1.is_finite() && s2 > T::zero() && s2.is_finite()) {
            return T::lit(f64::NEG_INFINITY);
        }
        model.log_qtilde(s1, s2) + u1 + u2
    };

    let lo = T::lit(INIT_LO.ln());
    let hi = T::lit(INIT_HI.ln());
    let du = (hi - lo) / T::from_dim(INIT_SCAN - 1);
    let mut init = (lo, lo);
    let mut init_val = target(lo, lo);
    for i in 0..INIT_SCAN {
        for j in 0..INIT_SCAN {
            let u = (lo + du * T::from_dim(i), lo + du * T::from_dim(j));
            let val = target(u.0, u.1);
            if val > init_val {
                init_val = val;
                init = u;
            }
        }
    }
    if !init_val.is_finite() {
        return Err(Error::Sampler(
            "log density is not finite anywhere on the start scan".into(),
        ));
    }

    let (states, accept_rate, step_scale) = rwm_2d(target, init, config)?;
    let sigma = DMatrix::from_fn(states.nrows(), 2, |d, c| states[(d, c)].exp());
    Ok(Chain { sigma, accept_rate, step_scale, beta: None })
}

/// Metropolis core over an arbitrary 2-D log density.
///
/// Returns the recorded states, the post-warmup acceptance rate, and the
/// frozen step scale. The scale adapts only during warmup, in windows of
/// [`ADAPT_WINDOW`] steps: acceptance above the band grows the step,
/// below shrinks it.
fn rwm_2d<T, F>(
    log_density: F,
    init: (T, T),
    config: &SamplerConfig<T>,
) -> Result<(DMatrix<T>, T, T)>
where
    T: Scalar,
    F: Fn(T, T) -> T,
    StandardNormal: Distribution<T>,
    StandardUniform: Distribution<T>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = init;
    let mut lp = log_density(u.0, u.1);
    if !lp.is_finite() {
        return Err(Error::Sampler(format!(
            "log density at the chain start is not finite: {lp:?}"
        )));
    }

    let mut scale = config.step_scale;
    let mut states = DMatrix::zeros(config.draws, 2);
    let mut window_accepts = 0usize;
    let mut recorded_accepts = 0usize;

    for step in 0..config.warmup + config.draws {
        let e1: T = rng.sample(StandardNormal);
        let e2: T = rng.sample(StandardNormal);
        let cand = (u.0 + scale * e1, u.1 + scale * e2);
        let cand_lp = log_density(cand.0, cand.1);
        let unif: T = rng.sample(StandardUniform);
        // A NaN candidate density compares false and is rejected.
        if unif.ln() < cand_lp - lp {
            u = cand;
            lp = cand_lp;
            if step >= config.warmup {
                recorded_accepts += 1;
            } else {
                window_accepts += 1;
            }
        }

        if step < config.warmup {
            if (step + 1) % ADAPT_WINDOW == 0 {
                let rate = T::from_dim(window_accepts) / T::from_dim(ADAPT_WINDOW);
                if rate < config.accept_band.0 {
                    scale *= T::lit(SHRINK);
                } else if rate > config.accept_band.1 {
                    scale *= T::lit(GROW);
                }
                window_accepts = 0;
            }
        } else {
            let d = step - config.warmup;
            states[(d, 0)] = u.0;
            states[(d, 1)] = u.1;
        }
    }

    let accept_rate = T::from_dim(recorded_accepts) / T::from_dim(config.draws);
    Ok((states, accept_rate, scale))
}

/// Draws one coefficient vector per recorded scale draw, exactly from the
/// conditional Gaussian, and rotates back to the original basis.
///
/// Structural-zero coordinates are included, so the draws cover the full
/// `k`-dimensional posterior even when `n < k`. One ziggurat normal per
/// coordinate, draw-major order, from a fresh ChaCha8 stream under `seed`.
pub fn draw_beta<T>(model: &MarginalModel<T>, chain: &Chain<T>, seed: u64) -> DMatrix<T>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    let draws = chain.draws();
    let k = model.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DMatrix::zeros(draws, k);
    let mut cond = ConditionalGaussian { mean: DVector::zeros(k), var: DVector::zeros(k) };
    for d in 0..draws {
        model.conditional_z_into(chain.sigma[(d, 0)], chain.sigma[(d, 1)], &mut cond);
        for i in 0..k {
            let e: T = rng.sample(StandardNormal);
            z[(d, i)] = cond.mean[i] + cond.var[i].sqrt() * e;
        }
    }
    z * model.basis().v.transpose()
}

/// Monte Carlo standard error of the mean by nonoverlapping batch means,
/// with roughly `sqrt(len)` batches.
///
/// Requires at least four samples; any trailing remainder that does not
/// fill a batch is ignored.
pub fn batch_mcse<T: Scalar>(samples: &[T]) -> Result<T> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::Sampler(format!(
            "batch means need at least 4 samples, got {n}"
        )));
    }
    let batch = (n as f64).sqrt().floor() as usize;
    let batches = n / batch;
    let nb = T::from_dim(batches);

    let mut means = Vec::with_capacity(batches);
    for b in 0..batches {
        let mut s = T::zero();
        for &v in &samples[b * batch..(b + 1) * batch] {
            s += v;
        }
        means.push(s / T::from_dim(batch));
    }
    let grand = means.iter().fold(T::zero(), |a, &m| a + m) / nb;
    let var = means
        .iter()
        .fold(T::zero(), |a, &m| a + (m - grand) * (m - grand))
        / (nb - T::one());
    Ok((var / nb).sqrt())
}
