//! Analytic marginalization of the coefficients.
//!
//! In the rotated coordinates `z = V^T beta` the posterior exponent is a
//! sum of decoupled quadratics, one per coordinate:
//!
//! ```text
//! q(sigma1, sigma2, z) = sigma1^-(k+1) sigma2^-n
//!     exp(-gamma ln^2 sigma1 - sigma2^2 / 2 + a0 + sum_i (a1_i z_i - a2_i z_i^2))
//!
//! a2_i = lambda_i^2 / (2 sigma2^2) + 1 / (2 sigma1^2)
//! a1_i = w_i / sigma2^2
//! a0   = -y^T y / (2 sigma2^2)
//! ```
//!
//! Completing the square integrates `z` out exactly and leaves the 2-D
//! marginal this module evaluates in log form:
//!
//! ```text
//! ln qt(sigma1, sigma2) = -(k+1) ln sigma1 - n ln sigma2
//!     - gamma ln^2 sigma1 - sigma2^2 / 2 + a0
//!     + sum_i a1_i^2 / (4 a2_i) + (k/2) ln(2 pi) - (1/2) sum_i ln(2 a2_i)
//! ```
//!
//! `exp(ln qt)` equals the full `z` integral of `q` including all constant
//! factors, so cross-checks against brute-force integration need no
//! normalization fudge. Every evaluation is O(k) over the cached
//! `lambda_i^2` and `w_i^2`, works entirely in logs, and stays finite for
//! any `sigma` in `[1e-8, 1e8]`: the individual terms are bounded by about
//! `lambda^2 * 5e15` and `5e15` there, far from f64 overflow.
//!
//! Conditional on `(sigma1, sigma2)` the coordinates are independent
//! Gaussians with mean `a1_i / (2 a2_i)` and variance `1 / (2 a2_i)`;
//! structural-zero coordinates (`lambda_i = 0`, `w_i = 0`) reduce exactly
//! to the prior, mean 0 and variance `sigma1^2`.

use nalgebra::DVector;

use crate::error::Result;
use crate::model::Hyperparams;
use crate::scalar::Scalar;
use crate::svd::SvdBasis;

/// Quadratic exponent coefficients at a fixed `(sigma1, sigma2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs<T: Scalar> {
    /// Constant term `-y^T y / (2 sigma2^2)`.
    pub a0: T,
    /// Linear terms `w_i / sigma2^2`, length `k`.
    pub a1: Vec<T>,
    /// Quadratic terms `lambda_i^2 / (2 sigma2^2) + 1 / (2 sigma1^2)`,
    /// length `k`, always positive.
    pub a2: Vec<T>,
}

/// Conditional law of `z` given `(sigma1, sigma2)`: independent Gaussians
/// per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian<T: Scalar> {
    /// Conditional means, length `k`.
    pub mean: DVector<T>,
    /// Conditional variances, length `k`, always positive.
    pub var: DVector<T>,
}

/// Marginal posterior of `(sigma1, sigma2)` after integrating the
/// coefficients out.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel<T: Scalar> {
    basis: SvdBasis<T>,
    gamma: T,
    lam_sq: Vec<T>,
    w_sq: Vec<T>,
    /// `(k/2) ln(2 pi)`, the constant from `k` Gaussian integrals.
    gauss_const: T,
}

impl<T: Scalar> MarginalModel<T> {
    /// Builds the marginal model, validating the hyperparameters.
    pub fn new(basis: SvdBasis<T>, hyper: &Hyperparams<T>) -> Result<Self> {
        hyper.validate()?;
        let lam_sq: Vec<T> = basis.lambda.iter().map(|&l| l * l).collect();
        let w_sq: Vec<T> = basis.w.iter().map(|&w| w * w).collect();
        let gauss_const = T::from_dim(basis.k) * T::two_pi().ln() * T::lit(0.5);
        Ok(Self { basis, gamma: hyper.gamma, lam_sq, w_sq, gauss_const })
    }

    /// The underlying SVD basis.
    #[inline]
    pub fn basis(&self) -> &SvdBasis<T> {
        &self.basis
    }

    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.basis.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.basis.k
    }

    /// Exponent coefficients at `(sigma1, sigma2)`. Both scales must be
    /// positive and finite.
    pub fn coeffs(&self, sigma1: T, sigma2: T) -> Coeffs<T> {
        debug_assert!(sigma1 > T::zero() && sigma1.is_finite());
        debug_assert!(sigma2 > T::zero() && sigma2.is_finite());
        let inv_2s1 = T::lit(0.5) / (sigma1 * sigma1);
        let inv_2s2 = T::lit(0.5) / (sigma2 * sigma2);
        let inv_s2 = inv_2s2 + inv_2s2;
        Coeffs {
            a0: -self.basis.yty * inv_2s2,
            a1: self.basis.w.iter().map(|&w| w * inv_s2).collect(),
            a2: self.lam_sq.iter().map(|&l2| l2 * inv_2s2 + inv_2s1).collect(),
        }
    }

    /// Log of the marginal density at `(sigma1, sigma2)`.
    ///
    /// One fused pass over the cached `lambda_i^2`, `w_i^2`; no
    /// intermediate leaves the log domain.
    pub fn log_qtilde(&self, sigma1: T, sigma2: T) -> T {
        debug_assert!(sigma1 > T::zero() && sigma1.is_finite());
        debug_assert!(sigma2 > T::zero() && sigma2.is_finite());
        let half = T::lit(0.5);
        let inv_2s1 = half / (sigma1 * sigma1);
        let inv_2s2 = half / (sigma2 * sigma2);

        let mut fit = T::zero();
        let mut log_det = T::zero();
        for (&l2, &w2) in self.lam_sq.iter().zip(&self.w_sq) {
            let a2 = l2 * inv_2s2 + inv_2s1;
            fit += w2 / a2;
            log_det += (a2 + a2).ln();
        }
        // sum_i a1_i^2 / (4 a2_i) = (1 / (4 sigma2^4)) sum_i w_i^2 / a2_i
        fit *= inv_2s2 * inv_2s2;

        let ln_s1 = sigma1.ln();
        let ln_s2 = sigma2.ln();
        -T::from_dim(self.basis.k + 1) * ln_s1
            - T::from_dim(self.basis.n) * ln_s2
            - self.gamma * ln_s1 * ln_s1
            - half * sigma2 * sigma2
            - self.basis.yty * inv_2s2
            + fit
            + self.gauss_const
            - half * log_det
    }

    /// Conditional Gaussian of the rotated coefficients at
    /// `(sigma1, sigma2)`.
    pub fn conditional_z(&self, sigma1: T, sigma2: T) -> ConditionalGaussian<T> {
        let k = self.basis.k;
        let mut cond =
            ConditionalGaussian { mean: DVector::zeros(k), var: DVector::zeros(k) };
        self.conditional_z_into(sigma1, sigma2, &mut cond);
        cond
    }

    /// Allocation-free form of [`conditional_z`](Self::conditional_z) for
    /// hot loops: fills `cond` in place. Its vectors must already have
    /// length `k`.
    pub fn conditional_z_into(&self, sigma1: T, sigma2: T, cond: &mut ConditionalGaussian<T>) {
        debug_assert!(sigma1 > T::zero() && sigma1.is_finite());
        debug_assert!(sigma2 > T::zero() && sigma2.is_finite());
        debug_assert!(cond.mean.len() == self.basis.k && cond.var.len() == self.basis.k);
        let half = T::lit(0.5);
        let inv_2s1 = half / (sigma1 * sigma1);
        let inv_2s2 = half / (sigma2 * sigma2);
        let inv_s2 = inv_2s2 + inv_2s2;

        for i in 0..self.basis.k {
            let a2 = self.lam_sq[i] * inv_2s2 + inv_2s1;
            let v = half / a2;
            cond.var[i] = v;
            cond.mean[i] = self.basis.w[i] * inv_s2 * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_synthetic, RegressionData};
    use crate::svd::factorize;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn unit_model(gamma: f64) -> MarginalModel<f64> {
        let data = RegressionData::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let hyper = Hyperparams { gamma, ..Hyperparams::default() };
        MarginalModel::new(factorize(&data).unwrap(), &hyper).unwrap()
    }

    fn synthetic_model(n: usize, k: usize, seed: u64) -> MarginalModel<f64> {
        let (data, _) = generate_synthetic(n, k, seed);
        MarginalModel::new(factorize(&data).unwrap(), &Hyperparams::default()).unwrap()
    }

    #[test]
    fn log_density_matches_closed_form_at_unit_point() {
        // For X = [[1]], y = [2], sigma1 = sigma2 = 1 the beta integral
        // collapses to exp(-3/2) sqrt(pi), so ln qt = ln(pi)/2 - 3/2
        // regardless of gamma.
        let model = unit_model(8.0);
        let expected = 0.5 * std::f64::consts::PI.ln() - 1.5;
        assert_relative_eq!(model.log_qtilde(1.0, 1.0), expected, epsilon = 1e-14);
        assert_relative_eq!(model.log_qtilde(1.0, 1.0), -0.927_635_057_075_3, epsilon = 1e-12);
    }

    #[test]
    fn log_density_matches_brute_beta_integral() {
        // Direct Simpson integration of the unnormalized joint density over
        // beta at fixed scales, sharing no code with the log-domain path.
        let x = 1.7;
        let y = 2.0;
        let gamma = 8.0;
        let data = RegressionData::new(
            DMatrix::from_element(1, 1, x),
            DVector::from_element(1, y),
        )
        .unwrap();
        let hyper = Hyperparams { gamma, ..Hyperparams::default() };
        let model = MarginalModel::new(factorize(&data).unwrap(), &hyper).unwrap();

        for &(s1, s2) in &[(1.0f64, 1.0f64), (0.8, 1.3), (1.9, 0.6)] {
            let joint = |beta: f64| -> f64 {
                let resid = x * beta - y;
                s1.powi(-2)
                    * s2.powi(-1)
                    * (-gamma * s1.ln().powi(2)
                        - s2 * s2 / 2.0
                        - resid * resid / (2.0 * s2 * s2)
                        - beta * beta / (2.0 * s1 * s1))
                        .exp()
            };
            let (lo, hi, m) = (-30.0, 30.0, 60_001);
            let h = (hi - lo) / (m - 1) as f64;
            let mut sum = joint(lo) + joint(hi);
            for i in 1..m - 1 {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * joint(lo + i as f64 * h);
            }
            let integral = sum * h / 3.0;
            assert_relative_eq!(
                model.log_qtilde(s1, s2),
                integral.ln(),
                epsilon = 1e-10,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn coeffs_match_their_definitions() {
        let model = synthetic_model(9, 4, 21);
        let (s1, s2) = (0.7, 1.4);
        let c = model.coeffs(s1, s2);
        let basis = model.basis();
        assert_relative_eq!(c.a0, -basis.yty / (2.0 * s2 * s2), max_relative = 1e-15);
        for i in 0..4 {
            assert_relative_eq!(c.a1[i], basis.w[i] / (s2 * s2), max_relative = 1e-15);
            let expect = basis.lambda[i].powi(2) / (2.0 * s2 * s2) + 1.0 / (2.0 * s1 * s1);
            assert_relative_eq!(c.a2[i], expect, max_relative = 1e-14);
            assert!(c.a2[i] > 0.0);
        }
    }

    #[test]
    fn quadratic_coefficients_stay_positive_across_scale_range() {
        let model = synthetic_model(6, 10, 2);
        for &s1 in &[1e-8, 1e-3, 1.0, 1e3, 1e8] {
            for &s2 in &[1e-8, 1e-3, 1.0, 1e3, 1e8] {
                for a2 in model.coeffs(s1, s2).a2 {
                    assert!(a2 > 0.0 && a2.is_finite(), "a2 = {a2} at ({s1}, {s2})");
                }
            }
        }
    }

    #[test]
    fn log_density_is_finite_across_scale_range() {
        let model = synthetic_model(8, 12, 4);
        for &s1 in &[1e-8, 1e-4, 1.0, 1e4, 1e8] {
            for &s2 in &[1e-8, 1e-4, 1.0, 1e4, 1e8] {
                let lq = model.log_qtilde(s1, s2);
                assert!(lq.is_finite(), "log qt = {lq} at ({s1}, {s2})");
            }
        }
    }

    #[test]
    fn gamma_enters_only_through_the_prior_term() {
        let a = unit_model(8.0);
        let b = unit_model(3.0);
        for &(s1, s2) in &[(0.4, 1.1), (2.3, 0.7), (1.0, 1.0)] {
            let diff = a.log_qtilde(s1, s2) - b.log_qtilde(s1, s2);
            let expected = -(8.0 - 3.0) * s1.ln().powi(2);
            assert_relative_eq!(diff, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_matches_coeff_ratios() {
        let model = synthetic_model(11, 5, 17);
        let (s1, s2) = (1.3, 0.9);
        let cond = model.conditional_z(s1, s2);
        let c = model.coeffs(s1, s2);
        for i in 0..5 {
            assert_relative_eq!(cond.mean[i], c.a1[i] / (2.0 * c.a2[i]), max_relative = 1e-14);
            assert_relative_eq!(cond.var[i], 1.0 / (2.0 * c.a2[i]), max_relative = 1e-14);
            assert!(cond.var[i] > 0.0);
        }
    }

    #[test]
    fn structural_zero_coordinates_reduce_to_the_prior() {
        // n < k leaves k - n prior-only coordinates: conditional mean 0
        // exactly, conditional variance sigma1^2.
        let (data, _) = generate_synthetic::<f64>(2, 5, 3);
        let model =
            MarginalModel::new(factorize(&data).unwrap(), &Hyperparams::default()).unwrap();
        let (s1, s2) = (0.6, 1.8);
        let cond = model.conditional_z(s1, s2);
        for i in 2..5 {
            assert_eq!(cond.mean[i], 0.0);
            assert_relative_eq!(cond.var[i], s1 * s1, max_relative = 1e-15);
        }
    }

    #[test]
    fn single_coordinate_perturbation_respects_the_quadratic_bound() {
        // Perturbing w_i by delta moves ln qt by at most
        // (|w_i| + |delta|) |delta| / (2 a2_i sigma2^4).
        let model = synthetic_model(7, 3, 31);
        let (s1, s2) = (0.9, 1.2);
        let delta = 1e-6;
        for i in 0..3 {
            let mut basis = model.basis().clone();
            basis.w[i] += delta;
            let perturbed =
                MarginalModel::new(basis, &Hyperparams::default()).unwrap();
            let change = (perturbed.log_qtilde(s1, s2) - model.log_qtilde(s1, s2)).abs();
            let a2 = model.coeffs(s1, s2).a2[i];
            let bound = (model.basis().w[i].abs() + delta) * delta / (2.0 * a2 * s2.powi(4));
            assert!(
                change <= bound * (1.0 + 1e-9) + 1e-15,
                "coordinate {i}: change {change} exceeds bound {bound}"
            );
        }
    }

    #[test]
    fn f32_evaluation_tracks_f64() {
        let (data64, _) = generate_synthetic::<f64>(9, 3, 12);
        let data32 = RegressionData::<f32>::new(data64.x.map(|v| v as f32), data64.y.map(|v| v as f32)).unwrap();
        let m64 =
            MarginalModel::new(factorize(&data64).unwrap(), &Hyperparams::default()).unwrap();
        let m32 =
            MarginalModel::new(factorize(&data32).unwrap(), &Hyperparams::default()).unwrap();
        let a = m64.log_qtilde(1.1, 0.8);
        let b = m32.log_qtilde(1.1f32, 0.8f32) as f64;
        assert_relative_eq!(a, b, max_relative = 1e-4);
    }

    fn two_coef_fixture() -> (DMatrix<f64>, DVector<f64>, MarginalModel<f64>) {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.2, 0.8, -0.7]);
        let y = DVector::from_row_slice(&[1.1, 0.4, -0.9]);
        let data = RegressionData::new(x.clone(), y.clone()).unwrap();
        let model =
            MarginalModel::new(factorize(&data).unwrap(), &Hyperparams::default()).unwrap();
        (x, y, model)
    }

    /// Full joint density of the fixture at fixed scales, prefactors
    /// included, evaluated straight from the definition.
    fn fixture_joint(x: &DMatrix<f64>, y: &DVector<f64>, s1: f64, s2: f64, b: (f64, f64)) -> f64 {
        let mut resid = 0.0;
        for r in 0..x.nrows() {
            let e = x[(r, 0)] * b.0 + x[(r, 1)] * b.1 - y[r];
            resid += e * e;
        }
        s1.powi(-3)
            * s2.powi(-(x.nrows() as i32))
            * (-8.0 * s1.ln().powi(2)
                - s2 * s2 / 2.0
                - resid / (2.0 * s2 * s2)
                - (b.0 * b.0 + b.1 * b.1) / (2.0 * s1 * s1))
                .exp()
    }

    #[test]
    fn two_coefficient_density_matches_brute_double_integral() {
        // Tensor trapezoid over the coefficient plane against the closed
        // form, on a scale grid spanning [0.2, 3]^2. The box covers the
        // widest conditional by more than seven standard deviations.
        let (x, y, model) = two_coef_fixture();
        let (lo, m) = (-16.0, 1281);
        let h = -2.0 * lo / (m - 1) as f64;
        for &s1 in &[0.2, 0.9, 1.8, 3.0] {
            for &s2 in &[0.2, 0.9, 1.8, 3.0] {
                let mut sum = 0.0;
                for i in 0..m {
                    let wi = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                    let b1 = lo + i as f64 * h;
                    let mut row = 0.0;
                    for j in 0..m {
                        let wj = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                        row += wj * fixture_joint(&x, &y, s1, s2, (b1, lo + j as f64 * h));
                    }
                    sum += wi * row;
                }
                let integral = sum * h * h;
                let rel = (model.log_qtilde(s1, s2).exp() - integral).abs() / integral;
                assert!(rel < 1e-8, "relative gap {rel:e} at ({s1}, {s2})");
            }
        }
    }

    #[test]
    fn conditional_law_matches_brute_integral_ratios() {
        // E[z_i] and the second moment centered at the analytic mean, as
        // ratios of brute-force integrals with z = V^T beta.
        let (x, y, model) = two_coef_fixture();
        let v = model.basis().v.clone();
        let (lo, m) = (-16.0, 1281);
        let h = -2.0 * lo / (m - 1) as f64;
        for &(s1, s2) in &[(0.7f64, 1.2f64), (1.5, 0.5), (2.5, 2.0)] {
            let cond = model.conditional_z(s1, s2);
            let mut acc = [0.0f64; 5];
            for i in 0..m {
                let wi = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                let b1 = lo + i as f64 * h;
                for j in 0..m {
                    let wj = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                    let b2 = lo + j as f64 * h;
                    let f = wi * wj * fixture_joint(&x, &y, s1, s2, (b1, b2));
                    let z1 = v[(0, 0)] * b1 + v[(1, 0)] * b2;
                    let z2 = v[(0, 1)] * b1 + v[(1, 1)] * b2;
                    acc[0] += f;
                    acc[1] += f * z1;
                    acc[2] += f * z2;
                    acc[3] += f * (z1 - cond.mean[0]).powi(2);
                    acc[4] += f * (z2 - cond.mean[1]).powi(2);
                }
            }
            for i in 0..2 {
                assert_relative_eq!(
                    acc[1 + i] / acc[0],
                    cond.mean[i],
                    epsilon = 1e-10,
                    max_relative = 1e-8
                );
                assert_relative_eq!(
                    acc[3 + i] / acc[0],
                    cond.var[i],
                    epsilon = 1e-10,
                    max_relative = 1e-8
                );
            }
        }
    }
}
