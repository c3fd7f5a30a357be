//! 2-D trapezoid quadrature over the marginal scale posterior.
//!
//! The marginal density is smooth and vanishes rapidly toward the
//! boundaries of any rectangle chosen by [`auto_bounds`], so the uniform
//! trapezoid rule converges superalgebraically in the node count; 200
//! nodes per axis is already far past the point where node count is the
//! accuracy bottleneck. Axes are linear in `(sigma1, sigma2)`; log
//! parameterization is used only while searching for the mode.
//!
//! All accumulation happens against `exp(ln qt - shift)` with `shift` the
//! grid maximum of the log density, so no density value can overflow.
//! Expectations are ratios of accumulated sums and the shift cancels.
//!
//! Row evaluation is parallel. Per-row partial sums are collected in row
//! order and reduced sequentially, so the result is bitwise independent of
//! the thread count and schedule.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marginal::{ConditionalGaussian, MarginalModel};
use crate::model::Hyperparams;
use crate::scalar::Scalar;

/// Nodes per axis of the coarse log-spaced mode scan.
const SCAN_NODES: usize = 64;
/// Scale range covered by the mode scan.
const SCAN_LO: f64 = 1e-3;
const SCAN_HI: f64 = 1e3;
/// Samples per rectangle edge when checking the tail drop.
const EDGE_SAMPLES: usize = 33;
/// Geometric factor by which a violating bound is pushed outward.
const EXPAND_FACTOR: f64 = 1.5;
/// Expansion steps allowed before giving up.
const MAX_EXPANSIONS: usize = 80;
/// Bracket tolerance of the golden-section mode refinement, in ln sigma.
const REFINE_TOL: f64 = 1e-4;

/// Integration rectangle and resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T: Scalar> {
    /// Inclusive `sigma1` bounds, `0 < lo < hi`.
    pub sigma1: (T, T),
    /// Inclusive `sigma2` bounds, `0 < lo < hi`.
    pub sigma2: (T, T),
    /// Nodes per axis, at least 2.
    pub nodes_per_axis: usize,
}

impl<T: Scalar> GridSpec<T> {
    /// Checks bounds ordering, positivity, and finiteness.
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(lo.is_finite() && hi.is_finite() && lo > T::zero() && hi > lo) {
                return Err(Error::Grid(format!(
                    "{name} bounds must satisfy 0 < lo < hi and be finite, got ({lo:?}, {hi:?})"
                )));
            }
        }
        if self.nodes_per_axis < 2 {
            return Err(Error::Grid(format!(
                "nodes_per_axis must be at least 2, got {}",
                self.nodes_per_axis
            )));
        }
        Ok(())
    }
}

/// Named integrand evaluated at every grid node.
///
/// The closure receives the node `(sigma1, sigma2)` and the conditional
/// Gaussian of the rotated coefficients there, and writes `dim` values
/// into the output slice. It must write every slot; the slice contents on
/// entry are unspecified.
pub struct Functional<T: Scalar> {
    name: String,
    dim: usize,
    eval: Box<dyn Fn(T, T, &ConditionalGaussian<T>, &mut [T]) + Send + Sync>,
}

impl<T: Scalar> Functional<T> {
    /// Builds a named functional of dimension `dim >= 1`.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(T, T, &ConditionalGaussian<T>, &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 1, "functional dimension must be at least 1");
        Self { name: name.into(), dim, eval: Box::new(eval) }
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Raw integral sums produced by [`integrate`].
///
/// `normalizer` and every raw moment carry the common factor
/// `exp(-log_shift)` times the trapezoid cell area; expectations are the
/// ratios `raw / normalizer`, where everything common cancels.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator<T: Scalar> {
    /// Grid the sums were computed on.
    pub grid: GridSpec<T>,
    /// Grid maximum of the log density, subtracted before exponentiation.
    pub log_shift: T,
    /// Trapezoid sum of the rescaled density. Positive.
    pub normalizer: T,
    entries: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> MomentAccumulator<T> {
    /// Raw (unnormalized) moment vector of a functional.
    pub fn raw(&self, name: &str) -> Option<&[T]> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Posterior expectation vector of a functional.
    pub fn expectation(&self, name: &str) -> Result<Vec<T>> {
        let raw = self.raw(name).ok_or_else(|| {
            Error::Functional(format!("no functional named {name:?} was integrated"))
        })?;
        Ok(raw.iter().map(|&v| v / self.normalizer).collect())
    }

    /// Posterior expectation of a scalar (dimension 1) functional.
    pub fn expectation_scalar(&self, name: &str) -> Result<T> {
        let e = self.expectation(name)?;
        if e.len() != 1 {
            return Err(Error::Functional(format!(
                "functional {name:?} has dimension {}, expected 1",
                e.len()
            )));
        }
        Ok(e[0])
    }
}

/// Locates the marginal mode and grows an integration rectangle around it
/// until the log density everywhere on the boundary sits at least
/// `hyper.tail_drop` below the mode.
///
/// The mode comes from a coarse log-spaced scan refined by coordinate-wise
/// golden sections. Violating bounds are pushed out geometrically, lower
/// bounds never below `hyper.sigma_floor`. Fails if the scan maximum sits
/// on the scan boundary, or if the tail requirement is still violated
/// after the expansion budget (which happens when the marginal does not
/// vanish toward small scales, e.g. an interpolating design).
pub fn auto_bounds<T: Scalar>(
    model: &MarginalModel<T>,
    hyper: &Hyperparams<T>,
) -> Result<GridSpec<T>> {
    hyper.validate()?;
    let f = |u1: T, u2: T| model.log_qtilde(u1.exp(), u2.exp());

    // Coarse scan, log-spaced.
    let u_lo = T::lit(SCAN_LO.ln());
    let u_hi = T::lit(SCAN_HI.ln());
    let m = SCAN_NODES;
    let du = (u_hi - u_lo) / T::from_dim(m - 1);
    let mut best = (0usize, 0usize);
    let mut best_val = f(u_lo, u_lo);
    for i in 0..m {
        let u1 = u_lo + du * T::from_dim(i);
        for j in 0..m {
            let u2 = u_lo + du * T::from_dim(j);
            let val = f(u1, u2);
            if val > best_val {
                best_val = val;
                best = (i, j);
            }
        }
    }
    if !best_val.is_finite() {
        return Err(Error::Grid("log density is not finite anywhere on the mode scan".into()));
    }
    if best.0 == 0 || best.0 == m - 1 || best.1 == 0 || best.1 == m - 1 {
        return Err(Error::Grid(format!(
            "mode scan maximum sits on the scan boundary near \
             sigma1 = {:?}, sigma2 = {:?}; supply bounds manually",
            (u_lo + du * T::from_dim(best.0)).exp(),
            (u_lo + du * T::from_dim(best.1)).exp(),
        )));
    }

    // Golden-section refinement, alternating axes.
    let tol = T::lit(REFINE_TOL);
    let mut u1 = u_lo + du * T::from_dim(best.0);
    let mut u2 = u_lo + du * T::from_dim(best.1);
    let mut l_star = best_val;
    for _ in 0..3 {
        let (a, va) = golden_max(u1 - du, u1 + du, tol, |t| f(t, u2));
        u1 = a;
        l_star = l_star.max(va);
        let (b, vb) = golden_max(u2 - du, u2 + du, tol, |t| f(u1, t));
        u2 = b;
        l_star = l_star.max(vb);
    }

    // Geometric expansion until the boundary satisfies the tail drop.
    let ln_floor = hyper.sigma_floor.ln();
    let step = T::lit(EXPAND_FACTOR).ln();
    let target = l_star - hyper.tail_drop;
    let mut lo1 = (u1 - step).max(ln_floor);
    let mut hi1 = u1 + step;
    let mut lo2 = (u2 - step).max(ln_floor);
    let mut hi2 = u2 + step;

    for _ in 0..MAX_EXPANSIONS {
        let e_lo1 = edge_max(lo2, hi2, |t| f(lo1, t));
        let e_hi1 = edge_max(lo2, hi2, |t| f(hi1, t));
        let e_lo2 = edge_max(lo1, hi1, |t| f(t, lo2));
        let e_hi2 = edge_max(lo1, hi1, |t| f(t, hi2));

        let mut all_ok = true;
        let mut moved = false;
        if e_lo1 > target {
            all_ok = false;
            let next = (lo1 - step).max(ln_floor);
            moved |= next < lo1;
            lo1 = next;
        }
        if e_hi1 > target {
            all_ok = false;
            hi1 += step;
            moved = true;
        }
        if e_lo2 > target {
            all_ok = false;
            let next = (lo2 - step).max(ln_floor);
            moved |= next < lo2;
            lo2 = next;
        }
        if e_hi2 > target {
            all_ok = false;
            hi2 += step;
            moved = true;
        }
        if all_ok {
            return Ok(GridSpec {
                sigma1: (lo1.exp(), hi1.exp()),
                sigma2: (lo2.exp(), hi2.exp()),
                nodes_per_axis: hyper.grid_nodes,
            });
        }
        if !moved {
            return Err(Error::Grid(
                "boundary density stays within tail_drop of the mode at the sigma floor; \
                 the marginal does not vanish toward small scales"
                    .into(),
            ));
        }
    }
    Err(Error::Grid(format!(
        "tail drop {:?} not reached within {MAX_EXPANSIONS} expansion steps",
        hyper.tail_drop
    )))
}

/// Trapezoid sweep of the rescaled density and all functionals in one
/// pass over the grid.
///
/// Functional names must be unique. The per-functional sums are
/// accumulated independently and in a fixed order, so reordering the
/// functional list permutes the output entries without changing any
/// value, and the thread schedule never affects the result.
pub fn integrate<T: Scalar>(
    model: &MarginalModel<T>,
    grid: &GridSpec<T>,
    functionals: &[Functional<T>],
) -> Result<MomentAccumulator<T>> {
    grid.validate()?;
    for (idx, f) in functionals.iter().enumerate() {
        if functionals[..idx].iter().any(|g| g.name == f.name) {
            return Err(Error::Functional(format!("duplicate functional name {:?}", f.name)));
        }
    }

    let m = grid.nodes_per_axis;
    let s1 = axis_nodes(grid.sigma1.0, grid.sigma1.1, m);
    let s2 = axis_nodes(grid.sigma2.0, grid.sigma2.1, m);
    let h1 = (grid.sigma1.1 - grid.sigma1.0) / T::from_dim(m - 1);
    let h2 = (grid.sigma2.1 - grid.sigma2.0) / T::from_dim(m - 1);

    let log_rows: Vec<Vec<T>> = (0..m)
        .into_par_iter()
        .map(|i| s2.iter().map(|&b| model.log_qtilde(s1[i], b)).collect())
        .collect();
    let mut shift = log_rows[0][0];
    for row in &log_rows {
        for &v in row {
            shift = shift.max(v);
        }
    }
    if !shift.is_finite() {
        return Err(Error::Grid("log density is not finite on the grid".into()));
    }

    struct Partial<T> {
        norm: T,
        raws: Vec<Vec<T>>,
    }
    let max_dim = functionals.iter().map(|f| f.dim).max().unwrap_or(0);
    let partials: Vec<Partial<T>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let ci = trap_weight::<T>(i, m);
            let mut norm = T::zero();
            let mut raws: Vec<Vec<T>> =
                functionals.iter().map(|f| vec![T::zero(); f.dim]).collect();
            let mut scratch = vec![T::zero(); max_dim];
            let mut cond = ConditionalGaussian {
                mean: DVector::zeros(model.k()),
                var: DVector::zeros(model.k()),
            };
            for j in 0..m {
                let d = (log_rows[i][j] - shift).exp() * ci * trap_weight::<T>(j, m);
                if d == T::zero() {
                    continue;
                }
                norm += d;
                if !functionals.is_empty() {
                    model.conditional_z_into(s1[i], s2[j], &mut cond);
                    for (f, raw) in functionals.iter().zip(raws.iter_mut()) {
                        let out = &mut scratch[..f.dim];
                        (f.eval)(s1[i], s2[j], &cond, out);
                        for (acc, &v) in raw.iter_mut().zip(out.iter()) {
                            *acc += d * v;
                        }
                    }
                }
            }
            Partial { norm, raws }
        })
        .collect();

    // Fixed-order reduction over rows.
    let cell = h1 * h2;
    let mut normalizer = T::zero();
    let mut raws: Vec<Vec<T>> = functionals.iter().map(|f| vec![T::zero(); f.dim]).collect();
    for p in &partials {
        normalizer += p.norm;
        for (acc, part) in raws.iter_mut().zip(&p.raws) {
            for (a, &v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
    }
    normalizer *= cell;
    for raw in &mut raws {
        for v in raw.iter_mut() {
            *v *= cell;
        }
    }
    if !(normalizer > T::zero()) {
        return Err(Error::Grid("integrated mass is zero on the grid".into()));
    }

    Ok(MomentAccumulator {
        grid: *grid,
        log_shift: shift,
        normalizer,
        entries: functionals
            .iter()
            .map(|f| f.name.clone())
            .zip(raws)
            .collect(),
    })
}

/// Uniform nodes with the endpoints exact.
fn axis_nodes<T: Scalar>(lo: T, hi: T, m: usize) -> Vec<T> {
    let h = (hi - lo) / T::from_dim(m - 1);
    let mut nodes: Vec<T> = (0..m).map(|i| lo + h * T::from_dim(i)).collect();
    nodes[m - 1] = hi;
    nodes
}

#[inline]
fn trap_weight<T: Scalar>(i: usize, m: usize) -> T {
    if i == 0 || i == m - 1 {
        T::lit(0.5)
    } else {
        T::one()
    }
}

/// Golden-section maximization on `[lo, hi]`, assuming unimodality there.
fn golden_max<T: Scalar>(mut lo: T, mut hi: T, tol: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut c = hi - (hi - lo) * inv_phi;
    let mut d = lo + (hi - lo) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - (hi - lo) * inv_phi;
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + (hi - lo) * inv_phi;
            fd = f(d);
        }
    }
    let mid = (lo + hi) * T::lit(0.5);
    (mid, f(mid))
}

/// Maximum of `f` over a uniformly sampled closed interval.
fn edge_max<T: Scalar>(lo: T, hi: T, f: impl Fn(T) -> T) -> T {
    let h = (hi - lo) / T::from_dim(EDGE_SAMPLES - 1);
    let mut best = f(lo);
    for i in 1..EDGE_SAMPLES {
        best = best.max(f(lo + h * T::from_dim(i)));
    }
    best
}
