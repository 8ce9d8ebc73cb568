//! Sample estimators of the classical beta, the weighted-Gini beta and their
//! difference, plus the population counterparts by quadrature.

use serde::Serialize;

use crate::asymptotics::{compute_b_d_z0, BivariateModel};
use crate::empirical::{sort_induced, PairedSample, SortedSample};
use crate::error::{Error, Result};
use crate::numeric::sum;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::weights::WeightFunction;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaEstimates<T> {
    pub beta_hat: T,
    pub beta_g_hat: T,
    /// `beta_g_hat - beta_hat`.
    pub delta_hat: T,
    /// Mean of the rank weights `w(F_hat(y_k))`.
    pub z0_bar: T,
    /// `sum (y_k - y_bar)^2 / n`.
    pub denom_classical: T,
    /// `sum (y_k - y_bar)(w_k - z0_bar) / n`, the sample analogue of `B`.
    pub denom_gini: T,
    pub used_fast_path: bool,
    pub tie_count: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GiniDiagnostics<T> {
    /// Estimate of `B = Cov[Y, w(F_Y(Y))]`.
    pub denom: T,
    pub z0_bar: T,
    pub used_fast_path: bool,
    pub tie_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniOptions<T> {
    /// The Gini denominator is degenerate when
    /// `|sum (y-y_bar)(w-z_bar)| <= tol * sqrt(sum (y-y_bar)^2 * sum (w-z_bar)^2)`.
    pub denominator_rel_tol: T,
}

impl<T: Scalar> Default for GiniOptions<T> {
    fn default() -> Self {
        Self { denominator_rel_tol: T::lit(1e-12) }
    }
}

fn centered<T: Scalar>(v: &[T]) -> Vec<T> {
    let m = sum(v.iter().copied()) / T::from_count(v.len());
    v.iter().map(|&a| a - m).collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    sum(a.iter().zip(b).map(|(&p, &q)| p * q))
}

fn check_y_spread<T: Scalar>(y: &[T]) -> Result<()> {
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateSample("all y-values are equal".into()));
    }
    Ok(())
}

/// OLS slope of `x` on `y`.
pub fn classical_beta<T: Scalar>(sample: &PairedSample<T>) -> Result<T> {
    check_y_spread(sample.y())?;
    let xc = centered(sample.x());
    let yc = centered(sample.y());
    let syy = dot(&yc, &yc);
    if syy <= T::zero() {
        return Err(Error::DegenerateSample("zero variance in y".into()));
    }
    Ok(dot(&xc, &yc) / syy)
}

/// Ratio of centered cross products, shared by both computational paths.
fn gini_ratio<T: Scalar>(
    x: &[T],
    y: &[T],
    weights: &[T],
    opts: &GiniOptions<T>,
    used_fast_path: bool,
    tie_count: usize,
) -> Result<(T, GiniDiagnostics<T>)> {
    check_y_spread(y)?;
    let n = T::from_count(x.len());
    let z0_bar = sum(weights.iter().copied()) / n;
    let wc: Vec<T> = weights.iter().map(|&v| v - z0_bar).collect();
    let xc = centered(x);
    let yc = centered(y);
    let num = dot(&xc, &wc);
    let den = dot(&yc, &wc);
    let scale = (dot(&yc, &yc) * dot(&wc, &wc)).sqrt();
    if den.abs() <= opts.denominator_rel_tol * scale {
        return Err(Error::DegenerateWeight(format!(
            "weighted-Gini denominator {den} is negligible against scale {scale}; \
             w(F(Y)) is uncorrelated with Y"
        )));
    }
    let diag = GiniDiagnostics { denom: den / n, z0_bar, used_fast_path, tie_count };
    Ok((num / den, diag))
}

/// Order-statistic form: `w_{k,n} = w(k/(n+1))` against induced order
/// statistics. Valid only for tie-free `y`.
pub fn gini_beta_ordered<T: Scalar>(
    sorted: &SortedSample<T>,
    w: &WeightFunction<T>,
    opts: &GiniOptions<T>,
) -> Result<(T, GiniDiagnostics<T>)> {
    let n = sorted.len();
    let denom = T::from_count(n + 1);
    let weights: Vec<T> = (1..=n).map(|k| w.evaluate(T::from_count(k) / denom)).collect();
    gini_ratio(&sorted.x_induced, &sorted.y_order, &weights, opts, true, 0)
}

/// Plug-in form with `w(F_hat(y_k))` in the original sample order; ties get
/// the `<=`-count of their whole group.
pub fn gini_beta_general<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    opts: &GiniOptions<T>,
) -> Result<(T, GiniDiagnostics<T>)> {
    let n = sample.len();
    let sorted = sort_induced(sample);
    let mut counts = vec![0usize; n];
    for (k, c) in sorted.le_counts().into_iter().enumerate() {
        counts[sorted.permutation[k]] = c;
    }
    let denom = T::from_count(n + 1);
    let weights: Vec<T> = counts.iter().map(|&c| w.evaluate(T::from_count(c) / denom)).collect();
    gini_ratio(sample.x(), sample.y(), &weights, opts, false, sample.tie_count())
}

pub fn gini_beta<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
) -> Result<(T, GiniDiagnostics<T>)> {
    gini_beta_with(sample, w, &GiniOptions::default())
}

/// Uses the order-statistic path when `y` has no ties, the general path otherwise.
pub fn gini_beta_with<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    opts: &GiniOptions<T>,
) -> Result<(T, GiniDiagnostics<T>)> {
    if sample.tie_count() == 0 {
        gini_beta_ordered(&sort_induced(sample), w, opts)
    } else {
        gini_beta_general(sample, w, opts)
    }
}

pub fn delta_hat<T: Scalar>(sample: &PairedSample<T>, w: &WeightFunction<T>) -> Result<BetaEstimates<T>> {
    delta_hat_with(sample, w, &GiniOptions::default())
}

pub fn delta_hat_with<T: Scalar>(
    sample: &PairedSample<T>,
    w: &WeightFunction<T>,
    opts: &GiniOptions<T>,
) -> Result<BetaEstimates<T>> {
    let beta_hat = classical_beta(sample)?;
    let (beta_g_hat, diag) = gini_beta_with(sample, w, opts)?;
    let yc = centered(sample.y());
    let n = sample.len();
    Ok(BetaEstimates {
        beta_hat,
        beta_g_hat,
        delta_hat: beta_g_hat - beta_hat,
        z0_bar: diag.z0_bar,
        denom_classical: dot(&yc, &yc) / T::from_count(n),
        denom_gini: diag.denom,
        used_fast_path: diag.used_fast_path,
        tie_count: sample.tie_count(),
        n,
    })
}

/// Population betas of a model under weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationBetas<T> {
    pub beta: T,
    pub beta_g: T,
    pub delta: T,
    pub z0: T,
    /// `Cov[Y, w(F_Y(Y))]`.
    pub b: T,
    /// `Var[Y]`.
    pub d: T,
    /// `Cov[X, Y]`.
    pub c: T,
}

/// `beta = int g(F^-1)(F^-1 - mu_Y) / D` and
/// `beta_G = int g(F^-1)(w - z0) / int F^-1 (w - z0)` by quadrature.
pub fn population_betas<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<PopulationBetas<T>> {
    let bdz = compute_b_d_z0(model, w, quad)?;
    if bdz.b_degenerate {
        return Err(Error::DegenerateWeight(format!(
            "B = Cov[Y, w(F_Y(Y))] = {} vanishes for {}",
            bdz.b,
            w.label()
        )));
    }
    let breaks = model.breakpoints_with(w);
    let (mx, my) = (model.mean_x, model.mean_y);
    let c = integrate(
        |t| (model.quantile_regression(t) - mx) * ((model.quantile)(t) - my),
        &breaks,
        quad,
    )?
    .value;
    let num_g = integrate(
        |t| (model.quantile_regression(t) - mx) * (w.evaluate(t) - bdz.z0),
        &breaks,
        quad,
    )?
    .value;
    let beta = c / bdz.d;
    let beta_g = num_g / bdz.b;
    Ok(PopulationBetas { beta, beta_g, delta: beta_g - beta, z0: bdz.z0, b: bdz.b, d: bdz.d, c })
}

/// `Delta = beta_G - beta` for the model.
pub fn population_delta<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<T> {
    population_betas(model, w, quad).map(|p| p.delta)
}
