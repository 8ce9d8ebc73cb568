//! Asymptotic variance `Upsilon_1^2 + Upsilon_2^2` of `sqrt(n)(Delta_hat - Delta)`
//! for an analytic model.
//!
//! `Upsilon_1^2` is the conditional-noise part: an ordinary integral of
//! `v^2 o F^{-1}` against the squared influence of the two slopes.
//! `Upsilon_2^2` comes from the empirical process of `Y` and is a quadratic
//! form in the Brownian-bridge kernel `min(s,t) - st` over `dH_1`, `dH_2`.

mod model;

pub use model::{BivariateModel, PairSampler, RealFn};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{population_betas, PopulationBetas};
use crate::numeric::normal_quantile;
use crate::quadrature::{bridge_form, integrate, integrate_with_floor, refine_stieltjes, GridTerms, QuadratureSpec};
use crate::weights::{check_theorem_assumptions, Theorem, Verdict, WeightFunction};
use crate::Scalar;

/// Relative size of `B` (against `sqrt(D int w^2)`) below which it counts as zero.
const B_DEGENERATE_REL: f64 = 1e-9;
/// Ratio of successive cutoff sensitivities treated as non-convergence.
const DIVERGENCE_RATIO: f64 = 0.9;
/// Growth (relative to the value) below which cutoff sensitivity is ignored.
const DIVERGENCE_REL: f64 = 1e-6;
const MAX_STIELTJES_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdZ0<T> {
    /// `Cov[Y, w(F_Y(Y))]`.
    pub b: T,
    /// `Var[Y]`.
    pub d: T,
    /// `E[w(F_Y(Y))]`.
    pub z0: T,
    /// Set when `B` is negligible; the variance formulas are then undefined.
    pub b_degenerate: bool,
}

pub fn compute_b_d_z0<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<BdZ0<T>> {
    quad.validate()?;
    let breaks = model.breakpoints_with(w);
    let my = model.mean_y;
    let z0 = integrate(|t| w.evaluate(t), &breaks, quad)?.value;
    let w2 = integrate(|t| w.evaluate(t).powi(2), &breaks, quad)?.value;
    let d = integrate(|t| ((model.quantile)(t) - my).powi(2), &breaks, quad)?.value;
    let scale = (d * w2).sqrt();
    let b = integrate_with_floor(
        |t| ((model.quantile)(t) - my) * (w.evaluate(t) - z0),
        &breaks,
        quad,
        T::lit(quad.rel_tol) * scale,
    )?
    .value;
    let b_degenerate = w.is_constant() || b.abs() <= T::lit(B_DEGENERATE_REL) * scale;
    Ok(BdZ0 { b, d, z0, b_degenerate })
}

fn require_b<T: Scalar>(bdz: &BdZ0<T>, w: &WeightFunction<T>) -> Result<()> {
    if bdz.b_degenerate {
        return Err(Error::DegenerateWeight(format!(
            "B = Cov[Y, w(F_Y(Y))] vanishes for {}; the variance is undefined",
            w.label()
        )));
    }
    if bdz.d <= T::zero() {
        return Err(Error::DegenerateSample("Var[Y] is zero".into()));
    }
    Ok(())
}

fn upsilon1_at<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    bdz: &BdZ0<T>,
    quad: &QuadratureSpec,
) -> Result<T> {
    let breaks = model.breakpoints_with(w);
    let my = model.mean_y;
    let (b, d, z0) = (bdz.b, bdz.d, bdz.z0);
    let magnitude = integrate(
        |t| {
            let q = (model.quantile)(t);
            (model.cond_var)(q) * (((w.evaluate(t) - z0) / b).powi(2) + ((q - my) / d).powi(2))
        },
        &breaks,
        quad,
    )?
    .value;
    let value = integrate_with_floor(
        |t| {
            let q = (model.quantile)(t);
            (model.cond_var)(q) * ((w.evaluate(t) - z0) / b - (q - my) / d).powi(2)
        },
        &breaks,
        quad,
        T::lit(quad.rel_tol) * magnitude,
    )?
    .value;
    // Below the absolute accuracy the two influences cancel exactly
    // (w o F affine in Y on the support of v^2).
    if value <= T::lit(quad.rel_tol) * magnitude {
        return Ok(T::zero());
    }
    Ok(value)
}

/// Values of a cutoff-dependent quantity at `eps*10`, `eps`, `eps/10`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffSensitivity<T> {
    pub eps: Vec<f64>,
    pub values: Vec<T>,
}

impl<T: Scalar> CutoffSensitivity<T> {
    /// Steady growth as the cutoff tightens, beyond `rel * scale`: the
    /// integrands are non-negative, so a divergent integral increases
    /// monotonically and its increments do not shrink.
    fn diverges(&self, rel: f64, scale: f64) -> bool {
        let [coarse, mid, fine] = [self.values[0], self.values[1], self.values[2]].map(|v| v.as_f64());
        let d1 = mid - coarse;
        let d2 = fine - mid;
        d1 > 0.0 && d2 > rel * scale.max(mid.abs()) && d2 >= DIVERGENCE_RATIO * d1
    }
}

fn sensitivity<T: Scalar>(
    quad: &QuadratureSpec,
    mut at: impl FnMut(&QuadratureSpec) -> Result<T>,
) -> Result<CutoffSensitivity<T>> {
    let eps = vec![quad.eps_q * 10.0, quad.eps_q, quad.eps_q / 10.0];
    let values = eps.iter().map(|&e| at(&quad.with_eps(e))).collect::<Result<Vec<_>>>()?;
    Ok(CutoffSensitivity { eps, values })
}

fn upsilon1_checked<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    bdz: &BdZ0<T>,
    quad: &QuadratureSpec,
) -> Result<(T, CutoffSensitivity<T>)> {
    let sens = sensitivity(quad, |q| upsilon1_at(model, w, bdz, q))?;
    if sens.diverges(DIVERGENCE_REL, 0.0) {
        return Err(Error::AssumptionViolation {
            condition: "T3(iii)".into(),
            detail: format!(
                "Upsilon_1^2 keeps growing as the endpoint cutoff shrinks ({:?}); \
                 v^2 o F^-1 grows too fast",
                sens.values
            ),
        });
    }
    Ok((sens.values[1], sens))
}

/// `int v^2(F^-1(t)) ((w(t)-z0)/B - (F^-1(t)-E[Y])/D)^2 dt`.
pub fn upsilon1_sq<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<T> {
    let bdz = compute_b_d_z0(model, w, quad)?;
    require_b(&bdz, w)?;
    upsilon1_checked(model, w, &bdz, quad).map(|(v, _)| v)
}

/// Closed form for a bivariate normal pair with correlation `rho`,
/// `C = Cov[X,Y]` and `D = Var[Y]`:
/// `(1/rho^2 - 1)(C^2/D) int ((w-z0)/B - Phi^{-1}(t)/sqrt(D))^2 dt`.
pub fn gaussian_upsilon1_sq<T: Scalar>(
    rho: T,
    c: T,
    d: T,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<T> {
    quad.validate()?;
    if rho == T::zero() || !(rho.abs() < T::one()) {
        return Err(Error::InvalidParameter(format!("rho must be in (-1,1) \\ {{0}}, got {rho}")));
    }
    if !(d > T::zero()) {
        return Err(Error::InvalidParameter(format!("D must be positive, got {d}")));
    }
    let breaks = &w.discontinuities;
    let sd = d.sqrt();
    let z0 = integrate(|t| w.evaluate(t), breaks, quad)?.value;
    let b = sd * integrate(|t| normal_quantile(t) * (w.evaluate(t) - z0), breaks, quad)?.value;
    if w.is_constant() || b.abs() <= T::lit(B_DEGENERATE_REL) * sd {
        return Err(Error::DegenerateWeight(format!("B vanishes for {}", w.label())));
    }
    let integral = integrate(|t| ((w.evaluate(t) - z0) / b - normal_quantile(t) / sd).powi(2), breaks, quad)?.value;
    let factor = T::one() / (rho * rho) - T::one();
    Ok(factor * c * c / d * integral)
}

/// The three terms of `Upsilon_2^2` and the grid refinement history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Upsilon2Detail<T> {
    pub value: T,
    /// `[w-w term, cross term, H_2-H_2 term]`, signed.
    pub terms: [T; 3],
    /// Magnitude scale (kernel form of the uncancelled increments).
    pub scale: T,
    pub history: Vec<(usize, Vec<T>)>,
}

fn upsilon2_at<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    bdz: &BdZ0<T>,
    beta: T,
    beta_g: T,
    quad: &QuadratureSpec,
) -> Result<Upsilon2Detail<T>> {
    let (b, d, z0) = (bdz.b, bdz.d, bdz.z0);
    let (mx, my) = (model.mean_x, model.mean_y);
    let breaks = model.breakpoints_with(w);
    let outcome = refine_stieltjes(&breaks, quad, MAX_STIELTJES_DOUBLINGS, |grid| {
        let q: Vec<T> = grid.nodes.iter().map(|&t| (model.quantile)(t)).collect();
        let g: Vec<T> = q.iter().map(|&y| (model.cond_mean)(y) - mx).collect();
        let f: Vec<T> = q.iter().map(|&y| y - my).collect();
        let diff = |v: &dyn Fn(usize) -> T| -> Vec<T> { (0..grid.cells()).map(|i| v(i + 1) - v(i)).collect() };
        let dh1 = diff(&|i| g[i] - beta_g * f[i]);
        let dh2 = diff(&|i| g[i] * f[i] - beta * f[i] * f[i]);
        let wc: Vec<T> = grid.mids.iter().map(|&s| w.evaluate(s) - z0).collect();
        let a1: Vec<T> = wc.iter().zip(&dh1).map(|(&c, &h)| c * h).collect();

        let t1 = bridge_form(&grid.mids, &a1, &a1) / (b * b);
        let t2 = -T::lit(2.0) * bridge_form(&grid.mids, &a1, &dh2) / (b * d);
        let t3 = bridge_form(&grid.mids, &dh2, &dh2) / (d * d);

        let dg = diff(&|i| g[i]);
        let df = diff(&|i| f[i]);
        let dgf = diff(&|i| g[i] * f[i]);
        let dff = diff(&|i| f[i] * f[i]);
        let u: Vec<T> = (0..grid.cells())
            .map(|i| {
                wc[i].abs() * (dg[i].abs() + beta_g.abs() * df[i].abs()) / b.abs()
                    + (dgf[i].abs() + beta.abs() * dff[i].abs()) / d
            })
            .collect();
        let scale = bridge_form(&grid.mids, &u, &u).abs();
        Ok(GridTerms { terms: vec![t1, t2, t3], scale })
    })?;
    let terms = [outcome.terms[0], outcome.terms[1], outcome.terms[2]];
    let raw = terms[0] + terms[1] + terms[2];
    let mag = terms.iter().map(|v| v.abs()).fold(T::zero(), |a, v| a + v).max(outcome.scale);
    if raw < -T::lit(10.0 * quad.rel_tol) * mag {
        return Err(Error::InternalInconsistency(format!(
            "Upsilon_2^2 = {raw} is negative beyond tolerance (scale {mag}); the bridge kernel is PSD"
        )));
    }
    // Within tolerance of zero the terms cancel exactly (linear regression).
    let value = if raw <= T::lit(quad.rel_tol) * mag { T::zero() } else { raw };
    Ok(Upsilon2Detail { value, terms, scale: outcome.scale, history: outcome.history })
}

/// Double Riemann-Stieltjes form with `H_1 = (g o F^-1 - E[X]) - beta_G (F^-1 - E[Y])`
/// and `H_2 = (g o F^-1 - E[X])(F^-1 - E[Y]) - beta (F^-1 - E[Y])^2`.
pub fn upsilon2_sq<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    beta: T,
    beta_g: T,
    quad: &QuadratureSpec,
) -> Result<T> {
    upsilon2_detail(model, w, beta, beta_g, quad).map(|d| d.value)
}

pub fn upsilon2_detail<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    beta: T,
    beta_g: T,
    quad: &QuadratureSpec,
) -> Result<Upsilon2Detail<T>> {
    let bdz = compute_b_d_z0(model, w, quad)?;
    require_b(&bdz, w)?;
    upsilon2_at(model, w, &bdz, beta, beta_g, quad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadDiagnostics<T> {
    pub eps_q: f64,
    pub grid_size: usize,
    pub upsilon1_cutoff: CutoffSensitivity<T>,
    pub upsilon2_cutoff: CutoffSensitivity<T>,
    pub upsilon2_terms: [T; 3],
    pub stieltjes_history: Vec<(usize, Vec<T>)>,
    /// How integrands are evaluated inside Stieltjes cells.
    pub stieltjes_convention: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceComponents<T> {
    pub upsilon1_sq: T,
    pub upsilon2_sq: T,
    pub total: T,
    #[serde(rename = "B")]
    pub b: T,
    #[serde(rename = "D")]
    pub d: T,
    pub z0: T,
    pub population: PopulationBetas<T>,
    pub quad_diag: QuadDiagnostics<T>,
    pub warnings: Vec<String>,
}

/// `Upsilon_1^2 + Upsilon_2^2` after checking the normality conditions.
pub fn asymptotic_variance<T: Scalar>(
    model: &BivariateModel<T>,
    w: &WeightFunction<T>,
    quad: &QuadratureSpec,
) -> Result<VarianceComponents<T>> {
    let report = check_theorem_assumptions(w, Theorem::T3, &model.moment_profile);
    let mut warnings = Vec::new();
    for c in &report.conditions {
        match c.verdict {
            Verdict::Violated => {
                return Err(Error::AssumptionViolation {
                    condition: c.condition.clone(),
                    detail: c.detail.clone(),
                })
            }
            Verdict::Unverifiable => warnings.push(format!("{} unverifiable: {}", c.condition, c.detail)),
            Verdict::Satisfied => {}
        }
    }
    let population = population_betas(model, w, quad)?;
    let bdz = BdZ0 { b: population.b, d: population.d, z0: population.z0, b_degenerate: false };
    let (u1, upsilon1_cutoff) = upsilon1_checked(model, w, &bdz, quad)?;
    let (beta, beta_g) = (population.beta, population.beta_g);
    let mut details = Vec::with_capacity(3);
    for e in [quad.eps_q * 10.0, quad.eps_q, quad.eps_q / 10.0] {
        details.push(upsilon2_at(model, w, &bdz, beta, beta_g, &quad.with_eps(e))?);
    }
    let upsilon2_cutoff = CutoffSensitivity {
        eps: vec![quad.eps_q * 10.0, quad.eps_q, quad.eps_q / 10.0],
        values: details.iter().map(|d| d.value).collect(),
    };
    let u2_scale = details.iter().map(|d| d.scale.as_f64()).fold(0.0, f64::max);
    if upsilon2_cutoff.diverges(DIVERGENCE_REL, u2_scale) {
        return Err(Error::AssumptionViolation {
            condition: "T3(ii)".into(),
            detail: format!("Upsilon_2^2 keeps growing as the cutoff shrinks ({:?})", upsilon2_cutoff.values),
        });
    }
    let u2 = details.swap_remove(1);
    Ok(VarianceComponents {
        upsilon1_sq: u1,
        upsilon2_sq: u2.value,
        total: u1 + u2.value,
        b: population.b,
        d: population.d,
        z0: population.z0,
        population,
        quad_diag: QuadDiagnostics {
            eps_q: quad.eps_q,
            grid_size: quad.grid_size,
            upsilon1_cutoff,
            upsilon2_cutoff,
            upsilon2_terms: u2.terms,
            stieltjes_history: u2.history,
            stieltjes_convention: "increments on logit-uniform cells, integrand at cell midpoints",
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{make_gaussian_model, make_nonlinear_model, NonlinearFixture};
    use crate::weights::{make_cte, make_identity, make_pht, MomentProfile};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn quadratic(sigma: f64) -> BivariateModel<f64> {
        make_nonlinear_model::<f64>(NonlinearFixture::QuadraticUniform { sigma }).unwrap()
    }

    /// Midpoint rule on a uniform grid; independent of the logit Romberg path.
    fn midpoint(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    }

    /// Dense O(N^2) Stieltjes double sum with left-point weights on a uniform grid.
    fn brute_upsilon2(model: &BivariateModel<f64>, w: impl Fn(f64) -> f64, beta: f64, beta_g: f64, n: usize) -> f64 {
        let (mx, my) = (model.mean_x, model.mean_y);
        let z0 = midpoint(&w, 200_000);
        let b = midpoint(|t| ((model.quantile)(t) - my) * (w(t) - z0), 200_000);
        let d = model.var_y;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let h1 = |t: f64| (model.quantile_regression(t) - mx) - beta_g * ((model.quantile)(t) - my);
        let h2 = |t: f64| {
            let f = (model.quantile)(t) - my;
            (model.quantile_regression(t) - mx) * f - beta * f * f
        };
        let s: Vec<f64> = nodes[..n].to_vec();
        let a: Vec<f64> = (0..n).map(|i| (w(s[i]) - z0) * (h1(nodes[i + 1]) - h1(nodes[i]))).collect();
        let c: Vec<f64> = (0..n).map(|i| h2(nodes[i + 1]) - h2(nodes[i])).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let k = s[i].min(s[j]) - s[i] * s[j];
                total += k * (a[i] * a[j] / (b * b) - 2.0 * a[i] * c[j] / (b * d) + c[i] * c[j] / (d * d));
            }
        }
        total
    }

    #[test]
    fn uniform_identity_b_d_z0() {
        let r = compute_b_d_z0(&quadratic(0.0), &make_identity(), &quad()).unwrap();
        assert_relative_eq!(r.z0, 0.5, max_relative = 1e-10);
        assert_relative_eq!(r.b, 1.0 / 12.0, max_relative = 1e-9);
        assert_relative_eq!(r.d, 1.0 / 12.0, max_relative = 1e-9);
        assert!(!r.b_degenerate);
    }

    #[test]
    fn constant_weight_is_degenerate() {
        let g = make_gaussian_model::<f64>(0.0, 0.0, 1.0, 1.0, 0.5).unwrap();
        let w = make_pht(1.0).unwrap();
        assert!(compute_b_d_z0(&g, &w, &quad()).unwrap().b_degenerate);
        assert!(matches!(upsilon1_sq(&g, &w, &quad()), Err(Error::DegenerateWeight(_))));
        assert!(matches!(asymptotic_variance(&g, &w, &quad()), Err(Error::DegenerateWeight(_))));
    }

    #[test]
    fn gaussian_cte_half_b() {
        let g = make_gaussian_model::<f64>(0.0, 0.0, 1.0, 1.0, 0.5).unwrap();
        let r = compute_b_d_z0(&g, &make_cte(0.5).unwrap(), &quad()).unwrap();
        assert_relative_eq!(r.z0, 0.5, max_relative = 1e-10);
        assert_relative_eq!(r.b, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-8);
        assert_relative_eq!(r.d, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn upsilon1_vanishes_without_noise() {
        let w = make_pht(0.75).unwrap();
        assert_eq!(upsilon1_sq(&quadratic(0.0), &w, &quad()).unwrap(), 0.0);
        let lin = make_nonlinear_model::<f64>(NonlinearFixture::LinearUniform { intercept: 0.0, slope: 1.0, sigma: 1.0 }).unwrap();
        // w o F is affine in Y for uniform Y, so the two terms cancel identically.
        assert_eq!(upsilon1_sq(&lin, &make_identity(), &quad()).unwrap(), 0.0);
        assert_eq!(upsilon1_sq(&lin, &make_pht(2.0).unwrap(), &quad()).unwrap(), 0.0);
        let v = asymptotic_variance(&lin, &make_pht(2.0).unwrap(), &quad()).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn upsilon1_quadratic_cte_matches_dense_grid() {
        let sigma: f64 = 0.1;
        let nu = 0.75;
        let z0 = 1.0 - nu;
        let b = (1.0 - nu * nu) / 2.0 - z0 / 2.0;
        let oracle = sigma * sigma
            * midpoint(|t| ((if t > nu { 1.0 } else { 0.0 } - z0) / b - 12.0 * (t - 0.5)).powi(2), 1 << 20);
        let got = upsilon1_sq(&quadratic(sigma), &make_cte(nu).unwrap(), &quad()).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-6);
        assert_relative_eq!(got, 0.093_333_333_333, max_relative = 1e-6);
        // CTE(1/2): the integrand is 4 sigma^2 in closed form.
        let half = upsilon1_sq(&quadratic(sigma), &make_cte(0.5).unwrap(), &quad()).unwrap();
        assert_relative_eq!(half, 4.0 * sigma * sigma, max_relative = 1e-8);
    }

    #[test]
    fn gaussian_two_routes_agree() {
        for rho in [0.3, 0.6, 0.9] {
            let g = make_gaussian_model::<f64>(0.0, 0.0, 1.0, 1.0, rho).unwrap();
            for w in [make_identity(), make_pht(2.0).unwrap(), make_cte(0.75).unwrap()] {
                let general = upsilon1_sq(&g, &w, &quad()).unwrap();
                let closed = gaussian_upsilon1_sq(rho, rho, 1.0, &w, &quad()).unwrap();
                assert_relative_eq!(general, closed, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn gaussian_two_routes_with_scale() {
        // var_x = 4, var_y = 2.25: C = rho * 2 * 1.5.
        let rho = 0.6;
        let g = make_gaussian_model::<f64>(1.0, -2.0, 4.0, 2.25, rho).unwrap();
        let w = make_pht(0.75).unwrap();
        let general = upsilon1_sq(&g, &w, &quad()).unwrap();
        let closed = gaussian_upsilon1_sq(rho, rho * 3.0, 2.25, &w, &quad()).unwrap();
        assert_relative_eq!(general, closed, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_closed_form_structure() {
        let w = make_identity();
        let q = quad();
        let base: f64 = gaussian_upsilon1_sq(0.6, 0.6, 1.0, &w, &q).unwrap();
        assert_relative_eq!(gaussian_upsilon1_sq(0.6, 1.2, 1.0, &w, &q).unwrap(), 4.0 * base, max_relative = 1e-12);
        let near_one = gaussian_upsilon1_sq(0.999_999, 1.0, 1.0, &w, &q).unwrap();
        assert!(near_one < 1e-5 * base.max(1.0));
        assert!(matches!(gaussian_upsilon1_sq(0.0, 1.0, 1.0, &w, &q), Err(Error::InvalidParameter(_))));
        assert!(gaussian_upsilon1_sq(1.0, 1.0, 1.0, &w, &q).is_err());
    }

    #[test]
    fn upsilon2_vanishes_for_linear_regression() {
        let models = [
            make_gaussian_model::<f64>(0.0, 0.0, 1.0, 1.0, 0.6).unwrap(),
            make_gaussian_model::<f64>(2.0, 1.0, 3.0, 0.5, -0.4).unwrap(),
            make_nonlinear_model::<f64>(NonlinearFixture::LinearUniform { intercept: 1.0, slope: -3.0, sigma: 0.2 }).unwrap(),
        ];
        for m in &models {
            for w in [make_identity(), make_pht(2.0).unwrap(), make_cte(0.75).unwrap(), make_pht(0.75).unwrap()] {
                let v = asymptotic_variance(m, &w, &quad()).unwrap();
                assert!(v.upsilon2_sq < 1e-8 * v.quad_diag.upsilon2_terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0));
                assert!(v.population.delta.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn upsilon2_quadratic_cte_matches_brute_force() {
        for (nu, sigma) in [(0.5, 0.0), (0.75, 0.1)] {
            let model = quadratic(sigma);
            let w = make_cte(nu).unwrap();
            let pop = population_betas(&model, &w, &quad()).unwrap();
            let got = upsilon2_sq(&model, &w, pop.beta, pop.beta_g, &quad()).unwrap();
            let oracle = brute_upsilon2(&model, |t| if t > nu { 1.0 } else { 0.0 }, pop.beta, pop.beta_g, 10_000);
            assert_relative_eq!(got, oracle, max_relative = 1e-3);
        }
        // Regression fixtures for the production path.
        let model = quadratic(0.0);
        let w = make_cte(0.5).unwrap();
        let v = asymptotic_variance(&model, &w, &quad()).unwrap();
        assert_relative_eq!(v.upsilon2_sq, 0.054_761_904_761_9, max_relative = 1e-6);
        assert_eq!(v.upsilon1_sq, 0.0);
    }

    #[test]
    fn upsilon2_is_stable_under_grid_refinement() {
        let model = quadratic(0.1);
        let w = make_pht(0.75).unwrap();
        let pop = population_betas(&model, &w, &quad()).unwrap();
        let coarse = upsilon2_sq(&model, &w, pop.beta, pop.beta_g, &quad()).unwrap();
        let fine = upsilon2_sq(&model, &w, pop.beta, pop.beta_g, &QuadratureSpec { grid_size: 8192, ..quad() }).unwrap();
        assert_relative_eq!(coarse, fine, max_relative = 1e-6);
        assert!(coarse > 0.0);
    }

    #[test]
    fn total_is_sum_of_components() {
        let v = asymptotic_variance(&quadratic(0.1), &make_cte(0.75).unwrap(), &quad()).unwrap();
        assert_eq!(v.total, v.upsilon1_sq + v.upsilon2_sq);
        assert_relative_eq!(v.population.delta, 1.0 / 6.0, max_relative = 1e-9);
        assert_eq!(v.quad_diag.upsilon1_cutoff.values.len(), 3);
    }

    #[test]
    fn heavy_tail_violates_moment_condition() {
        let m = make_nonlinear_model::<f64>(NonlinearFixture::ParetoHeavyTail { alpha: 3.0, sigma: 0.1 }).unwrap();
        match asymptotic_variance(&m, &make_pht(2.0).unwrap(), &quad()) {
            Err(Error::AssumptionViolation { condition, .. }) => assert_eq!(condition, "T3(ii)"),
            other => panic!("expected T3(ii) violation, got {other:?}"),
        }
    }

    #[test]
    fn explosive_conditional_variance_is_flagged() {
        // v^2(F^-1(t)) = t^-1.5: not integrable, and the profile does not say so.
        let mut m = quadratic(0.0);
        m.cond_var = Arc::new(|y: f64| y.powf(-1.5));
        m.moment_profile = MomentProfile { cond_var_growth: None, ..m.moment_profile };
        match upsilon1_sq(&m, &make_cte(0.75).unwrap(), &quad()) {
            Err(Error::AssumptionViolation { condition, .. }) => assert_eq!(condition, "T3(iii)"),
            other => panic!("expected T3(iii) violation, got {other:?}"),
        }
    }

    #[test]
    fn f32_matches_f64_roughly() {
        let g32 = make_gaussian_model::<f32>(0.0, 0.0, 1.0, 1.0, 0.6).unwrap();
        let w32 = make_identity::<f32>();
        let q = QuadratureSpec { eps_q: 1e-6, rel_tol: 1e-5, ..quad() };
        let v32 = upsilon1_sq(&g32, &w32, &q).unwrap();
        let v64 = gaussian_upsilon1_sq(0.6, 0.6, 1.0, &make_identity(), &quad()).unwrap();
        assert_relative_eq!(v32 as f64, v64, max_relative = 1e-3);
    }
}
