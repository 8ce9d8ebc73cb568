use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::BivariateModel;
use crate::error::{Error, Result};
use crate::numeric::normal_quantile;
use crate::rng::open_unit;
use crate::weights::MomentProfile;
use crate::Scalar;

fn std_normal<T: Scalar>(rng: &mut crate::rng::StreamRng) -> T {
    normal_quantile(T::lit(open_unit(rng)))
}

/// Bivariate normal `(X, Y)`. The regression of `X` on `Y` is linear, so
/// `Delta = 0` for every weight.
pub fn make_gaussian_model<T: Scalar>(mu_x: T, mu_y: T, var_x: T, var_y: T, rho: T) -> Result<BivariateModel<T>> {
    if !(var_x > T::zero() && var_y > T::zero()) {
        return Err(Error::InvalidParameter(format!("variances must be positive, got {var_x}, {var_y}")));
    }
    if !(rho.abs() < T::one()) {
        return Err(Error::InvalidParameter(format!("|rho| must be < 1, got {rho}")));
    }
    let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
    let slope = rho * sx / sy;
    let resid_var = (T::one() - rho * rho) * var_x;
    let resid_sd = resid_var.sqrt();
    Ok(BivariateModel {
        name: format!("gaussian(rho={rho})"),
        quantile: Arc::new(move |t| mu_y + sy * normal_quantile(t)),
        cond_mean: Arc::new(move |y| mu_x + slope * (y - mu_y)),
        cond_var: Arc::new(move |_| resid_var),
        mean_x: mu_x,
        mean_y: mu_y,
        var_y,
        sampler: Arc::new(move |rng| {
            let z1: T = std_normal(rng);
            let z2: T = std_normal(rng);
            let y = mu_y + sy * z1;
            (mu_x + slope * (y - mu_y) + resid_sd * z2, y)
        }),
        moment_profile: MomentProfile::all_moments_bounded_variance(),
        breakpoints: Vec::new(),
    })
}

/// Built-in models with analytically known `F_Y^{-1}`, `g` and `v^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fixture", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearFixture {
    /// `Y ~ U(0,1)`, `X = Y^2 + sigma eps`.
    QuadraticUniform { sigma: f64 },
    /// `Y ~ U(0,1)`, `X = intercept + slope Y + sigma eps`.
    LinearUniform { intercept: f64, slope: f64, sigma: f64 },
    /// `Y = exp(tau Z)`, `X = Z + sigma eps`, so `g(y) = ln(y)/tau`.
    Lognormal { tau: f64, sigma: f64 },
    /// `Y ~ Pareto(alpha)` on `[1, inf)`, `X = sqrt(Y) + sigma eps`. Only moments
    /// below `alpha` exist, so this fails the normality conditions for small `alpha`.
    ParetoHeavyTail { alpha: f64, sigma: f64 },
}

pub fn make_nonlinear_model<T: Scalar>(fixture: NonlinearFixture) -> Result<BivariateModel<T>> {
    let noise = |sigma: f64| -> Result<T> {
        if sigma >= 0.0 && sigma.is_finite() {
            Ok(T::lit(sigma))
        } else {
            Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")))
        }
    };
    let bounded = MomentProfile::all_moments_bounded_variance();
    let model = match fixture {
        NonlinearFixture::QuadraticUniform { sigma } => {
            let s = noise(sigma)?;
            BivariateModel {
                name: format!("quadratic_uniform(sigma={sigma})"),
                quantile: Arc::new(|t| t),
                cond_mean: Arc::new(|y| y * y),
                cond_var: Arc::new(move |_| s * s),
                mean_x: T::lit(1.0 / 3.0),
                mean_y: T::lit(0.5),
                var_y: T::lit(1.0 / 12.0),
                sampler: Arc::new(move |rng| {
                    let y = T::lit(open_unit(rng));
                    let e: T = std_normal(rng);
                    (y * y + s * e, y)
                }),
                moment_profile: bounded,
                breakpoints: Vec::new(),
            }
        }
        NonlinearFixture::LinearUniform { intercept, slope, sigma } => {
            let s = noise(sigma)?;
            let (a, c) = (T::lit(intercept), T::lit(slope));
            BivariateModel {
                name: format!("linear_uniform(a={intercept}, c={slope}, sigma={sigma})"),
                quantile: Arc::new(|t| t),
                cond_mean: Arc::new(move |y| a + c * y),
                cond_var: Arc::new(move |_| s * s),
                mean_x: a + c * T::lit(0.5),
                mean_y: T::lit(0.5),
                var_y: T::lit(1.0 / 12.0),
                sampler: Arc::new(move |rng| {
                    let y = T::lit(open_unit(rng));
                    let e: T = std_normal(rng);
                    (a + c * y + s * e, y)
                }),
                moment_profile: bounded,
                breakpoints: Vec::new(),
            }
        }
        NonlinearFixture::Lognormal { tau, sigma } => {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
            }
            let s = noise(sigma)?;
            let tt = T::lit(tau);
            let e2 = (tau * tau).exp();
            BivariateModel {
                name: format!("lognormal(tau={tau}, sigma={sigma})"),
                quantile: Arc::new(move |t| (tt * normal_quantile(t)).exp()),
                cond_mean: Arc::new(move |y: T| y.ln() / tt),
                cond_var: Arc::new(move |_| s * s),
                mean_x: T::zero(),
                mean_y: T::lit((tau * tau / 2.0).exp()),
                var_y: T::lit((e2 - 1.0) * e2),
                sampler: Arc::new(move |rng| {
                    let z: T = std_normal(rng);
                    let e: T = std_normal(rng);
                    (z + s * e, (tt * z).exp())
                }),
                moment_profile: bounded,
                breakpoints: Vec::new(),
            }
        }
        NonlinearFixture::ParetoHeavyTail { alpha, sigma } => {
            if !(alpha > 2.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "alpha must exceed 2 so that Var[Y] exists, got {alpha}"
                )));
            }
            let s = noise(sigma)?;
            let inv_alpha = T::lit(1.0 / alpha);
            BivariateModel {
                name: format!("pareto(alpha={alpha}, sigma={sigma})"),
                quantile: Arc::new(move |t: T| (T::one() - t).powf(-inv_alpha)),
                cond_mean: Arc::new(|y: T| y.sqrt()),
                cond_var: Arc::new(move |_| s * s),
                mean_x: T::lit(alpha / (alpha - 0.5)),
                mean_y: T::lit(alpha / (alpha - 1.0)),
                var_y: T::lit(alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0))),
                sampler: Arc::new(move |rng| {
                    let u = T::lit(open_unit(rng));
                    let y = u.powf(-inv_alpha);
                    let e: T = std_normal(rng);
                    (y.sqrt() + s * e, y)
                }),
                moment_profile: MomentProfile {
                    y_moment_sup: Some(alpha),
                    x_moment_sup: Some(2.0 * alpha),
                    cond_second_moment_p: Some(alpha),
                    ..bounded
                },
                breakpoints: Vec::new(),
            }
        }
    };
    Ok(model)
}
