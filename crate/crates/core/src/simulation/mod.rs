//! Model generators and the Monte Carlo harness that checks consistency,
//! asymptotic normality and bootstrap calibration against analytic oracles.

mod models;

pub use models::{make_gaussian_model, make_nonlinear_model, NonlinearFixture};

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_variance, BivariateModel};
use crate::error::{Error, Result};
use crate::estimators::{delta_hat, population_delta};
use crate::inference::{bootstrap_delta, BootstrapSpec};
use crate::numeric::{mean, median, normal_cdf, sample_variance, CompensatedSum};
use crate::quadrature::QuadratureSpec;
use crate::rng::{stream_id, stream_rng};
use crate::weights::WeightFunction;
use crate::Scalar;

/// 1% critical value of the Kolmogorov statistic, times `sqrt(R)`.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Serializable model choice: the Gaussian family or one of the fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        #[serde(default)]
        mu_x: f64,
        #[serde(default)]
        mu_y: f64,
        #[serde(default = "one")]
        var_x: f64,
        #[serde(default = "one")]
        var_y: f64,
        rho: f64,
    },
    QuadraticUniform { sigma: f64 },
    LinearUniform { intercept: f64, slope: f64, sigma: f64 },
    Lognormal { tau: f64, sigma: f64 },
    ParetoHeavyTail { alpha: f64, sigma: f64 },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build<T: Scalar>(&self) -> Result<BivariateModel<T>> {
        let lit = T::lit;
        match *self {
            ModelSpec::Gaussian { mu_x, mu_y, var_x, var_y, rho } => {
                make_gaussian_model(lit(mu_x), lit(mu_y), lit(var_x), lit(var_y), lit(rho))
            }
            ModelSpec::QuadraticUniform { sigma } => make_nonlinear_model(NonlinearFixture::QuadraticUniform { sigma }),
            ModelSpec::LinearUniform { intercept, slope, sigma } => {
                make_nonlinear_model(NonlinearFixture::LinearUniform { intercept, slope, sigma })
            }
            ModelSpec::Lognormal { tau, sigma } => make_nonlinear_model(NonlinearFixture::Lognormal { tau, sigma }),
            ModelSpec::ParetoHeavyTail { alpha, sigma } => {
                make_nonlinear_model(NonlinearFixture::ParetoHeavyTail { alpha, sigma })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Consistency,
    Normality,
    VarianceMatch,
    Coverage,
    Size,
    Power,
}

impl Check {
    fn needs_bootstrap(self) -> bool {
        matches!(self, Check::Coverage | Check::Size | Check::Power)
    }

    fn needs_variance(self) -> bool {
        matches!(self, Check::Normality | Check::VarianceMatch)
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloPlan<T: Scalar> {
    pub model: BivariateModel<T>,
    pub w: WeightFunction<T>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub checks: BTreeSet<Check>,
    /// Used per replicate by the coverage, size and power checks; its seed is
    /// replaced by one derived from the replicate stream.
    pub bootstrap: BootstrapSpec,
    pub quad: QuadratureSpec,
    pub keep_replicates: bool,
}

impl<T: Scalar> MonteCarloPlan<T> {
    pub fn new(model: BivariateModel<T>, w: WeightFunction<T>, sample_sizes: Vec<usize>, replications: usize) -> Self {
        Self {
            model,
            w,
            sample_sizes,
            replications,
            seed: 0,
            checks: BTreeSet::new(),
            bootstrap: BootstrapSpec::default(),
            quad: QuadratureSpec::default(),
            keep_replicates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::InvalidParameter(format!("need R >= 100 replications, got {}", self.replications)));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("sample sizes must be non-empty and strictly increasing".into()));
        }
        if self.sample_sizes[0] < 2 {
            return Err(Error::InvalidParameter("sample sizes must be at least 2".into()));
        }
        if self.checks.iter().any(|c| c.needs_bootstrap()) {
            self.bootstrap.validate()?;
        }
        self.quad.validate()
    }
}

/// Pass/fail thresholds applied to the summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckThresholds {
    pub variance_ratio: (f64, f64),
    pub coverage: (f64, f64),
    pub size: (f64, f64),
    pub power_min: f64,
    pub median_bias_max: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self {
            variance_ratio: (0.9, 1.1),
            coverage: (0.92, 0.98),
            size: (0.02, 0.08),
            power_min: 0.8,
            median_bias_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeSummary {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub mean_delta_hat: f64,
    pub bias: f64,
    pub median_bias: f64,
    pub rmse: f64,
    /// Sample variance of `sqrt(n)(Delta_hat - Delta)`.
    pub scaled_variance: f64,
    /// `scaled_variance / (Upsilon_1^2 + Upsilon_2^2)`.
    pub variance_ratio: Option<f64>,
    /// Kolmogorov distance of the standardized replicates to `Phi`.
    pub ks_distance: Option<f64>,
    pub ks_critical: f64,
    pub coverage: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub delta_hats: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub model: String,
    pub weight: String,
    pub seed: u64,
    pub population_delta: f64,
    pub upsilon1_sq: Option<f64>,
    pub upsilon2_sq: Option<f64>,
    pub asymptotic_variance: Option<f64>,
    pub per_n: Vec<SampleSizeSummary>,
    pub outcomes: Vec<CheckOutcome>,
}

impl MonteCarloResult {
    pub fn outcome(&self, check: Check) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.check == check)
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

struct Replicate {
    delta_hat: f64,
    ci: Option<(f64, f64)>,
    reject: Option<bool>,
}

/// Sup-distance between the empirical cdf of `z` and `Phi`.
pub fn ks_distance_normal(z: &[f64]) -> f64 {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let r = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let phi: f64 = normal_cdf(v);
            (((i + 1) as f64 / r) - phi).max(phi - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

fn rate(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + f as usize, t + 1));
    hits as f64 / total as f64
}

fn run_replicate<T: Scalar>(plan: &MonteCarloPlan<T>, n: usize, idx: usize, with_bootstrap: bool) -> Result<Replicate> {
    let stream = stream_id(n as u64, idx as u64);
    let sample = plan.model.sample(n, plan.seed, stream)?;
    let est = delta_hat(&sample, &plan.w)?;
    if !with_bootstrap {
        return Ok(Replicate { delta_hat: est.delta_hat.as_f64(), ci: None, reject: None });
    }
    let boot_seed = rand::RngCore::next_u64(&mut stream_rng(plan.seed ^ 0x9e37_79b9_7f4a_7c15, stream));
    let spec = BootstrapSpec { seed: boot_seed, ..plan.bootstrap };
    let report = bootstrap_delta(&sample, &plan.w, &spec)?;
    let (lo, hi) = (report.ci_low.as_f64(), report.ci_high.as_f64());
    Ok(Replicate { delta_hat: est.delta_hat.as_f64(), ci: Some((lo, hi)), reject: Some(report.reject_h0_delta_zero) })
}

pub fn run_plan<T: Scalar>(plan: &MonteCarloPlan<T>) -> Result<MonteCarloResult> {
    run_plan_with(plan, &CheckThresholds::default())
}

pub fn run_plan_with<T: Scalar>(plan: &MonteCarloPlan<T>, thresholds: &CheckThresholds) -> Result<MonteCarloResult> {
    plan.validate()?;
    let context = |e: Error| match e {
        Error::NumericQuality(m) => Error::NumericQuality(format!("oracle for {}: {m}", plan.model.name)),
        other => other,
    };
    let delta = population_delta(&plan.model, &plan.w, &plan.quad).map_err(context)?.as_f64();
    let variance = if plan.checks.iter().any(|c| c.needs_variance()) {
        Some(asymptotic_variance(&plan.model, &plan.w, &plan.quad).map_err(context)?)
    } else {
        None
    };
    let total_var = variance.as_ref().map(|v| v.total.as_f64());
    let with_bootstrap = plan.checks.iter().any(|c| c.needs_bootstrap());
    let r = plan.replications;

    let mut per_n = Vec::with_capacity(plan.sample_sizes.len());
    for &n in &plan.sample_sizes {
        let outcomes: Vec<Result<Replicate>> =
            (0..r).into_par_iter().map(|i| run_replicate(plan, n, i, with_bootstrap)).collect();
        let mut reps = Vec::with_capacity(r);
        let mut failures = 0;
        let mut first_error = None;
        for o in outcomes {
            match o {
                Ok(rep) => reps.push(rep),
                Err(e) => {
                    failures += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
        if failures * 100 > r {
            return Err(Error::NumericQuality(format!(
                "{failures} of {r} replicates failed at n = {n}; first error: {}",
                first_error.map(|e| e.to_string()).unwrap_or_default()
            )));
        }
        let d: Vec<f64> = reps.iter().map(|x| x.delta_hat).collect();
        let errors: Vec<f64> = d.iter().map(|v| v - delta).collect();
        let sqrt_n = (n as f64).sqrt();
        let scaled: Vec<f64> = errors.iter().map(|e| sqrt_n * e).collect();
        let mut sq = CompensatedSum::new();
        errors.iter().for_each(|e| sq.add(e * e));
        let scaled_variance = sample_variance(&scaled);
        let ks_distance = match total_var {
            Some(v) if v > 0.0 => Some(ks_distance_normal(&scaled.iter().map(|s| s / v.sqrt()).collect::<Vec<_>>())),
            _ => None,
        };
        per_n.push(SampleSizeSummary {
            n,
            replications: reps.len(),
            failures,
            mean_delta_hat: mean(&d),
            bias: mean(&errors),
            median_bias: median(&errors),
            rmse: (sq.value() / errors.len() as f64).sqrt(),
            scaled_variance,
            variance_ratio: total_var.filter(|&v| v > 0.0).map(|v| scaled_variance / v),
            ks_distance,
            ks_critical: KS_CRITICAL_1PCT / (reps.len() as f64).sqrt(),
            coverage: with_bootstrap
                .then(|| rate(reps.iter().map(|x| x.ci.is_some_and(|(lo, hi)| lo <= delta && delta <= hi)))),
            rejection_rate: with_bootstrap.then(|| rate(reps.iter().map(|x| x.reject == Some(true)))),
            delta_hats: plan.keep_replicates.then_some(d),
        });
    }

    let outcomes = plan.checks.iter().map(|&c| judge(c, &per_n, delta, total_var, thresholds)).collect();
    Ok(MonteCarloResult {
        model: plan.model.name.clone(),
        weight: plan.w.label(),
        seed: plan.seed,
        population_delta: delta,
        upsilon1_sq: variance.as_ref().map(|v| v.upsilon1_sq.as_f64()),
        upsilon2_sq: variance.as_ref().map(|v| v.upsilon2_sq.as_f64()),
        asymptotic_variance: total_var,
        per_n,
        outcomes,
    })
}

fn judge(
    check: Check,
    per_n: &[SampleSizeSummary],
    delta: f64,
    total_var: Option<f64>,
    th: &CheckThresholds,
) -> CheckOutcome {
    let last = per_n.last().expect("validated non-empty");
    let inside = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
    let (passed, detail) = match check {
        Check::Consistency => {
            let rmse: Vec<f64> = per_n.iter().map(|s| s.rmse).collect();
            // A model with exactly zero error at every n is trivially consistent.
            let decreasing = rmse.windows(2).all(|w| w[1] < w[0]) || rmse.iter().all(|&v| v == 0.0);
            let bias_ok = last.median_bias.abs() < th.median_bias_max;
            (decreasing && bias_ok, format!("rmse {rmse:?}; median bias at n={} is {:.3e}", last.n, last.median_bias))
        }
        Check::Normality => match (last.ks_distance, total_var) {
            (Some(ks), _) => (ks < last.ks_critical, format!("KS {ks:.4} vs critical {:.4}", last.ks_critical)),
            (None, Some(0.0)) => {
                let degenerate = last.scaled_variance == 0.0;
                (degenerate, "zero asymptotic variance; replicates must be degenerate".to_string())
            }
            _ => (false, "no asymptotic variance available".to_string()),
        },
        Check::VarianceMatch => match last.variance_ratio {
            Some(ratio) => (inside(ratio, th.variance_ratio), format!("Var[sqrt(n)(Delta_hat-Delta)] / Upsilon^2 = {ratio:.4}")),
            None => {
                let zero = total_var == Some(0.0) && last.scaled_variance == 0.0;
                (zero, format!("asymptotic variance {total_var:?}, empirical {:.3e}", last.scaled_variance))
            }
        },
        Check::Coverage => {
            let c = last.coverage.unwrap_or(f64::NAN);
            (inside(c, th.coverage), format!("coverage of Delta = {delta:.6} is {c:.4}"))
        }
        Check::Size => {
            let rr = last.rejection_rate.unwrap_or(f64::NAN);
            (inside(rr, th.size), format!("rejection rate under Delta = {delta:.3e} is {rr:.4}"))
        }
        Check::Power => {
            let rr = last.rejection_rate.unwrap_or(f64::NAN);
            (rr > th.power_min, format!("rejection rate under Delta = {delta:.6} is {rr:.4}"))
        }
    };
    CheckOutcome { check, passed, detail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{make_cte, make_identity};

    #[test]
    fn ks_distance_of_perfect_grid_is_small() {
        let r = 1000;
        let z: Vec<f64> = (0..r).map(|i| crate::numeric::normal_quantile((i as f64 + 0.5) / r as f64)).collect();
        assert!((ks_distance_normal(&z) - 0.5 / r as f64).abs() < 1e-9);
        assert!(ks_distance_normal(&[10.0, 11.0]) > 0.99);
    }

    #[test]
    fn deterministic_linear_model_is_exact() {
        let model = make_nonlinear_model::<f64>(NonlinearFixture::LinearUniform { intercept: 1.0, slope: 2.0, sigma: 0.0 }).unwrap();
        let mut plan = MonteCarloPlan::new(model, make_identity(), vec![50, 100], 100);
        plan.checks = [Check::Consistency, Check::VarianceMatch].into();
        plan.keep_replicates = true;
        let res = run_plan(&plan).unwrap();
        assert!(res.population_delta.abs() < 1e-12);
        for s in &res.per_n {
            assert!(s.delta_hats.as_ref().unwrap().iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn seeded_plans_are_reproducible() {
        let model = make_nonlinear_model::<f64>(NonlinearFixture::QuadraticUniform { sigma: 0.1 }).unwrap();
        let mut plan = MonteCarloPlan::new(model, make_cte(0.75).unwrap(), vec![100, 200], 100);
        plan.seed = 77;
        plan.checks = [Check::Consistency].into();
        assert_eq!(run_plan(&plan).unwrap(), run_plan(&plan).unwrap());
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let model = make_gaussian_model(0.0, 0.0, 1.0, 1.0, 0.5).unwrap();
        let plan = MonteCarloPlan::new(model.clone(), make_identity(), vec![100, 50], 100);
        assert!(run_plan(&plan).is_err());
        let plan = MonteCarloPlan::new(model, make_identity(), vec![100], 10);
        assert!(run_plan(&plan).is_err());
    }

    #[test]
    fn model_spec_json() {
        let m: ModelSpec = serde_json::from_str(r#"{"family":"gaussian","rho":0.6}"#).unwrap();
        assert_eq!(m, ModelSpec::Gaussian { mu_x: 0.0, mu_y: 0.0, var_x: 1.0, var_y: 1.0, rho: 0.6 });
        assert!(m.build::<f64>().is_ok());
        let q: ModelSpec = serde_json::from_str(r#"{"family":"quadratic_uniform","sigma":0.1}"#).unwrap();
        assert!(q.build::<f32>().is_ok());
    }
}
