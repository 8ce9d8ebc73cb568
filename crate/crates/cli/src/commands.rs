use std::time::Instant;

use betadiff::asymptotics::asymptotic_variance;
use betadiff::estimators::delta_hat;
use betadiff::inference::bootstrap_delta;
use betadiff::simulation::{run_plan_with, MonteCarloPlan};
use betadiff::weights::{check_theorem_assumptions, MomentProfile, Verdict, WeightSpec};
use betadiff::{PairedSampleF64, WeightFunctionF64};
use serde_json::{json, Value};

use crate::config::{CommandName, RunConfig};
use crate::error::CliError;
use crate::ingest::{ingest_csv, Columns};
use crate::report::{object, to_precise_json, Report, Timing, SCHEMA_VERSION};

struct Outcome {
    inputs: Value,
    results: Value,
    warnings: Vec<String>,
    /// Reported after the document is written (e.g. a violated verdict).
    deferred: Option<CliError>,
}

fn need<'a, T>(v: &'a Option<T>, what: &str, cmd: CommandName) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("{} requires {what}", cmd.as_str())))
}

fn weight(cfg: &RunConfig, cmd: CommandName) -> Result<(WeightSpec, WeightFunctionF64), CliError> {
    let spec = need(&cfg.weight, "--weight", cmd)?.resolve()?;
    let w = spec.build::<f64>()?;
    Ok((spec, w))
}

fn data(cfg: &RunConfig, cmd: CommandName) -> Result<(PairedSampleF64, Columns), CliError> {
    let path = need(&cfg.input_path, "--input", cmd)?;
    let columns = match &cfg.columns {
        Some(c) => c.parse().map_err(CliError::Usage)?,
        None => Columns::XY,
    };
    Ok((ingest_csv(path, columns)?, columns))
}

fn weight_echo(spec: &WeightSpec, w: &WeightFunctionF64) -> Value {
    json!({ "spec": spec, "label": w.label(), "meta": w.meta })
}

fn tie_warning(ties: usize) -> Option<String> {
    (ties > 0).then(|| format!("{ties} tied y-values: estimated with <=-counts rather than order statistics"))
}

fn estimate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cmd = CommandName::Estimate;
    let (spec, w) = weight(cfg, cmd)?;
    let (sample, columns) = data(cfg, cmd)?;
    let est = delta_hat(&sample, &w)?;
    Ok(Outcome {
        inputs: json!({
            "input_path": cfg.input_path, "columns": columns, "n": sample.len(),
            "weight": weight_echo(&spec, &w),
        }),
        results: Value::Object(object(&est)),
        warnings: tie_warning(est.tie_count).into_iter().collect(),
        deferred: None,
    })
}

fn infer(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cmd = CommandName::Infer;
    let (spec, w) = weight(cfg, cmd)?;
    let (sample, columns) = data(cfg, cmd)?;
    let boot = cfg.bootstrap.unwrap_or_default();
    let report = bootstrap_delta(&sample, &w, &boot)?;
    let mut warnings = report.notes.clone();
    warnings.extend(tie_warning(report.point.tie_count));
    Ok(Outcome {
        inputs: json!({
            "input_path": cfg.input_path, "columns": columns, "n": sample.len(),
            "weight": weight_echo(&spec, &w), "bootstrap": report.spec_echo,
        }),
        results: Value::Object(object(&report)),
        warnings,
        deferred: None,
    })
}

fn variance(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cmd = CommandName::Variance;
    let (spec, w) = weight(cfg, cmd)?;
    let model_spec = need(&cfg.model, "--model", cmd)?;
    let model = model_spec.build::<f64>()?;
    let quad = cfg.quadrature.unwrap_or_default();
    let v = asymptotic_variance(&model, &w, &quad)?;
    Ok(Outcome {
        inputs: json!({ "model": model_spec, "weight": weight_echo(&spec, &w), "quadrature": quad }),
        warnings: v.warnings.clone(),
        results: Value::Object(object(&v)),
        deferred: None,
    })
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cmd = CommandName::Simulate;
    let plan_spec = need(&cfg.plan, "--plan", cmd)?;
    let spec = plan_spec.weight.resolve()?;
    let w = spec.build::<f64>()?;
    let model = plan_spec.model.build::<f64>()?;
    let mut plan = MonteCarloPlan::new(model, w, plan_spec.sample_sizes.clone(), plan_spec.replications);
    plan.seed = cfg.seed.unwrap_or(plan_spec.seed);
    plan.checks = plan_spec.checks.clone();
    plan.bootstrap = plan_spec.bootstrap.unwrap_or_default();
    plan.quad = plan_spec.quadrature.unwrap_or_default();
    plan.keep_replicates = plan_spec.keep_replicates;
    let thresholds = plan_spec.thresholds.unwrap_or_default();
    let result = run_plan_with(&plan, &thresholds)?;
    let warnings = result
        .outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("check {:?} did not pass: {}", o.check, o.detail))
        .collect();
    let mut echo = object(plan_spec);
    echo.insert("seed".into(), json!(plan.seed));
    echo.insert("thresholds".into(), json!(thresholds));
    Ok(Outcome {
        inputs: Value::Object(echo),
        results: Value::Object(object(&result)),
        warnings,
        deferred: None,
    })
}

fn check_assumptions(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cmd = CommandName::CheckAssumptions;
    let (spec, w) = weight(cfg, cmd)?;
    let theorem = *need(&cfg.theorem, "--theorem", cmd)?;
    let (profile, source) = match (&cfg.moments, &cfg.model) {
        (Some(m), _) => (*m, "moments"),
        (None, Some(model)) => (model.build::<f64>()?.moment_profile, "model"),
        (None, None) => (MomentProfile::default(), "none"),
    };
    let report = check_theorem_assumptions(&w, theorem, &profile);
    let mut warnings = Vec::new();
    if source == "none" {
        warnings.push("no model or moment profile given: moment conditions are unverifiable".to_string());
    }
    if report.numeric_only {
        warnings.push("weight metadata is numeric only (tabulated weight)".to_string());
    }
    let deferred = (report.verdict == Verdict::Violated).then(|| {
        let binding = report.binding_condition.clone().unwrap_or_default();
        let detail = report.condition(&binding).map(|c| c.detail.clone()).unwrap_or_default();
        CliError::Domain(betadiff::Error::AssumptionViolation { condition: binding, detail })
    });
    Ok(Outcome {
        inputs: json!({
            "weight": weight_echo(&spec, &w), "theorem": theorem,
            "moment_profile": profile, "moment_source": source,
        }),
        results: Value::Object(object(&report)),
        warnings,
        deferred,
    })
}

/// Runs the configured command; returns the report text and any error to
/// raise after it has been written.
pub fn run(cfg: &RunConfig) -> Result<(String, Option<CliError>), CliError> {
    let cmd = cfg
        .command
        .ok_or_else(|| CliError::Usage("no command given (use a subcommand or \"command\" in --config)".into()))?;
    let start = Instant::now();
    let out = match cmd {
        CommandName::Estimate => estimate(cfg),
        CommandName::Infer => infer(cfg),
        CommandName::Variance => variance(cfg),
        CommandName::Simulate => simulate(cfg),
        CommandName::CheckAssumptions => check_assumptions(cfg),
    }?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: cmd.as_str().to_string(),
        inputs_echo: out.inputs,
        results: out.results,
        warnings: out.warnings,
        timing: Timing { elapsed_seconds: start.elapsed().as_secs_f64() },
    };
    Ok((to_precise_json(&report), out.deferred))
}
