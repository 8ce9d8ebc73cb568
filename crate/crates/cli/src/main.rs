mod commands;
mod config;
mod error;
mod ingest;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{json_arg, read_json, CommandName, RunConfig, WeightArg};
use crate::error::CliError;

/// Classical vs weighted-Gini beta: estimation, bootstrap inference,
/// asymptotic variance and Monte Carlo validation.
#[derive(Debug, Parser)]
#[command(name = "betadiff", version)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical and weighted-Gini betas and their difference.
    Estimate(DataArgs),
    /// Bootstrap confidence interval and test of Delta = 0.
    Infer(InferArgs),
    /// Asymptotic variance components for an analytic model.
    Variance(ModelArgs),
    /// Run a Monte Carlo plan.
    Simulate(SimulateArgs),
    /// Check a theorem's assumptions for a weight (and model).
    CheckAssumptions(CheckArgs),
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    /// Two-column CSV (x = response, y = explanatory; header optional).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Weight: pht:NU, cte:NU, identity, tabulated:t=w,..., or a JSON object.
    #[arg(long)]
    weight: Option<String>,
    /// Column order in the file: "x,y" (default) or "y,x".
    #[arg(long)]
    columns: Option<String>,
}

#[derive(Debug, Args, Default)]
struct InferArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of bootstrap resamples (default 2000).
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    /// naive or m_out_of_n.
    #[arg(long)]
    scheme: Option<String>,
    /// Resample size for m_out_of_n (default ceil(n^(2/3))).
    #[arg(long)]
    m: Option<usize>,
    /// Confidence level (default 0.95).
    #[arg(long)]
    level: Option<f64>,
    /// percentile or basic.
    #[arg(long)]
    ci_method: Option<String>,
    /// Bootstrap seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    /// Model as inline JSON or a path, e.g. '{"family":"gaussian","rho":0.6}'.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    weight: Option<String>,
    /// Quadrature settings as inline JSON or a path.
    #[arg(long)]
    quadrature: Option<String>,
}

#[derive(Debug, Args, Default)]
struct SimulateArgs {
    /// Monte Carlo plan (JSON file or inline JSON).
    #[arg(long)]
    plan: Option<String>,
    /// Overrides the plan's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
struct CheckArgs {
    #[arg(long)]
    weight: Option<String>,
    /// T1, T2 or T3.
    #[arg(long)]
    theorem: Option<String>,
    /// Model supplying the moment profile (inline JSON or path).
    #[arg(long)]
    model: Option<String>,
    /// Moment profile as inline JSON or a path.
    #[arg(long)]
    moments: Option<String>,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn merge(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = match &cli.config {
        Some(p) => read_json(p, "config")?,
        None => RunConfig::default(),
    };
    if cli.output.is_some() {
        cfg.output_path = cli.output;
    }
    let weight = |cfg: &mut RunConfig, w: Option<String>| {
        if let Some(w) = w {
            cfg.weight = Some(WeightArg::Short(w));
        }
    };
    let data = |cfg: &mut RunConfig, d: DataArgs| {
        if d.input.is_some() {
            cfg.input_path = d.input;
        }
        if d.columns.is_some() {
            cfg.columns = d.columns;
        }
        weight(cfg, d.weight);
    };
    match cli.command {
        None => {}
        Some(Command::Estimate(d)) => {
            cfg.command = Some(CommandName::Estimate);
            data(&mut cfg, d);
        }
        Some(Command::Infer(a)) => {
            cfg.command = Some(CommandName::Infer);
            data(&mut cfg, a.data);
            let mut b = cfg.bootstrap.unwrap_or_default();
            if let Some(r) = a.bootstrap_reps {
                b.replicates = r;
            }
            if let Some(s) = a.scheme {
                b.scheme = s.parse()?;
            }
            if a.m.is_some() {
                b.m = a.m;
            }
            if let Some(l) = a.level {
                b.confidence_level = l;
            }
            if let Some(c) = a.ci_method {
                b.ci_method = c.parse()?;
            }
            if let Some(s) = a.seed.or(cfg.seed) {
                b.seed = s;
                cfg.seed = Some(s);
            }
            cfg.bootstrap = Some(b);
        }
        Some(Command::Variance(a)) => {
            cfg.command = Some(CommandName::Variance);
            if let Some(m) = a.model {
                cfg.model = Some(json_arg(&m, "model")?);
            }
            if let Some(q) = a.quadrature {
                cfg.quadrature = Some(json_arg(&q, "quadrature")?);
            }
            weight(&mut cfg, a.weight);
        }
        Some(Command::Simulate(a)) => {
            cfg.command = Some(CommandName::Simulate);
            if let Some(p) = a.plan {
                cfg.plan = Some(json_arg(&p, "plan")?);
            }
            if a.seed.is_some() {
                cfg.seed = a.seed;
            }
        }
        Some(Command::CheckAssumptions(a)) => {
            cfg.command = Some(CommandName::CheckAssumptions);
            weight(&mut cfg, a.weight);
            if let Some(t) = a.theorem {
                cfg.theorem = Some(t.parse()?);
            }
            if let Some(m) = a.model {
                cfg.model = Some(json_arg(&m, "model")?);
            }
            if let Some(m) = a.moments {
                cfg.moments = Some(json_arg(&m, "moment profile")?);
            }
        }
    }
    if cfg.command == Some(CommandName::Simulate) && cfg.plan.is_none() {
        if let Some(p) = cfg.plan_path.clone() {
            cfg.plan = Some(read_json(&p, "plan")?);
        }
    }
    Ok(cfg)
}

fn emit_error(e: &CliError) -> ExitCode {
    let _ = writeln!(std::io::stderr(), "{}", report::to_compact_json(&e.to_json()));
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return emit_error(&usage(e.render()));
        }
    };
    let outcome = merge(cli).and_then(|cfg| {
        let output = cfg.output_path.clone();
        let (text, deferred) = commands::run(&cfg)?;
        match output {
            Some(path) => std::fs::write(&path, &text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(deferred)
    });
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        // A report was produced but carries an error verdict.
        Ok(Some(e)) => emit_error(&e),
        Err(e) => emit_error(&e),
    }
}
