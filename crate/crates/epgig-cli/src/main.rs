//! Command-line front end: dataset generation and ingestion, fitting,
//! penalty-curve emission, the validation suite, and the replicated
//! experiment runners.
//!
//! Exit codes: 0 ok, 1 usage error, 2 data error, 3 validation failure.
//! `EPGIG_THREADS` caps worker threads (default: machine cores); all
//! randomness flows from `--seed` through named streams, so outputs are
//! reproducible regardless of scheduling.

use clap::{Args, Parser, Subcommand};
use epgig::data::{Dataset, GroupPartition};
use epgig::distributions::PriorSpec;
use epgig::em::{
    cross_validate, cross_validate_logistic, default_cv_grid, fit_grouped, fit_linear,
    fit_logistic, method_by_name, EmConfig, FitResult,
};
use epgig::experiments::{
    independent_table_methods, oracle_study, rows_to_csv, run_table, OracleRules, SimDesign,
    TableConfig,
};
use epgig::seed::stream_rng;
use epgig::validate::{run_validation, ValidationLevel};
use epgig::weights::{penalty_value, reweight_omega};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

/// Marker for misuse of the interface (as opposed to bad data contents).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "epgig",
    version,
    about = "Sparse regression with exponential-power / generalized-inverse-Gaussian \
             scale-mixture priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset (features..., response in last column)
    Fit(FitArgs),
    /// Emit (b, penalty, omega) triples for a prior as CSV
    PenaltyCurve(PenaltyCurveArgs),
    /// Run the numerical invariant suites
    Validate(ValidateArgs),
    /// Reproduce the replicated simulation studies
    Experiment(ExperimentArgs),
    /// Generate a synthetic dataset as CSV
    Generate(GenerateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (header row; response in the last column)
    #[arg(long)]
    data: PathBuf,
    /// Roster method name ("1".."7", "adlasso", "jeffreys", "lasso", "ridge")
    #[arg(long, conflicts_with = "prior")]
    method: Option<String>,
    /// Fixed prior, e.g. "alpha=1,beta=1,gamma=0.5,q=1" or
    /// "tau=1,lambda=2,q=1" or "jeffreys,q=1"
    #[arg(long)]
    prior: Option<String>,
    /// Select the method hyperparameter by cross-validation
    #[arg(long, conflicts_with = "hyper")]
    cv: bool,
    /// Fixed hyperparameter value for --method
    #[arg(long)]
    hyper: Option<f64>,
    /// Group specification like "1-4,5-8" (grouped hierarchy)
    #[arg(long)]
    groups: Option<String>,
    /// Treat the response as binary labels and fit penalized logistic
    /// regression
    #[arg(long)]
    logistic: bool,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Master seed (drives cross-validation fold assignment)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PenaltyCurveArgs {
    /// Prior, e.g. "alpha=1,beta=1,gamma=0.5,q=1"
    #[arg(long)]
    prior: String,
    #[arg(long, default_value_t = -5.0)]
    b_min: f64,
    #[arg(long, default_value_t = 5.0)]
    b_max: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// "fast" (identities, seconds) or "full" (adds quadrature oracles,
    /// limits, sampler moments)
    #[arg(long, default_value = "fast")]
    level: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// "table3", "table5", or "oracle"
    name: String,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sample sizes for the oracle study
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    n: Vec<usize>,
    /// Output directory for CSV/JSON results
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// "fanli" (independent, p=8) or "grouped" (p=32, 8 groups of 4)
    #[arg(long, default_value = "fanli")]
    design: String,
    #[arg(long, default_value_t = 120)]
    n: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is usage
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(EXIT_USAGE) };
        }
    };
    configure_threads();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::PenaltyCurve(args) => cmd_penalty_curve(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            };
            ExitCode::from(code)
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("EPGIG_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
}

/// Parses "k=v,k=v" prior specifications.
fn parse_prior(spec: &str) -> anyhow::Result<PriorSpec> {
    let mut kv = std::collections::BTreeMap::new();
    let mut jeffreys = false;
    for part in spec.split(',') {
        let part = part.trim();
        if part.eq_ignore_ascii_case("jeffreys") {
            jeffreys = true;
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("bad prior component '{part}' in '{spec}'"))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("bad numeric value in prior component '{part}'"))?;
        kv.insert(k.trim().to_ascii_lowercase(), v);
    }
    let q = *kv.get("q").ok_or_else(|| anyhow::anyhow!("prior needs q=..."))?;
    if jeffreys {
        return Ok(PriorSpec::jeffreys(q)?);
    }
    if let (Some(&tau), Some(&lambda)) = (kv.get("tau"), kv.get("lambda")) {
        return Ok(PriorSpec::generalized_t(tau, lambda, q)?);
    }
    let alpha = *kv.get("alpha").ok_or_else(|| anyhow::anyhow!("prior needs alpha=..."))?;
    let gamma = *kv.get("gamma").ok_or_else(|| anyhow::anyhow!("prior needs gamma=..."))?;
    match kv.get("beta") {
        Some(&beta) if beta > 0.0 => Ok(PriorSpec::generic(alpha, beta, gamma, q)?),
        _ => Ok(PriorSpec::gamma_mixing(alpha, gamma, q)?),
    }
}

#[derive(Serialize)]
struct FitReport {
    version: String,
    config: serde_json::Value,
    b_hat: Vec<f64>,
    sigma_hat: f64,
    support: Vec<usize>,
    iterations: usize,
    converged: bool,
    intercept: Option<f64>,
    objective_trace_len: usize,
    final_objective: Option<f64>,
}

fn report(fit: &FitResult, config: serde_json::Value) -> FitReport {
    FitReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        b_hat: fit.b_hat.to_vec(),
        sigma_hat: fit.sigma_hat,
        // 1-based indices in the report, matching the CSV column names
        support: fit.support.iter().map(|j| j + 1).collect(),
        iterations: fit.iterations,
        converged: fit.converged,
        intercept: fit.centering.as_ref().map(|c| c.intercept(&fit.b_hat)),
        objective_trace_len: fit.objective_trace.len(),
        final_objective: fit.objective_trace.last().copied(),
    }
}

fn cmd_fit(args: FitArgs) -> anyhow::Result<ExitCode> {
    // a dataset with no feature columns is interface misuse, not bad data
    if let Ok(contents) = std::fs::read_to_string(&args.data) {
        let header_fields = contents.lines().next().map(|h| h.split(',').count()).unwrap_or(0);
        if header_fields < 2 {
            return Err(usage_error(format!(
                "{} has no feature columns (need features plus a response)",
                args.data.display()
            )));
        }
    }
    let mut data = Dataset::read_csv(&args.data)?;
    if let Some(spec) = &args.groups {
        let groups = GroupPartition::parse(spec, data.p())?;
        data = data.with_groups(groups)?;
    }
    if args.logistic {
        if let Some(bad) = data.y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            anyhow::bail!("--logistic requires 0/1 responses, found {bad}");
        }
        if data.groups.is_some() {
            return Err(usage_error("--groups is not supported with --logistic"));
        }
    }

    let grid = default_cv_grid();
    let fit;
    let config;
    if let Some(prior_spec) = &args.prior {
        let prior = parse_prior(prior_spec)?;
        let cfg = EmConfig::new(prior);
        fit = if args.logistic {
            fit_logistic(&data.x, &data.y, &cfg)?
        } else if let Some(groups) = &data.groups {
            fit_grouped(&data, groups, &cfg)?
        } else {
            fit_linear(&data, &cfg)?
        };
        config = serde_json::json!({
            "data": args.data,
            "prior": prior_spec,
            "logistic": args.logistic,
            "groups": args.groups,
            "seed": args.seed,
        });
    } else {
        let name = args
            .method
            .as_deref()
            .ok_or_else(|| usage_error("either --method or --prior is required"))?;
        let method = method_by_name(name)?;
        if let Some(groups) = data.groups.clone() {
            // grouped hierarchy: the GIG-mixing methods carry over by
            // preserving their posterior order, gamma_l = gamma + (p_l-1)/q
            let epgig::em::MethodKind::EpGigBetaCv { gamma, q, alpha } = method.kind else {
                return Err(usage_error(format!(
                    "--groups with --method supports the GIG-mixing methods \
                     (1, 2, 3, 5, 6); {name} has no grouped form here"
                )));
            };
            let p_l = groups.group(0).len() as f64;
            if groups.iter().any(|g| g.len() != p_l as usize) {
                return Err(usage_error(
                    "--groups with --method needs equal-sized groups (one shared gamma_l)",
                ));
            }
            let gamma_l = gamma + (p_l - 1.0) / q;
            let grouped = |train: &Dataset, hyper: f64| {
                let prior = PriorSpec::generic(alpha, hyper, gamma_l, q)?;
                fit_grouped(train, &groups, &EmConfig::new(prior))
            };
            let hyper = match (args.hyper, args.cv) {
                (Some(h), _) => h,
                (None, true) => epgig::em::cross_validate_with(
                    &data, &grid, args.folds, args.seed, false, &grouped,
                )?,
                (None, false) => {
                    return Err(usage_error(format!(
                        "--method {name} needs --hyper <value> or --cv"
                    )))
                }
            };
            fit = grouped(&data, hyper)?;
            let out = serde_json::to_string_pretty(&report(
                &fit,
                serde_json::json!({
                    "data": args.data,
                    "method": method.name,
                    "gamma_l": gamma_l,
                    "hyperparameter": hyper,
                    "cv": args.cv,
                    "cv_folds": args.folds,
                    "groups": args.groups,
                    "seed": args.seed,
                }),
            ))?;
            match &args.out {
                Some(path) => std::fs::write(path, out + "\n")?,
                None => println!("{out}"),
            }
            return Ok(ExitCode::SUCCESS);
        }
        let hyper = match (args.hyper, args.cv, method.needs_cv()) {
            (Some(h), _, _) => h,
            (None, _, false) => f64::NAN, // no hyperparameter (Jeffreys)
            (None, true, true) => {
                if args.logistic {
                    cross_validate_logistic(&data.x, &data.y, &method, &grid, args.folds, args.seed)?
                } else {
                    cross_validate(&data, &method, &grid, args.folds, args.seed)?
                }
            }
            (None, false, true) => {
                return Err(usage_error(format!("--method {name} needs --hyper <value> or --cv")))
            }
        };
        fit = if args.logistic {
            method.fit_logistic_at(&data.x, &data.y, hyper)?
        } else {
            method.fit_linear_at(&data, hyper)?
        };
        config = serde_json::json!({
            "data": args.data,
            "method": method.name,
            "hyperparameter": hyper,
            "cv": args.cv,
            "cv_folds": args.folds,
            "logistic": args.logistic,
            "groups": args.groups,
            "seed": args.seed,
        });
    }

    let out = serde_json::to_string_pretty(&report(&fit, config))?;
    match &args.out {
        Some(path) => std::fs::write(path, out + "\n")?,
        None => println!("{out}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_penalty_curve(args: PenaltyCurveArgs) -> anyhow::Result<ExitCode> {
    let prior = parse_prior(&args.prior)?;
    if args.points == 0 || !(args.b_max >= args.b_min) {
        anyhow::bail!("need points >= 1 and b_max >= b_min");
    }
    let mut lines = vec!["b,penalty,omega".to_string()];
    let singular_at_zero = epgig::distributions::epgig_log_density(0.0, &prior).is_singular();
    for i in 0..args.points {
        let b = if args.points == 1 {
            args.b_min
        } else {
            args.b_min + (args.b_max - args.b_min) * i as f64 / (args.points - 1) as f64
        };
        if b == 0.0 && singular_at_zero {
            lines.push("# b=0 skipped: density singular at the origin".to_string());
            continue;
        }
        let pen = penalty_value(b, &prior);
        let omega = match prior {
            PriorSpec::Generic { .. } if b != 0.0 => {
                reweight_omega(b, &prior).map(|v| v.to_string()).unwrap_or_default()
            }
            _ => String::new(),
        };
        lines.push(format!("{b},{},{omega}", pen.value));
    }
    let body = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let level = match args.level.as_str() {
        "fast" => ValidationLevel::Fast,
        "full" => ValidationLevel::Full,
        other => return Err(usage_error(format!("unknown validation level '{other}' (fast|full)"))),
    };
    let results = run_validation(level);
    let mut all_passed = true;
    for r in &results {
        println!(
            "{:5} {:48} max_error={:<12.3e} tolerance={:.3e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.max_error,
            r.tolerance
        );
        all_passed &= r.passed;
    }
    if all_passed {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("validation FAILED");
        Ok(ExitCode::from(EXIT_VALIDATION))
    }
}

fn cmd_experiment(args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    std::fs::create_dir_all(&args.out)?;
    match args.name.as_str() {
        "table3" => {
            let replicates = args.replicates.unwrap_or(1000);
            let designs = vec![
                SimDesign::independent(60, 3.0),
                SimDesign::independent(120, 3.0),
                SimDesign::independent(120, 1.0),
            ];
            let methods = independent_table_methods();
            eprintln!(
                "table3: {} designs x {} methods x {replicates} replicates",
                designs.len(),
                methods.len()
            );
            let cfg = TableConfig::new(replicates, args.seed);
            let rows = run_table(&designs, &methods, &cfg)?;
            write_results(&args.out, "table3", &rows)?;
        }
        "table5" => {
            let replicates = args.replicates.unwrap_or(200);
            let designs = vec![
                SimDesign::grouped(60, 3.0),
                SimDesign::grouped(120, 3.0),
                SimDesign::grouped(120, 1.0),
            ];
            let methods = independent_table_methods();
            eprintln!(
                "table5: {} designs x {} methods x {replicates} replicates",
                designs.len(),
                methods.len()
            );
            let cfg = TableConfig::new(replicates, args.seed);
            let rows = run_table(&designs, &methods, &cfg)?;
            write_results(&args.out, "table5", &rows)?;
        }
        "oracle" => {
            let replicates = args.replicates.unwrap_or(300);
            eprintln!("oracle study: n grid {:?} x {replicates} replicates", args.n);
            let rows = oracle_study(&args.n, &OracleRules::default(), replicates, args.seed)?;
            write_results(&args.out, "oracle", &rows)?;
        }
        other => return Err(usage_error(format!("unknown experiment '{other}' (table3|table5|oracle)"))),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_results<T: Serialize>(dir: &std::path::Path, name: &str, rows: &[T]) -> anyhow::Result<()> {
    let csv_path = dir.join(format!("{name}.csv"));
    std::fs::write(&csv_path, rows_to_csv(rows)?)?;
    let json_path = dir.join(format!("{name}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(rows)? + "\n")?;
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let design = match args.design.as_str() {
        "fanli" => SimDesign::independent(args.n, args.delta),
        "grouped" => SimDesign::grouped(args.n, args.delta),
        other => return Err(usage_error(format!("unknown design '{other}' (fanli|grouped)"))),
    };
    let mut rng = stream_rng(args.seed, "generate-cli", 0);
    let rep = epgig::experiments::generate_design(&design, &mut rng);
    let ds = Dataset::new(rep.x, rep.y)?;
    ds.write_csv(&args.out)?;
    eprintln!(
        "wrote {} ({} rows, {} features; true support {:?})",
        args.out.display(),
        design.n,
        design.p(),
        (0..design.p()).filter(|&j| design.b_true[j] != 0.0).map(|j| j + 1).collect::<Vec<_>>()
    );
    Ok(ExitCode::SUCCESS)
}
