use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbvm::harness::{
    default_n_list, grid_text, parse_key_values, quick_space, report_json, run, run_csv,
    run_grid, run_table, spec_from_pairs, table_csv, table_json, write_text, RunReport, RunSpec,
};
use hbvm::Error;

/// Benchmark driver for energy-conserving spectral time integration of
/// Hamiltonian PDEs (sine-Gordon, nonlinear Schroedinger, KdV).
#[derive(Parser)]
#[command(name = "hbvm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and report solution/conservation errors.
    Run(RunArgs),
    /// Run a series of step counts and emit a convergence table with rates.
    Table(TableArgs),
    /// Integrate and dump the space-time solution grid as a text matrix.
    Grid(GridArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Benchmark problem: sine-gordon, nlse or kdv.
    #[arg(long)]
    problem: Option<String>,
    /// Method family: gauss, hbvm or spectral.
    #[arg(long)]
    method: Option<String>,
    /// Stage count (for spectral: the initial stage count).
    #[arg(long)]
    s: Option<usize>,
    /// Quadrature size for the hbvm family.
    #[arg(long)]
    k: Option<usize>,
    /// Number of positive space frequencies (default: problem setting).
    #[arg(long = "N")]
    n_modes: Option<usize>,
    /// Number of space grid subintervals (default: problem setting).
    #[arg(long)]
    m: Option<usize>,
    /// Spectral stage-decay tolerance; for fixed methods, the nonlinear
    /// solve tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Stage iteration: linear-newton (default) or fixed-point.
    #[arg(long)]
    solver: Option<String>,
    /// Smoke profile: N=64 space resolution and short default step lists.
    #[arg(long)]
    quick: bool,
    /// Key=value config file; command-line flags override its entries.
    #[arg(long)]
    config: Option<String>,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<String>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of time steps.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated step counts (default: a built-in per-problem series).
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of time steps.
    #[arg(long)]
    n: Option<usize>,
    /// Keep every stride-th snapshot (first and last always).
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Table(args) => cmd_table(args),
        Command::Grid(args) => cmd_grid(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Merge config-file pairs with flag overrides (flags win).
fn build_pairs(common: &CommonArgs) -> hbvm::Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        pairs.extend(parse_key_values(&text)?);
    }
    let family = common.method.clone().or_else(|| {
        pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "method")
            .map(|(_, v)| v.clone())
    });
    if let Some(v) = &common.problem {
        pairs.push(("problem".into(), v.clone()));
    }
    if let Some(v) = &common.method {
        pairs.push(("method".into(), v.clone()));
    }
    let spectral = family.as_deref() == Some("spectral");
    if let Some(v) = common.s {
        let key = if spectral { "s-init" } else { "s" };
        pairs.push((key.into(), v.to_string()));
    }
    if let Some(v) = common.k {
        pairs.push(("k".into(), v.to_string()));
    }
    if let Some(v) = common.n_modes {
        pairs.push(("modes".into(), v.to_string()));
    }
    if let Some(v) = common.m {
        pairs.push(("m".into(), v.to_string()));
    }
    if let Some(v) = common.tol {
        let key = if spectral { "stage-tol" } else { "newton-tol" };
        pairs.push((key.into(), v.to_string()));
    }
    if let Some(v) = &common.solver {
        pairs.push(("solver".into(), v.clone()));
    }
    Ok(pairs)
}

fn apply_quick(spec: &mut RunSpec, common: &CommonArgs) {
    if common.quick && common.n_modes.is_none() && common.m.is_none() {
        let (n_modes, m) = quick_space(spec.problem);
        spec.n_modes = n_modes;
        spec.m = m;
    }
}

fn resolve_single_spec(common: &CommonArgs, n: Option<usize>) -> hbvm::Result<RunSpec> {
    let mut pairs = build_pairs(common)?;
    if let Some(n) = n {
        pairs.push(("n".into(), n.to_string()));
    }
    let mut spec = spec_from_pairs(&pairs)?;
    apply_quick(&mut spec, common);
    Ok(spec)
}

fn emit(text: &str, out: Option<&str>) -> hbvm::Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summary(report: &RunReport) {
    let status = match report.failed_step {
        Some(step) => format!("  FAILED at step {step}"),
        None => String::new(),
    };
    eprintln!(
        "{} {} n={} (k={}, s={}): e_u={:.3e} e_H={:.3e} iters={:.1} wall={:.2}s{}",
        report.spec.problem,
        report.spec.method.label(),
        report.spec.n_steps,
        report.k,
        report.s,
        report.errors.e_u,
        report.errors.e_h,
        report.iterations_avg,
        report.wall_seconds,
        status
    );
}

fn format_err(format: &str) -> Error {
    Error::InvalidSpec(format!("unknown format '{format}' (expected csv or json)"))
}

fn cmd_run(args: RunArgs) -> hbvm::Result<ExitCode> {
    let spec = resolve_single_spec(&args.common, args.n)?;
    let report = run(&spec)?;
    let text = match args.common.format.as_str() {
        "csv" => run_csv(&report),
        "json" => report_json(&report),
        other => return Err(format_err(other)),
    };
    emit(&text, args.common.out.as_deref())?;
    summary(&report);
    Ok(if report.completed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_table(args: TableArgs) -> hbvm::Result<ExitCode> {
    let mut pairs = build_pairs(&args.common)?;
    let flag_list: Option<Vec<usize>> = match &args.n {
        Some(text) => {
            let mut list = Vec::new();
            for tok in text.split(',') {
                list.push(tok.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidSpec(format!("invalid step count '{}'", tok.trim()))
                })?);
            }
            Some(list)
        }
        None => None,
    };
    let placeholder = flag_list.is_some() || !pairs.iter().any(|(k, _)| k == "n");
    if placeholder {
        // Per-row counts are filled in below.
        pairs.push(("n".into(), "1".into()));
    }
    let mut base = spec_from_pairs(&pairs)?;
    apply_quick(&mut base, &args.common);
    let n_list = flag_list.unwrap_or_else(|| {
        if placeholder {
            let mut list = default_n_list(base.problem, &base.method);
            if args.common.quick {
                list.truncate(3);
            }
            list
        } else {
            vec![base.n_steps]
        }
    });
    let specs: Vec<RunSpec> = n_list
        .iter()
        .map(|&n| {
            let mut s = base;
            s.n_steps = n;
            s
        })
        .collect();
    let table = run_table(&specs)?;
    let text = match args.common.format.as_str() {
        "csv" => table_csv(&table),
        "json" => table_json(&table),
        other => return Err(format_err(other)),
    };
    emit(&text, args.common.out.as_deref())?;
    for row in &table.rows {
        summary(&row.report);
    }
    Ok(if table.rows.iter().all(|r| r.report.completed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn cmd_grid(args: GridArgs) -> hbvm::Result<ExitCode> {
    let spec = resolve_single_spec(&args.common, args.n)?;
    let (report, dump) = run_grid(&spec, args.stride)?;
    emit(&grid_text(&dump), args.common.out.as_deref())?;
    summary(&report);
    Ok(if report.completed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
