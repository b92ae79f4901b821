use std::path::PathBuf;
use std::process::ExitCode;

use burgulence_harness::plan::ExperimentKind;
use burgulence_harness::runner::{resolve_workers, WORKERS_ENV};
use burgulence_harness::{load_plan, run_experiment, ExperimentPlan, HarnessError};
use clap::Parser;

/// Runs burgulence experiments and writes their tables and manifest.
///
/// Exit status: 0 when every criterion passes, 1 when one fails or a member
/// is lost, 2 on configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "burgulence", version)]
struct Cli {
    #[arg(value_enum)]
    kind: ExperimentKind,
    /// TOML plan; without one, `nu` (and anything else) comes from --override.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output directory (must be empty); defaults to the plan's `output` or `runs/<kind>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, help = format!("Worker threads [env: {WORKERS_ENV}]"))]
    workers: Option<usize>,
    /// `key=value`, dotted keys for nested tables; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(passed) => ExitCode::from(if passed { 0 } else { 1 }),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, HarnessError> {
    let mut overrides = vec![format!("kind=\"{}\"", cli.kind.name())];
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend(cli.overrides.iter().cloned());
    let plan = match &cli.plan {
        Some(path) => load_plan(path, &overrides)?,
        None => ExperimentPlan::parse("", &overrides)?,
    };
    let out =
        cli.out.clone().or_else(|| plan.output.clone()).unwrap_or_else(|| PathBuf::from("runs").join(plan.kind.name()));
    let workers = resolve_workers(cli.workers)?;
    let manifest = run_experiment(&plan, &out, workers)?;
    for c in &manifest.criteria {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if manifest.degraded {
        let lost = manifest.members.iter().filter(|m| !m.ok).count();
        println!("DEGRADED: {lost} of {} members failed", manifest.members.len());
    }
    println!("wrote {} files to {}", manifest.files.len(), out.display());
    Ok(manifest.passed)
}
