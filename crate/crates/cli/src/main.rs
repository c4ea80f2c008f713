use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinrep_cli::config::PipelineConfig;
use kinrep_cli::error::{CliError, CliResult};
use kinrep_cli::pipeline::{run_pipeline, Stage};
use kinrep_cli::suite::{run_suite, CRITERIA};

#[derive(Parser)]
#[command(
    name = "kinrep",
    version,
    about = "Kinetic and Lagrangian diagnostics for scalar conservation laws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; required by every subcommand except `verify`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run a single refinement level instead of the configured list.
    #[arg(long, global = true)]
    level: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve and write the solution.
    Solve,
    /// Solve, then extract the kinetic measure.
    Kinetic,
    /// ... then build the Lagrangian ensembles.
    Represent,
    /// ... then compare Eulerian and Lagrangian entropy dissipation.
    Dissipate,
    /// Solve, extract, and run the structure diagnostics.
    Structure,
    /// Run the acceptance battery and print the pass/fail matrix.
    Verify,
    /// Every stage, every artifact.
    Export,
}

fn load(cli: &Cli, required: bool) -> CliResult<Option<PipelineConfig>> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None if required => return Err(CliError::Config("--config is required".into())),
        None => return Ok(None),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.level {
        cfg.levels = vec![n];
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn run(cli: &Cli) -> CliResult<bool> {
    let stage = match cli.command {
        Command::Verify => {
            let cfg = load(cli, false)?;
            let ids: Vec<usize> = cfg
                .as_ref()
                .and_then(|c| c.verify.criteria.clone())
                .unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
            let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            let results = run_suite(&ids, seed);
            for r in &results {
                println!("{}", r.line());
            }
            let passed = results.iter().filter(|r| r.pass).count();
            println!("{passed}/{} criteria passed", results.len());
            return Ok(passed == results.len());
        }
        Command::Solve => Stage::Solve,
        Command::Kinetic => Stage::Kinetic,
        Command::Represent => Stage::Represent,
        Command::Dissipate => Stage::Dissipate,
        Command::Structure => Stage::Structure,
        Command::Export => Stage::Export,
    };
    let cfg = load(cli, true)?.expect("required config");
    let bundle = run_pipeline(&cfg, stage)?;
    bundle.write(&cfg.out)?;
    let s = &bundle.summary;
    let failed: Vec<_> = s.checks.iter().filter(|c| c.hard && !c.holds).collect();
    for c in &failed {
        eprintln!(
            "check failed: [{}] {}: {} > {}",
            c.stage, c.name, c.lhs, c.rhs
        );
    }
    println!(
        "{}: {} checks, {} hard failures; wrote {}",
        stage.name(),
        s.checks.len(),
        failed.len(),
        cfg.out.display()
    );
    Ok(s.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
