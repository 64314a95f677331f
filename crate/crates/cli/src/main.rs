use std::path::PathBuf;
use std::process::ExitCode;

use apcl::{execute, ExperimentConfig, HarnessError, Kind};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    CheckFlux,
    Decay,
    Contraction,
    Counterexample,
    Convergence,
    Spectrum,
}

impl From<Command> for Kind {
    fn from(c: Command) -> Self {
        match c {
            Command::CheckFlux => Kind::CheckFlux,
            Command::Decay => Kind::Decay,
            Command::Contraction => Kind::Contraction,
            Command::Counterexample => Kind::Counterexample,
            Command::Convergence => Kind::Convergence,
            Command::Spectrum => Kind::Spectrum,
        }
    }
}

/// Experiments on scalar conservation laws with almost periodic data.
#[derive(Debug, Parser)]
#[command(name = "apcl", version)]
struct Cli {
    #[arg(value_enum)]
    kind: Command,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the JSON report, CSV tables and plots.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Worker threads for the solver (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("apcl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("--threads: {e}")))?;
    }
    let cfg = ExperimentConfig::load(&cli.config)?;
    let kind = Kind::from(cli.kind);
    if cfg.kind != kind {
        return Err(HarnessError::Config(format!(
            "kind: config describes a {} experiment, command asked for {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    let report = execute(&cfg, &cli.out, cli.plot)?;
    println!(
        "{}: {} ({:.2} s), outputs in {}",
        report.kind,
        if report.passed { "ok" } else { "failed" },
        report.wall_clock_seconds,
        cli.out.display()
    );
    Ok(())
}
