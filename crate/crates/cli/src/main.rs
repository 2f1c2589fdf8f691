//! `monopole`: spectra and verification reports for the flat and Taub-NUT
//! MIC-oscillator monopole models.
//!
//! Exit status: 0 all checks pass, 1 a check failed, 2 usage or config
//! error, 3 a numerical refinement did not converge.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monopole_algebra::taubnut_model::Convention;
use thiserror::Error;

use commands::VerifyWhat;
use config::{Model, RunConfig};
use report::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] monopole_algebra::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use monopole_algebra::Error as E;
        match self {
            CliError::Core(E::Convergence(_)) => 3,
            CliError::Core(E::Calibration(_)) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "monopole",
    version,
    about = "Spectra and algebra checks for monopole oscillator models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy table over the configured box
    Spectrum(RunArgs),
    /// Run one verification suite
    Verify {
        #[arg(value_enum)]
        what: VerifyWhat,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Combine reports
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Merge report files into a pass/fail summary
    Merge {
        paths: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: Option<Model>,
    /// JSON run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    tol_algebra: Option<f64>,
    #[arg(long)]
    tol_recurrence: Option<f64>,
    #[arg(long)]
    tol_oracle: Option<f64>,
    #[arg(long)]
    tol_branch: Option<f64>,
    #[arg(long)]
    grid_nodes: Option<usize>,
    /// Tower size for the unirrep search
    #[arg(long)]
    p: Option<u32>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Printed operator forms or the corrected ones
    #[arg(long)]
    convention: Option<Convention>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.model {
            cfg.model = m;
        }
        let t = &mut cfg.tolerances;
        for (slot, v) in [
            (&mut t.algebra, self.tol_algebra),
            (&mut t.recurrence, self.tol_recurrence),
            (&mut t.oracle, self.tol_oracle),
            (&mut t.branch, self.tol_branch),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(k) = self.grid_nodes {
            cfg.grid.nodes = k;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(c) = self.convention {
            cfg.convention = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(report: &Report, output: &OutputArgs) -> Result<(), CliError> {
    let mut buf = Vec::new();
    match output.format {
        Format::Json => buf.extend_from_slice(report.to_json().as_bytes()),
        Format::Csv => report.write_csv(&mut buf)?,
    }
    match &output.out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn run_with_config<F>(command: &str, args: &RunArgs, body: F) -> Result<Report, CliError>
where
    F: FnOnce(&RunConfig) -> Result<Vec<report::Record>, CliError> + Send,
{
    let cfg = args.resolve()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = args.jobs {
        if k == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build()?;
    let records = pool.install(|| body(&cfg))?;
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    Ok(Report::new(command, echo, records))
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let start = Instant::now();
    let (mut report, output) = match &cli.command {
        Command::Spectrum(args) => (
            run_with_config("spectrum", args, commands::spectrum)?,
            &args.output,
        ),
        Command::Verify { what, args } => {
            let name = format!("verify {}", what.name());
            (
                run_with_config(&name, args, |cfg| commands::verify(cfg, *what))?,
                &args.output,
            )
        }
        Command::Report {
            action: ReportAction::Merge { paths, output },
        } => (report::merge(paths)?, output),
    };
    report.timing = Some(report::Timing {
        wall_seconds: start.elapsed().as_secs_f64(),
    });
    emit(&report, output)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            let s = &report.summary;
            eprintln!(
                "{}: {}/{} passed, worst residual {}",
                report.command,
                s.counts.passed,
                s.counts.total,
                s.worst_residual
                    .map(|w| format!("{w:.3e}"))
                    .unwrap_or_else(|| "-".into())
            );
            for f in s.failures.iter().take(10) {
                eprintln!("  failed: {f}");
            }
            if s.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
