use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use age_invariance::cli::{self, Config, Outcome};

#[derive(Parser)]
#[command(version, about = "Invariance-preserving knot scheme for an age-structured population model")]
struct Args {
    /// TOML experiment file; the built-in reference experiment when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV and JSON output.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build knots and sample the approximate solution.
    Simulate,
    /// Halve epsilon repeatedly and tabulate successive sup-differences.
    Convergence {
        /// Number of epsilon levels; overrides `run.levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Birth-kernel condition, step bound and discrete invariant statistics.
    InvarianceReport,
    /// Compare the scheme with the Picard and characteristics solvers.
    OracleCompare,
    /// Sub-tangency defect against the step size.
    Subtangency,
    /// Convolution property harness.
    ConvTests,
    /// Print the built-in reference config.
    DefaultConfig,
}

fn load(args: &Args) -> anyhow::Result<Config> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => Config::default_experiment(),
    };
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn run(args: &Args) -> anyhow::Result<Option<Outcome>> {
    if let Command::DefaultConfig = args.command {
        print!("{}", cli::config::DEFAULT_CONFIG);
        return Ok(None);
    }
    let cfg = load(args)?;
    let out = &args.out;
    let outcome = match &args.command {
        Command::Simulate => cli::simulate(&cfg, out),
        Command::Convergence { levels } => cli::convergence(&cfg, *levels, out),
        Command::InvarianceReport => cli::invariance_report(&cfg, out),
        Command::OracleCompare => cli::oracle_compare(&cfg, out),
        Command::Subtangency => cli::subtangency(&cfg, out),
        Command::ConvTests => cli::conv_tests(&cfg, out),
        Command::DefaultConfig => unreachable!("handled above"),
    }?;
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(outcome)) => {
            if !args.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
                for file in &outcome.files {
                    println!("wrote {}", file.display());
                }
            }
            match outcome.violation {
                Some(v) => {
                    eprintln!("invariant violation: {v}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
