//! `rfmarket` — solve and compare incentive schemes for an RF energy-trading
//! market described by a JSON scenario config.
//!
//! Exit codes: 0 success, 2 config error, 3 solver non-convergence,
//! 4 feasibility/monotonicity violation, 1 anything else.

use clap::{ArgAction, Args, Parser, Subcommand};
use rfmarket_core::contract::ContractError;
use rfmarket_core::harness::{
    self, comparison_csv, ic_profile_csv, ExactPolicy, HarnessError, ScenarioConfig, Scheme,
    SweepParam,
};
use rfmarket_core::solver::SolverError;
use rfmarket_core::stackelberg::StackelbergError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Parser)]
#[command(
    name = "rfmarket",
    version,
    about = "Incentive-scheme solver and comparison harness for RF energy-trading markets"
)]
struct Cli {
    /// Print per-scheme runtimes to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Scenario config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config Monte Carlo draw count.
    #[arg(long, value_name = "INT")]
    mc_draws: Option<usize>,
    /// Force exact composition expectations even past the usual size gate.
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "no_exact")]
    exact: bool,
    /// Skip exact expectations; Monte Carlo only.
    #[arg(long, action = ArgAction::SetTrue)]
    no_exact: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scheme and emit its comparison row.
    Solve {
        /// contract | stackelberg-complete | stackelberg-asym | centralized
        scheme: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the schemes at each value of a swept parameter.
    Sweep {
        /// gamma | n
        #[arg(long)]
        param: String,
        /// Comma-separated values for the parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Schemes to run ("all" or a comma-separated list).
        #[arg(long, default_value = "all", value_delimiter = ',')]
        schemes: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Audit properties of a solved scheme.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Compare schemes on one market.
    Compare {
        /// Schemes to run ("all" or a comma-separated list).
        #[arg(long, default_value = "all", value_delimiter = ',')]
        schemes: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Solve the contract and tabulate each probe type's utility across all
    /// items, asserting self-selection.
    Ic {
        /// Comma-separated 1-based probe type indices.
        #[arg(long, value_delimiter = ',', required = true)]
        probes: Vec<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Harness(err) => match err {
                HarnessError::Config(_)
                | HarnessError::Generation(_)
                | HarnessError::Model(_)
                | HarnessError::Enumeration(_) => 2,
                HarnessError::IcPeakMismatch { .. } => 4,
                HarnessError::Contract(c) => match c {
                    ContractError::NonConvergence { .. } | ContractError::Solver(_) => 3,
                    ContractError::MonotonicityViolated { .. }
                    | ContractError::Infeasible { .. } => 4,
                    _ => 2,
                },
                HarnessError::Stackelberg(s) => match s {
                    StackelbergError::Solver(SolverError::InvalidBracket { .. }) => 3,
                    StackelbergError::Solver(_) => 3,
                    _ => 2,
                },
            },
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    if let Err(err) = run(cli.command, verbose) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn load_config(common: &CommonOpts) -> Result<(ScenarioConfig, ExactPolicy), CliError> {
    let mut cfg = ScenarioConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(draws) = common.mc_draws {
        cfg.mc_draws = draws;
        cfg.validate()?;
    }
    let policy = if common.exact {
        ExactPolicy::Always
    } else if common.no_exact {
        ExactPolicy::Never
    } else {
        ExactPolicy::Auto
    };
    Ok((cfg, policy))
}

fn parse_schemes(names: &[String]) -> Result<Vec<Scheme>, CliError> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            for s in Scheme::ALL {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        } else {
            let s: Scheme = name.parse()?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn write_output(common: &CommonOpts, csv: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn report_runtimes(rows: &[harness::ComparisonRow], verbose: bool) {
    if !verbose {
        return;
    }
    for row in rows {
        eprintln!(
            "{} {}={} {:.1} ms [{}]",
            row.scheme, row.param, row.value, row.runtime_ms, row.status
        );
    }
}

fn run(command: Command, verbose: bool) -> Result<(), CliError> {
    match command {
        Command::Solve { scheme, common } => {
            let (cfg, policy) = load_config(&common)?;
            let scheme: Scheme = scheme.parse()?;
            let row = harness::run_single(&cfg, scheme, policy)?;
            let rows = vec![row];
            report_runtimes(&rows, verbose);
            write_output(&common, &comparison_csv(&rows))
        }
        Command::Compare { schemes, common } => {
            let (cfg, policy) = load_config(&common)?;
            let schemes = parse_schemes(&schemes)?;
            let rows = harness::run_comparison(&cfg, &schemes, policy)?;
            report_runtimes(&rows, verbose);
            write_output(&common, &comparison_csv(&rows))
        }
        Command::Sweep {
            param,
            values,
            schemes,
            common,
        } => {
            let (cfg, policy) = load_config(&common)?;
            let param: SweepParam = param.parse()?;
            let schemes = parse_schemes(&schemes)?;
            let rows = harness::sweep(&cfg, param, &values, &schemes, policy)?;
            report_runtimes(&rows, verbose);
            write_output(&common, &comparison_csv(&rows))
        }
        Command::Verify { what } => match what {
            VerifyCommand::Ic { probes, common } => {
                let (cfg, _) = load_config(&common)?;
                let (solution, rows) = harness::emit_ic_profile(&cfg, &probes)?;
                if verbose {
                    eprintln!(
                        "menu of {} items, expected welfare {:.6}",
                        solution.menu.len(),
                        solution.expected_welfare
                    );
                }
                write_output(&common, &ic_profile_csv(&rows))
            }
        },
    }
}
