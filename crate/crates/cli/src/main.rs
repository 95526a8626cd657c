use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rulebench_cli::analyze::{analyze, write_analysis};
use rulebench_cli::eval::run_manifest;
use rulebench_cli::manifest::Manifest;
use rulebench_cli::report::{write_report, ReportOptions};
use rulebench_cli::single::{factors_csv, load_config, run_backtest, schema, CommandError, StrategyArg};
use rulebench_core::aggregate::GroupKey;

/// Deterministic evaluation of rule-based trading strategies.
#[derive(Parser)]
#[command(name = "rulebench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor columns for a data file.
    Factors {
        #[command(subcommand)]
        command: FactorsCommand,
    },
    /// Backtest one strategy on one data file.
    Backtest {
        #[command(subcommand)]
        command: BacktestCommand,
    },
    /// Run every job of a manifest into the record store.
    Eval(EvalArgs),
    /// Agreement statistics over repeated runs.
    Stability {
        #[command(subcommand)]
        command: StabilityCommand,
    },
    /// Aggregate tables over a record store.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum FactorsCommand {
    Compute {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated factor names, e.g. rsi_14,macd,bb_upper_20.
        #[arg(long, value_delimiter = ',', required = true)]
        names: Vec<String>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        schema: String,
    },
}

#[derive(Subcommand)]
enum BacktestCommand {
    Run(BacktestArgs),
}

#[derive(Args)]
struct BacktestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "default")]
    schema: String,
    /// Rule file.
    #[arg(long, conflicts_with = "adapter", required_unless_present = "adapter")]
    strategy: Option<PathBuf>,
    /// Command line of a strategy process, run through `sh -c`.
    #[arg(long)]
    adapter: Option<String>,
    /// Factor columns sent to the adapter process.
    #[arg(long, value_delimiter = ',', requires = "adapter")]
    factors: Vec<String>,
    /// JSON engine config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lookback: Option<usize>,
    /// Directory for equity.csv, actions.csv and result.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overrides the manifest's data directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StabilityCommand {
    Analyze {
        /// Directory of actions.csv files or run records.
        #[arg(long)]
        runs: PathBuf,
        /// Second bundle (e.g. another temperature) for modal agreement.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        flip_horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "model", value_parser = parse_key)]
    group_by: Vec<GroupKey>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    decimals: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_key(s: &str) -> Result<GroupKey, String> {
    GroupKey::parse(s).ok_or_else(|| format!("unknown group key '{s}'"))
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Factors {
            command:
                FactorsCommand::Compute {
                    input,
                    names,
                    output,
                    schema: s,
                },
        } => {
            let text = match schema(&s).and_then(|s| factors_csv(&input, &s, &names)) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            match output {
                Some(p) => {
                    if let Err(e) = std::fs::write(&p, text) {
                        return fail(format!("{}: {e}", p.display()));
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Command::Backtest {
            command: BacktestCommand::Run(a),
        } => {
            let mut config = match load_config(a.config.as_deref()) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(l) = a.lookback {
                config.lookback = l;
            }
            let strategy = match (&a.strategy, &a.adapter) {
                (Some(p), _) => StrategyArg::Rules(p),
                (None, Some(cmd)) => StrategyArg::Adapter {
                    command: cmd,
                    factors: a.factors.clone(),
                },
                (None, None) => unreachable!("clap requires one"),
            };
            let result = match schema(&a.schema).and_then(|s| run_backtest(&a.data, &s, strategy, &config)) {
                Ok(r) => r,
                Err(e @ CommandError::Dsl(_)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
                Err(e) => return fail(e),
            };
            if let Err(e) = result.write_outputs(&a.out) {
                return fail(e);
            }
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let summary = serde_json::json!({
                "status": result.status,
                "diagnostic": result.diagnostic,
                "n_trades": result.n_trades,
                "metrics": result.metrics,
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            if result.status.is_success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Eval(a) => {
            let manifest = match Manifest::load(&a.manifest, a.data_dir.as_deref()) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            match run_manifest(&manifest, a.workers) {
                Ok(s) => {
                    let counts: Vec<String> = s.by_status.iter().map(|(k, n)| format!("{k}={n}")).collect();
                    eprintln!(
                        "{} records: {} written, {} kept; {}",
                        s.total,
                        s.written,
                        s.skipped,
                        counts.join(" ")
                    );
                    ExitCode::from(s.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Stability {
            command:
                StabilityCommand::Analyze {
                    runs,
                    compare,
                    flip_horizon,
                    out,
                },
        } => match analyze(&runs, compare.as_deref(), flip_horizon).and_then(|a| write_analysis(&a, &out)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Report(a) => {
            let opts = ReportOptions {
                group_by: a.group_by,
                k: a.k,
                decimals: a.decimals,
            };
            match write_report(&a.records, &a.out, &opts) {
                Ok(r) => {
                    eprintln!("{} records, {} valid", r.records, r.valid);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
