//! Command-line experiment driver.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use grasp_harness::config::{ExperimentConfig, OutputFormat};
use grasp_harness::report::{to_json_string, write_json};
use grasp_harness::runner::{compare, run_config, sweep, tune, write_reports};
use grasp_harness::{acceptance, HarnessError};

#[derive(Parser)]
#[command(
    name = "grasp",
    about = "Grid-search stochastic optimization experiments"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm once per seed and emit reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured oracle budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Report file (defaults to the config's `run.output`, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run a budget sweep and fit the convergence slope.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated budgets (defaults to the config's `[sweep]`).
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Exhaustively tune the baseline on its fine grid with the full budget.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured algorithm and the tuned baseline; report the
    /// relative difference.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite (one pass/fail line per criterion).
    Verify {
        /// Only criteria whose name contains this substring (or whose
        /// number equals it).
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs.is_some() {
        eprintln!("warning: built without the `parallel` feature; --jobs ignored");
    }

    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit(
    out: Option<PathBuf>,
    cfg_out: Option<&str>,
    write: impl Fn(Box<dyn Write>) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    let path = out.or_else(|| cfg_out.map(PathBuf::from));
    match path {
        Some(p) => {
            write(Box::new(std::io::BufWriter::new(std::fs::File::create(
                &p,
            )?)))?;
            eprintln!("wrote {}", p.display());
            Ok(())
        }
        None => write(Box::new(std::io::stdout().lock())),
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, HarnessError> {
    match cmd {
        Command::Run {
            config,
            seed,
            budget,
            out,
            format,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.run.seeds = vec![s];
            }
            if let Some(b) = budget {
                cfg.algorithm.budget = b;
            }
            let reports = run_config(&cfg)?;
            for r in &reports {
                eprintln!(
                    "seed {}: {} selected {} calls {} grad-norm {:.3e} gap {}",
                    r.seed,
                    r.algorithm,
                    r.selected,
                    r.calls_total,
                    r.true_grad_norm,
                    r.true_gap
                        .map(|g| format!("{g:.3e}"))
                        .unwrap_or_else(|| "n/a".into()),
                );
            }
            let format = format.map(OutputFormat::from).unwrap_or(cfg.run.format);
            emit(out, cfg.run.output.as_deref(), |w| {
                write_reports(w, &reports, format)
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            budgets,
            out,
            format,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let budgets = budgets
                .or_else(|| cfg.sweep.as_ref().map(|s| s.budgets.clone()))
                .ok_or_else(|| {
                    HarnessError::Config("no budgets given (flag --budgets or [sweep])".into())
                })?;
            let outcome = sweep(&cfg, &budgets)?;
            for (b, m) in &outcome.medians {
                eprintln!("budget {b}: median metric {m:.6e}");
            }
            println!("slope {:.6}", outcome.slope);
            let format = format.map(OutputFormat::from).unwrap_or(cfg.run.format);
            emit(out, cfg.run.output.as_deref(), |w| {
                write_reports(w, &outcome.reports, format)
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Tune { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcome = tune(&cfg)?;
            println!(
                "tuned param {:.6e} metric {:.6e} ({})",
                outcome.tuned_param, outcome.tuned_metric, outcome.metric_kind
            );
            #[derive(serde::Serialize)]
            struct TuneRecord<'a> {
                metric_kind: &'a str,
                tuned_param: f64,
                tuned_metric: f64,
                fine_grid: &'a [f64],
            }
            let record = TuneRecord {
                metric_kind: outcome.metric_kind,
                tuned_param: outcome.tuned_param,
                tuned_metric: outcome.tuned_metric,
                fine_grid: &outcome.fine_grid,
            };
            emit(out, None, |mut w| {
                w.write_all(to_json_string(&record).as_bytes())?;
                Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcome = compare(&cfg)?;
            println!(
                "rho {:.4} ({}; grasp {:.6e} vs tuned {:.6e} at param {:.6e})",
                outcome.comparison.rho,
                outcome.comparison.metric_kind,
                outcome.comparison.grasp_metric,
                outcome.comparison.tuned_metric,
                outcome.comparison.tuned_param
            );
            emit(out, None, |w| {
                write_json(w, &outcome.comparison)?;
                Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { filter } => {
            let outcomes = acceptance::run_all(filter.as_deref());
            if outcomes.is_empty() {
                eprintln!("no criteria matched the filter");
                return Ok(ExitCode::FAILURE);
            }
            let mut all_ok = true;
            for o in &outcomes {
                println!("{}", o.line());
                all_ok &= o.passed;
            }
            println!(
                "{} of {} criteria passed",
                outcomes.iter().filter(|o| o.passed).count(),
                outcomes.len()
            );
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
