//! Command-line front end for the token-protocol simulator.
//!
//! One binary, four subcommands: `run` reports exact, sampled, and
//! analytic acceptance for a single configuration; `sweep` scans one
//! noise knob over a grid and writes the report table plus a plot-ready
//! two-column file; `forge` runs the configured adversary; `selftest`
//! executes the invariant suite.
//!
//! Exit codes: 0 success, 1 failed selftest checks, 2 configuration or
//! output errors (clap uses 2 for bad flags as well), 3 when every
//! Monte Carlo trial exhausted its photon repetition budget.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtoken::adversary::{ForgeryReport, run_forgery_experiment};
use qtoken::config::{OutputFormat, RunConfiguration};
use qtoken::harness::{SecurityReport, SweepParameter, report_point, sweep, sweep_csv};
use qtoken::qcore::BellLabeling;
use qtoken::selftest::{all_passed, run_selftest};
use qtoken::{Error, Result};

#[derive(Parser)]
#[command(name = "qtoken", version, about = "Quantum-token protocol simulator")]
struct Cli {
    /// Configuration file (TOML); built-in defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Monte Carlo trials, overriding [run] trials.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    /// Master seed, overriding [run] seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output file, overriding [output] path.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format, overriding [output] format.
    #[arg(long, global = true, value_name = "FMT", value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker threads, overriding [run] threads; 0 lets the pool decide.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-point experiment: exact, sampled, and analytic acceptance.
    Run,
    /// Scan one noise knob over the configured grid.
    Sweep,
    /// Forgery experiment with the configured adversary strategy.
    Forge,
    /// Deterministic invariant suite; fails loudly on any broken check.
    Selftest {
        /// Miswire the Bell analyzer announcements. Negative control:
        /// the teleportation check must fail.
        #[arg(long, hide = true)]
        corrupt_bell_labeling: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::AllTrialsExhausted => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => RunConfiguration::load(path)?,
        None => RunConfiguration::default(),
    };
    if let Some(trials) = cli.trials {
        config.run.trials = trials;
    }
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.run.threads = threads;
    }
    if let Some(out) = &cli.out {
        config.output.path = Some(out.clone());
    }
    if let Some(format) = &cli.format {
        config.output.format = match format.as_str() {
            "json" => OutputFormat::Json,
            _ => OutputFormat::Csv,
        };
    }
    config.validate()?;

    if config.run.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.run.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Run => cmd_run(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Forge => cmd_forge(&config),
        Command::Selftest { corrupt_bell_labeling } => Ok(cmd_selftest(corrupt_bell_labeling)),
    }
}

fn cmd_run(config: &RunConfiguration) -> Result<ExitCode> {
    let report = report_point(
        &config.protocol_config(),
        config.run.trials,
        config.run.seed,
        config.run.n_rounds,
    )?;
    let rendered = match config.output.format {
        OutputFormat::Csv => format!("{}\n{}\n", SecurityReport::csv_header(), report.csv_row()),
        OutputFormat::Json => to_json(&report)?,
    };
    deliver(&rendered, config.output.path.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config: &RunConfiguration) -> Result<ExitCode> {
    let spec = config.sweep_spec()?;
    let rows = sweep(&spec, &config.protocol_config())?;

    let path = config.output.path.clone().unwrap_or_else(|| {
        PathBuf::from(match config.output.format {
            OutputFormat::Csv => "sweep.csv",
            OutputFormat::Json => "sweep.json",
        })
    });
    let table = match config.output.format {
        OutputFormat::Csv => sweep_csv(&rows),
        OutputFormat::Json => to_json(&rows)?,
    };
    std::fs::write(&path, table)?;

    // Plot companion: x is the swept value, except storage-time sweeps,
    // which plot in units of the memory lifetime.
    let x_scale = match spec.parameter {
        SweepParameter::StorageTime => config.noise.t_m,
        _ => 1.0,
    };
    let mut plot = String::new();
    for row in &rows {
        let x = row.parameter_value.unwrap_or_default() / x_scale;
        plot.push_str(&format!("{:.8e} {:.8e}\n", x, row.mc.estimate));
    }
    let plot_path = path.with_extension("xy");
    std::fs::write(&plot_path, plot)?;

    println!(
        "swept {} over {} points, {} trials each: {} and {}",
        spec.parameter.name(),
        rows.len(),
        spec.trials,
        path.display(),
        plot_path.display(),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_forge(config: &RunConfiguration) -> Result<ExitCode> {
    let report = run_forgery_experiment(
        config.forge.strategy,
        &config.protocol_config(),
        config.run.n_rounds,
        config.run.trials,
        config.run.seed,
    )?;
    if let Some(warning) = &report.ci_warning {
        eprintln!("warning: {warning}");
    }
    let rendered = match config.output.format {
        OutputFormat::Csv => forge_csv(&report),
        OutputFormat::Json => to_json(&report)?,
    };
    deliver(&rendered, config.output.path.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(corrupt: bool) -> ExitCode {
    let labeling = if corrupt { BellLabeling::corrupted() } else { BellLabeling::standard() };
    let results = run_selftest(labeling);
    for r in &results {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        println!("{verdict}  {} ({})", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if all_passed(&results) {
        println!("{} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", results.len());
        ExitCode::from(1)
    }
}

/// One-row CSV rendering of a forgery report.
fn forge_csv(report: &ForgeryReport) -> String {
    let strategy = serde_json::to_value(report.strategy)
        .expect("strategy serializes")
        .as_str()
        .expect("strategy is a string")
        .to_owned();
    format!(
        "strategy,n_rounds,n_trials,round_acceptance,round_ci_lo,round_ci_hi,\
         full_acceptance,full_ci_lo,full_ci_hi,guessing_bound,fidelity_bound\n\
         {},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
        strategy,
        report.n_rounds,
        report.n_trials,
        report.round_acceptance,
        report.round_ci.0,
        report.round_ci.1,
        report.full_acceptance,
        report.full_ci.0,
        report.full_ci.1,
        report.guessing_bound,
        report.fidelity_bound,
    )
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn deliver(rendered: &str, path: Option<&std::path::Path>) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}
