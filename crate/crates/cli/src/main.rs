use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qho_cli::output::to_json;
use qho_cli::sweep::SweepSpec;
use qho_cli::{analyze, simulate, sweep, validate, CliError, CliResult, Overrides, RunConfig};

/// Periodic finite-precision position measurements of a quantum harmonic
/// oscillator: closed forms, simulation, sweeps and cross-checks.
#[derive(Debug, Parser)]
#[command(name = "qho", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the closed-form summary for the configuration as JSON.
    Analyze,
    /// Simulate a measurement record and write plot-ready tables.
    Simulate,
    /// Tabulate the non-dimensional limiting width over (varsigma_M, tau_M).
    Sweep,
    /// Run the cross-check battery; exits 2 if any check fails.
    Validate,
}

fn run(cli: &Cli) -> CliResult<()> {
    let raw = cli.overrides.merge()?;
    let cfg = RunConfig::resolve(&raw)?;
    match cli.command {
        Command::Analyze => {
            let summary = analyze::run(&cfg, cli.overrides.out.is_some() || raw.out.is_some())?;
            print!("{}", to_json(&summary));
        }
        Command::Simulate => {
            let s = simulate::run(&cfg)?;
            println!(
                "n = {}, sample std = {}, sigma_inf = {}, relative error = {}",
                s.n,
                fmt_opt(s.sample_std),
                fmt_opt(s.sigma_inf_predicted),
                fmt_opt(s.relative_error)
            );
            println!("wrote {} files to {}", s.files.len(), cfg.out.display());
        }
        Command::Sweep => {
            let spec = SweepSpec::resolve(&raw, &cfg)?;
            let s = sweep::run(&cfg, &spec)?;
            println!(
                "{} cells ({} flagged) written to {}",
                s.cells,
                s.flagged,
                cfg.out.join("sweep.csv").display()
            );
        }
        Command::Validate => {
            let report = validate::run(&cfg)?;
            for c in &report.checks {
                println!(
                    "{} {:<28} measured {:<12} tolerance {:e}  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into()),
                    c.tolerance,
                    c.detail
                );
            }
            if !report.passed {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                return Err(CliError::Validation(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into())
}

fn main() -> ExitCode {
    // Clap's own usage errors would exit 2, which is reserved for failed
    // validation here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(qho_cli::EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qho: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
