use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use llbar::config::Config;
use llbar::harness::{convergence_study, epsilon_study, run_simulation, write_series_csv, Quantity};
use llbar::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "llbar", version, about = "Mixed finite-element solver for the LLBar and LLBloch equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation.
    Run(Common),
    /// Nested-mesh convergence study over `convergence_levels`.
    Converge(Common),
    /// Regularisation study over `epsilon_list`.
    Epsilon(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::NotNested { .. } => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Step { source, .. } => exit_code(source),
        _ => EXIT_SOLVER,
    }
}

fn load(common: &Common) -> Result<Config, Error> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?,
        None => String::new(),
    };
    Ok(Config::parse_with_overrides(&text, &common.overrides)?)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let out = run_simulation(&cfg)?;
            if !common.quiet {
                let last = out.records.last().expect("initial record");
                println!("scheme        {}", cfg.scheme.name());
                println!("steps         {}", last.step);
                println!("final time    {:.6}", last.time);
                println!("energy        {:.12e} -> {:.12e}", out.records[0].energy, last.energy);
                println!("max residual  {:.3e}", out.worst_relative_residual());
                println!("max newton    {}", out.max_newton_iters());
            }
        }
        Command::Converge(common) => {
            let cfg = load(&common)?;
            let report = convergence_study(&cfg)?;
            if let Some(path) = &cfg.csv_path {
                write_series_csv(&report, path)?;
            }
            if !common.quiet {
                println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12}", "n", "u L2", "u H1", "u Linf", "H L2", "H H1");
                for e in &report.errors {
                    println!(
                        "{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                        e.divisions, e.u_l2, e.u_h1, e.u_linf, e.h_l2, e.h_h1
                    );
                }
                for (name, q) in [("u L2", Quantity::UL2), ("u H1", Quantity::UH1), ("H L2", Quantity::HL2), ("H H1", Quantity::HH1)] {
                    let rates: Vec<String> = report.rates(q).into_iter().map(fmt_rate).collect();
                    println!("rates {name:<5} {}", rates.join(" "));
                }
            }
        }
        Command::Epsilon(common) => {
            let cfg = load(&common)?;
            let report = epsilon_study(&cfg)?;
            if let Some(path) = &cfg.csv_path {
                write_series_csv(&report, path)?;
            }
            if !common.quiet {
                println!("{:>10} {:>14} {:>14}", "epsilon", "u H1", "H L2(L2)");
                for r in &report.records {
                    println!("{:>10.1e} {:>14.6e} {:>14.6e}", r.epsilon, r.u_h1, r.h_l2_time);
                }
                println!("slope u H1   {}", fmt_rate(report.slope_u_h1));
                println!("slope H      {}", fmt_rate(report.slope_h));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
