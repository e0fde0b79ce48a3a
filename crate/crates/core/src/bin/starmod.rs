use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use starmod::runner::{self, Scenario};
use starmod::StarError;

#[derive(Parser)]
#[command(name = "starmod", version, about = "Finite-dimensional *-bimodules over C*-algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print or write its report.
    Run {
        scenario: PathBuf,
        /// Override the scenario tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include per-task wall-clock times (makes reports non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the built-in scenario matrix.
    Selftest,
    /// Print a worked example.
    Demo {
        #[arg(value_parser = runner::DEMOS)]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, tol, seed, out, timing } => {
            let mut s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(t) = tol {
                if !(t > 0.0) {
                    eprintln!("error: {}", StarError::ConfigParse("tol must be positive".into()));
                    return ExitCode::from(2);
                }
                s.tol = t;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let report = runner::run_scenario(&s);
            match out {
                Some(path) => {
                    if let Err(e) = runner::emit_report(&report, &path, timing) {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => print!("{}", report.to_canonical(timing)),
            }
            for t in report.tasks.iter().filter(|t| !t.pass) {
                eprintln!("FAIL {}{}", t.name, t.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Command::Selftest => {
            let mut ok = true;
            for (name, pass, failing) in runner::selftest() {
                if pass {
                    println!("PASS {name}");
                } else {
                    println!("FAIL {name}: {}", failing.join(", "));
                    ok = false;
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Demo { name } => match runner::demo(&name) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
