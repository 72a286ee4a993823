use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use speccl::config::{self, BUILTIN_SCENARIOS};
use speccl::report;
use speccl::sim::run_scenario;
use speccl::Error;

const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "speccl",
    version,
    about = "Composite-learning adaptive control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its CSV log and plots.
    Run {
        /// Built-in scenario name or config file path.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Override a config key, e.g. `--set k4=6`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value = "on")]
        plots: Toggle,
    },
    /// Run the built-in scenarios and evaluate every acceptance criterion.
    Reproduce {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        plots: Toggle,
    },
    /// List built-in scenarios.
    List,
    /// Validate a config file and print the resolved settings.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(scenario: &str, out: &Path, overrides: &[String], plots: bool) -> Result<(), Error> {
    let mut cfg = config::load_scenario(scenario)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::ConfigDomain {
            key: o.clone(),
            message: "override must be KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let log = match run_scenario(&cfg) {
        Ok(log) => log,
        Err(Error::Diverged { t, norm, partial }) => {
            report::write_outputs(&partial, out, plots)?;
            return Err(Error::Diverged { t, norm, partial });
        }
        Err(e) => return Err(e),
    };
    let files = report::write_outputs(&log, out, plots)?;
    let last = log.last();
    println!(
        "{}: t = {}, |x| = {:.3e}, theta_hat = {:?}, rank {}",
        cfg.name,
        last.t,
        last.x.norm(),
        last.theta_hat.as_slice(),
        last.rank
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            overrides,
            plots,
        } => match run(&scenario, &out, &overrides, matches!(plots, Toggle::On)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Command::Reproduce { out, plots } => {
            match report::reproduce_all(&out, matches!(plots, Toggle::On)) {
                Ok(summary) => {
                    println!("{summary}");
                    if summary.all_passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_ACCEPTANCE)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::List => {
            for (name, description) in BUILTIN_SCENARIOS {
                println!("{name:<16} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Check { config } => {
            let loaded = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io {
                    path: config.clone(),
                    source: e,
                })
                .and_then(|text| config::parse_config(&text));
            match loaded {
                Ok(cfg) => {
                    print!("{}", cfg.to_document());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    let code = if matches!(e, Error::Io { .. }) {
                        2
                    } else {
                        e.exit_code() as u8
                    };
                    eprintln!("error: {e}");
                    ExitCode::from(code)
                }
            }
        }
    }
}
