use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use etsim_core::adversary::{GuessModel, Observer};
use etsim_core::harness::{self, Scenario, SEED_ENV};
use etsim_core::MoneyAmount;

const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "etsim", version, about = "Deterministic e-Transfer protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print or save its report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a scenario and compare its report byte for byte with a fixture.
    Check {
        scenario: PathBuf,
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a scenario under consecutive seeds and attack each world.
    Attack {
        scenario: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        observer_level: u8,
        #[arg(long, default_value_t = 0)]
        min_amount: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Account the attacker controls; defaults to the scenario's `hijack`.
        #[arg(long)]
        hijack: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        exposed: f64,
        #[arg(long, default_value_t = 0.5)]
        weak: f64,
        #[arg(long, default_value_t = 0.0)]
        strong: f64,
    },
    /// Run a scenario and print the requirement report.
    Requirements {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Parse(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    harness::parse_scenario(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Parse(format!("{SEED_ENV}={v} is not a 64-bit unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn seed_for(explicit: Option<u64>, scenario: &Scenario) -> Result<u64, Failure> {
    Ok(harness::resolve_seed(explicit, scenario, env_seed()?))
}

fn execute(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Run { scenario, seed, report } => {
            let s = load(&scenario)?;
            let outcome = harness::run(&s, seed_for(seed, &s)?);
            let text = outcome.report.render();
            match report {
                Some(path) => std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            if !outcome.report.conservation_ok {
                eprintln!("conservation audit failed");
                return Ok(EXIT_INVARIANT);
            }
            Ok(0)
        }
        Command::Check { scenario, fixture, seed } => {
            let s = load(&scenario)?;
            let outcome = harness::run(&s, seed_for(seed, &s)?);
            if !outcome.report.conservation_ok {
                eprintln!("conservation audit failed");
                return Ok(EXIT_INVARIANT);
            }
            let diff = harness::diff_fixture(&outcome.report, &fixture)
                .with_context(|| format!("reading {}", fixture.display()))?;
            match diff {
                Ok(()) => {
                    println!("pass\t{}", fixture.display());
                    Ok(0)
                }
                Err(d) => {
                    println!("fail\t{}\t{d}", fixture.display());
                    Ok(EXIT_FAIL)
                }
            }
        }
        Command::Attack {
            scenario,
            observer_level,
            min_amount,
            trials,
            hijack,
            seed,
            exposed,
            weak,
            strong,
        } => {
            let s = load(&scenario)?;
            let hijacked = hijack
                .or_else(|| s.hijack.clone())
                .ok_or_else(|| Failure::Parse("no --hijack given and the scenario has no hijack directive".into()))?;
            let model = GuessModel::new(exposed, weak, strong).map_err(|e| Failure::Parse(e.to_string()))?;
            let observer = Observer::level(observer_level).map_err(|e| Failure::Parse(e.to_string()))?;
            let summary = harness::attack_trials(
                &s,
                seed_for(seed, &s)?,
                trials,
                &observer,
                &hijacked,
                &model,
                MoneyAmount::from_cents(min_amount),
            )
            .map_err(anyhow::Error::from)?;
            print!("{}", summary.render());
            Ok(0)
        }
        Command::Requirements { scenario, seed } => {
            let s = load(&scenario)?;
            let outcome = harness::run(&s, seed_for(seed, &s)?);
            print!("{}", outcome.report.requirements.render());
            if !outcome.report.conservation_ok {
                eprintln!("conservation audit failed");
                return Ok(EXIT_INVARIANT);
            }
            Ok(if outcome.report.requirements.all_pass() { 0 } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARSE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
