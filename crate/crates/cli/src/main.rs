//! `feedsim` command line.
//!
//! Exit codes: 0 success, 1 scenario errors, 2 usage errors, 3 I/O or
//! runtime failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use feedsim::dsl::{self, fmt_number, Diagnostic, ScenarioDef};
use feedsim::sim::{self, MemoryMode, SimConfig, SimError};

#[derive(Parser)]
#[command(name = "feedsim", version, about = "Simulate a robot that must recharge to survive")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and print its diagnostics
    Validate { path: PathBuf },
    /// Run one episode
    Run {
        path: PathBuf,
        #[command(flatten)]
        episode: EpisodeArgs,
        /// Write the JSON-lines trace here
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a batch of episodes and summarize survival
    Mc {
        path: PathBuf,
        #[command(flatten)]
        episode: EpisodeArgs,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        episodes: u64,
        /// Write per-episode statistics as CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EpisodeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tick budget per episode
    #[arg(long, default_value_t = SimConfig::DEFAULT_STEPS, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    #[arg(long, value_enum, default_value_t = Memory::Volatile)]
    memory: Memory,
    /// Weights file; required with nonvolatile memory
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Memory {
    Volatile,
    Nonvolatile,
}

enum Failure {
    Invalid(Vec<Diagnostic>),
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        match self {
            Failure::Invalid(diags) => {
                for d in diags {
                    eprintln!("{d}");
                }
                ExitCode::from(1)
            }
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Failure::Runtime(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(3)
            }
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn read_scenario_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<ScenarioDef, Failure> {
    dsl::parse_scenario(&read_scenario_text(path)?).map_err(Failure::Invalid)
}

fn config(path: &Path, args: EpisodeArgs) -> Result<SimConfig, Failure> {
    let memory_mode = match args.memory {
        Memory::Volatile => MemoryMode::Volatile,
        Memory::Nonvolatile => MemoryMode::Nonvolatile,
    };
    match (memory_mode, &args.weights) {
        (MemoryMode::Nonvolatile, None) => {
            return Err(Failure::Usage("--memory nonvolatile requires --weights".into()))
        }
        (MemoryMode::Volatile, Some(_)) => {
            return Err(Failure::Usage("--weights requires --memory nonvolatile".into()))
        }
        _ => {}
    }
    let scenario = load_scenario(path)?;
    Ok(SimConfig {
        scenario,
        seed: args.seed,
        memory_mode,
        max_steps: args.steps,
        weights_path: args.weights,
    })
}

fn validate(path: &Path) -> Result<(), Failure> {
    match dsl::parse_scenario(&read_scenario_text(path)?) {
        Ok(s) => {
            for d in dsl::validate_scenario(&s) {
                eprintln!("{d}");
            }
            Ok(())
        }
        Err(diags) => Err(Failure::Invalid(diags)),
    }
}

fn run(path: &Path, args: EpisodeArgs, trace: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = config(path, args)?;
    let (result, events) = sim::run_episode(&cfg)?;
    if let Some(p) = trace {
        sim::write_trace(&events, &p)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }
    println!("outcome={} lifetime={}", result.outcome.as_str(), result.lifetime);
    Ok(())
}

fn monte_carlo(path: &Path, args: EpisodeArgs, episodes: u64, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = config(path, args)?;
    let stats = sim::run_monte_carlo(&cfg, episodes)?;
    if let Some(p) = out {
        sim::write_stats(&stats, &p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }
    println!(
        "survival={} mean_lifetime={} entropy={}",
        fmt_number(stats.survival_fraction),
        fmt_number(stats.mean_lifetime),
        fmt_number(stats.behavioral_entropy)
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Run { path, episode, trace } => run(&path, episode, trace),
        Command::Mc {
            path,
            episode,
            episodes,
            out,
        } => monte_carlo(&path, episode, episodes, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
