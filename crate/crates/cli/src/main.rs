mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toml::Table;

use commands::CommandOutput;
use config::{ConfigError, Overrides};
use output::{Flags, RunManifest};

#[derive(Parser)]
#[command(name = "lama", version, about = "Qutrit magnetometry simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Use 10^5 grid points and 10^3 experiments per ensemble.
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Write posterior grids as field values in tesla instead of rad/s.
    #[arg(long, global = true)]
    flux_axis: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// First-step expected gain versus delay.
    GainCurve,
    /// Ensemble gain curves for several protocols.
    Compare,
    /// Posterior and gain landscape along a scripted LAMA run.
    LamaTrace,
    /// Oscillation periods of first-step gain curves.
    Oscillations,
    /// Pulse-parameter optimization of a single step.
    Optimize,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GainCurve => "gain-curve",
            Command::Compare => "compare",
            Command::LamaTrace => "lama-trace",
            Command::Oscillations => "oscillations",
            Command::Optimize => "optimize",
        }
    }
}

enum Failure {
    Config(ConfigError),
    Model(lama_core::Error),
    Io(std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Model(_) | Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Model(e) => write!(f, "model error: {e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

fn load(cli: &Cli) -> Result<Table, ConfigError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    config::parse_document(&text)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let doc = load(cli).map_err(Failure::Config)?;
    let o = Overrides { seed: cli.seed, paper_scale: cli.paper_scale };
    let c = |e| Failure::Config(e);
    let m = |e| Failure::Model(e);
    let out: CommandOutput = match cli.command {
        Command::GainCurve => commands::gain_curve(&config::GainCurveConfig::parse(&doc, o).map_err(c)?).map_err(m)?,
        Command::Compare => commands::compare(&config::CompareConfig::parse(&doc, o).map_err(c)?).map_err(m)?,
        Command::LamaTrace => {
            commands::lama_trace(&config::LamaTraceConfig::parse(&doc, o).map_err(c)?, cli.flux_axis).map_err(m)?
        }
        Command::Oscillations => {
            commands::oscillations(&config::OscillationsConfig::parse(&doc, o).map_err(c)?).map_err(m)?
        }
        Command::Optimize => commands::optimize(&config::OptimizeConfig::parse(&doc, o).map_err(c)?).map_err(m)?,
    };

    let stem = cli.command.name().replace('-', "_");
    let mut files = out.files;
    let manifest_name = format!("{stem}.json");
    let mut outputs = files.names();
    outputs.push(manifest_name.clone());
    let manifest = RunManifest {
        command: cli.command.name(),
        artifact_version: env!("CARGO_PKG_VERSION"),
        seed: out.seed,
        flags: Flags { paper_scale: cli.paper_scale, flux_axis: cli.flux_axis },
        outputs,
        config_toml: toml::to_string(&out.config).expect("config tables always serialize"),
        results: out.results,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest always serializes") + "\n";
    files.add(manifest_name, json);
    files.commit(&cli.out).map_err(Failure::Io)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lama {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
