mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "cffq", version, about = "Compton form factor extraction from DVCS cross sections")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write pseudodata, truth CFFs and true cross sections.
    Generate,
    /// Fit replica ensembles per bin and model class.
    FitLocal,
    /// Error metrics and curve proximity against truth.
    Evaluate,
    /// Per-bin qualifier scores and model recommendations.
    Qualify,
    /// Bootstrap global fit over the local extractions.
    FitGlobal,
    /// Summarise existing outputs as markdown.
    Report,
    /// Print the default configuration.
    ConfigInit {
        /// Write to this file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Command::ConfigInit { output } = &cli.command {
        let text = toml::to_string(&RunConfig::default()).expect("default config serialises");
        return match output {
            Some(p) => match std::fs::write(p, text) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {}: {e}", p.display());
                    ExitCode::from(EXIT_DATA)
                }
            },
            None => {
                print!("{text}");
                ExitCode::SUCCESS
            }
        };
    }
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: invalid configuration: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply_env();
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let result = match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::FitLocal => commands::fit_local(&cfg).map(|_| ()),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Qualify => commands::qualify(&cfg).map(|_| ()),
        Command::FitGlobal => commands::fit_global(&cfg).map(|_| ()),
        Command::Report => commands::report(&cfg).map(|_| ()),
        Command::ConfigInit { .. } => unreachable!(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, cffq::Error::Config(_)) {
                ExitCode::from(EXIT_USAGE)
            } else if e.is_data_error() {
                ExitCode::from(EXIT_DATA)
            } else {
                ExitCode::from(EXIT_NUMERIC)
            }
        }
    }
}
