// SPDX-License-Identifier: Apache-2.0

//! `poco`: parse and instrument GuardLang programs, minimize corpora, run
//! guard-toggling seed selection, fuzz, and report.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::Precondition;
use config::{Config, Overrides};
use report::Format;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "poco",
    version,
    about = "Guard-toggling seed selection for GuardLang targets"
)]
struct Cli {
    /// Print the effective configuration as TOML and exit
    #[arg(long, global = true)]
    show_config: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a program and print its guard table
    Parse { program: PathBuf },
    /// Write the instrumented program, guard table and guard hierarchy
    Instrument {
        program: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Execute a seed file or corpus directory and print per-seed outcomes
    Run {
        program: PathBuf,
        seeds: PathBuf,
        /// Toggle vector JSON (`{"schema_version":1,"disabled":[..]}`)
        #[arg(long)]
        toggles: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Minimize a corpus by edge coverage
    Cmin {
        program: PathBuf,
        corpus: PathBuf,
        #[arg(long)]
        toggles: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Iterative guard-toggling seed selection
    Poco {
        program: PathBuf,
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// One fuzzing campaign from a corpus, optionally restricted to a manifest
    Fuzz {
        program: PathBuf,
        corpus: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fuzz several seed sets over the same rng seeds and compare them
    Eval {
        program: PathBuf,
        corpus: PathBuf,
        /// NAME=MANIFEST, repeatable
        #[arg(long = "set", value_parser = commands::parse_set, required = true)]
        sets: Vec<(String, PathBuf)>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Time-composition report of a selection trace
    Report {
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: &Command, cfg: &Config) -> anyhow::Result<()> {
    use commands::*;
    match cmd {
        Command::Parse { program } => cmd_parse(program, cfg),
        Command::Instrument { program, out } => cmd_instrument(program, out, cfg),
        Command::Run {
            program,
            seeds,
            toggles,
            out,
        } => cmd_run(program, seeds, toggles.as_deref(), out.as_deref(), cfg),
        Command::Cmin {
            program,
            corpus,
            toggles,
            out,
        } => cmd_cmin(program, corpus, toggles.as_deref(), out, cfg),
        Command::Poco { program, corpus, out } => cmd_poco(program, corpus, out, cfg),
        Command::Fuzz {
            program,
            corpus,
            manifest,
            out,
        } => cmd_fuzz(program, corpus, manifest.as_deref(), out, cfg),
        Command::Eval {
            program,
            corpus,
            sets,
            out,
        } => cmd_eval(program, corpus, sets, out.as_deref(), cfg),
        Command::Report { trace, format, out } => cmd_report(trace, *format, out.as_deref(), cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match Config::load(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if cli.show_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = &cli.command else {
        let _ = Cli::command().print_help();
        return ExitCode::from(EXIT_USAGE);
    };
    match dispatch(cmd, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Precondition>().is_some() {
                ExitCode::from(EXIT_PRECONDITION)
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
    }
}
