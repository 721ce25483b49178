mod args;
mod bench;
mod commands;
mod config;
mod error;
mod files;
mod output;
mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use args::{Cli, Command};
use error::{CliError, EXIT_VALIDATION};

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}

fn command() -> clap::Command {
    let mut cmd = Cli::command().args_override_self(true);
    for name in Command::NAMES {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

fn clap_exit(e: clap::Error) -> i32 {
    use clap::error::ErrorKind;
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => EXIT_VALIDATION,
    }
}

/// The `--config` value, found without a full parse (required options may
/// live in the file).
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn parse(argv: Vec<OsString>) -> Result<ArgMatches, i32> {
    let argv = match config_path(&argv) {
        None => argv,
        Some(path) => {
            let expanded = config::read_config(&path).and_then(|cfg| {
                match config::subcommand_index(&argv, &Command::NAMES) {
                    Some(i) => config::inject(&argv, i, &cfg),
                    None => Ok(argv.clone()),
                }
            });
            match expanded {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Err(e.exit_code());
                }
            }
        }
    };
    command().try_get_matches_from(argv).map_err(clap_exit)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Invalid("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("cannot set up {n} threads: {e}")))
}

fn run(argv: Vec<OsString>) -> i32 {
    let matches = match parse(argv) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return clap_exit(e),
    };
    init_logging(cli.verbose);
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");

    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Dfm(a) => commands::dfm(a),
        Command::Bandwidth(a) => commands::bandwidth(a),
        Command::Sample(a) => commands::sample(a),
        Command::Density(a) => commands::density(a),
        Command::Similar(a) => commands::similar(a),
        Command::Rank(a) => commands::rank(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => bench::bench(a),
        Command::Pipeline(a) => pipeline::pipeline(a),
    };
    let (mut out, finish) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cmd = command();
    let arg_ids: Vec<String> = cmd
        .find_subcommand(name)
        .map(|s| s.get_arguments().map(|a| a.get_id().to_string()).collect())
        .unwrap_or_default();
    let manifest = config::render_manifest(name, &arg_ids, sub_matches, &finish.notes);
    if let Err(e) = out.write_str(files::MANIFEST, &manifest) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    log::info!("wrote {}", out.dir().display());
    out.commit();
    match finish.deferred_error {
        Some(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        None => 0,
    }
}
