mod args;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    if let Some(path) = config::config_path(&argv) {
        config::apply_config_file(&path)?;
    }
    Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => e.exit(),
        _ => CliError::Usage(e.render().to_string()),
    })
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

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Fit(a) => commands::run_fit(cli, a),
        Command::Predict(a) => commands::run_predict(a),
        Command::Ale(a) => commands::run_ale(a),
        Command::Vi(a) => commands::run_vi(a),
        Command::Diagnose(a) => commands::run_diagnose(a),
        Command::Simulate(a) => commands::run_simulate(cli, a),
    }
}

fn main() -> ExitCode {
    let result = parse(std::env::args_os().collect()).and_then(|cli| {
        init_logging(cli.verbose);
        dispatch(&cli)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let code = e.exit_code();
            match &e {
                CliError::Usage(msg) => eprintln!("{}", msg.trim_end()),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
