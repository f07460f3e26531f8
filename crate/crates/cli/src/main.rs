mod cli;
mod commands;
mod error;

use clap::error::ErrorKind;
use clap::Parser;
use cli::Cli;
use commands::{EXIT_ERROR, EXIT_OK};
use error::CliError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(EXIT_OK);
        }
        Err(e) => {
            let detail = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::new("E_USAGE", detail).line());
            std::process::exit(EXIT_ERROR);
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    let code = match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.line());
            EXIT_ERROR
        }
    };
    std::process::exit(code);
}
