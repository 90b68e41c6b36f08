use std::io::IsTerminal;
use std::process::ExitCode;

use clap::Parser;
use rentchain_cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let (doc, code) = match run(cli) {
        Ok(v) => (v, ExitCode::SUCCESS),
        Err(e) => (e.envelope(), ExitCode::FAILURE),
    };
    println!("{doc}");
    code
}
