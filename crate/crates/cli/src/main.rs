mod bench;
mod cli;
mod commands;
mod error;
mod plot;

use clap::Parser;

use cli::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, &cli.command),
        Command::Align(a) => commands::run_align(a, &cli.command),
        Command::Baseline(a) => commands::baseline(a, &cli.command),
        Command::Classify(a) => commands::classify(a, &cli.command),
        Command::Eval(a) => commands::eval(a, &cli.command),
        Command::Bench(a) => bench::bench(a, &cli.command),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
