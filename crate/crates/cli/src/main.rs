use clap::Parser;
use forcebound_cli::{run_with_threads, threads_from_env, Cli};

fn main() {
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| run_with_threads(&cli, threads));
    if let Err(e) = result {
        eprintln!("forcebound: {e}");
        std::process::exit(e.exit_code());
    }
}
