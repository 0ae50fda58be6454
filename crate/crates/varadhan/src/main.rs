//! Thin binary wrapper: parse the command line, run the pipeline, map
//! errors to exit codes (2 config/usage, 3 numerical, 4 hypothesis).

use clap::Parser;
use varadhan::cli;

fn main() {
    let parsed = cli::Cli::parse();
    if let Err(e) = cli::run(&parsed) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
