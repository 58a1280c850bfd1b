use clap::Parser;

use hdrmerge::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("hdrmerge: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}
