use clap::Parser;

use distcomp::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
