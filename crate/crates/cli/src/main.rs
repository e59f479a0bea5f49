use clap::Parser;
use quadstab_cli::app::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
