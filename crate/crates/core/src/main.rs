use clap::Parser;
use fuelmix::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
