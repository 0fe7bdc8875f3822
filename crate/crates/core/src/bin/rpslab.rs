use clap::Parser;

fn main() {
    std::process::exit(rpslab::cli::run(rpslab::cli::Cli::parse()));
}
