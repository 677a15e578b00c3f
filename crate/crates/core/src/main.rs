use clap::Parser;

fn main() {
    std::process::exit(fairproc::cli::run(fairproc::cli::Cli::parse()));
}
