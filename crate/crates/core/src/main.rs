use clap::Parser;

fn main() {
    std::process::exit(gapr::cli::run(gapr::cli::Cli::parse()));
}
