use clap::Parser;

mod cli;

fn main() {
    let args = cli::Cli::parse();
    if let Err(f) = cli::run(args) {
        eprintln!("multisplit: {}: {}", f.stage, f.error);
        std::process::exit(f.exit_code());
    }
}
