use clap::Parser;
use vbshift_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(&cli) {
        eprintln!("vbshift: {err}");
        std::process::exit(err.exit_code());
    }
}
