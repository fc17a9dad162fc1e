use clap::Parser;

use randswitch_cli::commands::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
