use clap::Parser;

use gauntlet_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(gauntlet_cli::exit_code_for(&err));
        }
    }
}
