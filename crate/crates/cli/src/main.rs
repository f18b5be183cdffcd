use clap::Parser;

use bguide_cli::app::{exit_code, resolve, run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match resolve(&cli).and_then(|cfg| run(&cli, &cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bguide: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}
