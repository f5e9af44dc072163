use clap::error::ErrorKind;
use clap::Parser;

use oob_anomaly::cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{err}");
                std::process::exit(0);
            }
            _ => {
                eprint!("{err}");
                std::process::exit(1);
            }
        },
    };
    if let Err(err) = run(&cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
