mod args;
mod run;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run::dispatch(&cli.command) {
        if matches!(e, run::CliError::Closed) {
            return;
        }
        eprintln!("lorenz-lab: {e}");
        std::process::exit(e.exit_code());
    }
}
