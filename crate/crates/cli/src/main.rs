use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use hyperkernel_cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((table, status)) => {
            let text = table.render(cli.common.format);
            let written = match &cli.common.out {
                Some(path) => std::fs::write(path, text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("hyperkernel: cannot write output: {e}");
                return ExitCode::from(Status::Usage as u8);
            }
            if status != Status::Converged {
                eprintln!("hyperkernel: some rows did not converge or were rejected; see the status column");
            }
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("hyperkernel: {e}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
