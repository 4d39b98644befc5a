use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use orbiton::cli::{self, Cli, RunConfig};

fn main() -> ExitCode {
    let args = Cli::parse();
    let code = match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: &Cli) -> orbiton::Result<i32> {
    let cfg = RunConfig::from_common(&args.common)?;
    let report = cli::run(&args.command, &cfg)?;
    let body = report.render(args.common.format);
    match &args.common.output {
        Some(path) => std::fs::write(path, body).map_err(|e| orbiton::Error::Io(format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(report.exit_code())
}
