use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cqo_cli::{execute, Cli};

fn read_input(p: Option<&PathBuf>) -> std::io::Result<String> {
    match p {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p),
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = execute(&cli, &mut read_input);
    if !out.stderr.is_empty() {
        eprintln!("error: {}", out.stderr);
    }
    if !out.stdout.is_empty() {
        let written = match &cli.out {
            Some(p) => std::fs::write(p, &out.stdout),
            None => std::io::stdout().write_all(out.stdout.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("error: cannot write output: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(out.code as u8)
}
