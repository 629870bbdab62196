//! Command-line front end: job files in, reports out.

pub mod commands;
pub mod spec;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cqo::fixtures::{ExampleName, IndexSpan};

use commands::{Format, Outcome, EXIT_INPUT};
use spec::WindowSpec;

#[derive(Debug, Parser)]
#[command(
    name = "cqo",
    version,
    about = "Check, classify and decompose C-relations and C-quasi-orders on windowed groups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Eval radius, overriding the job file.
    #[arg(long, global = true)]
    pub radius: Option<u64>,
    /// Term radius, overriding the job file (defaults to twice the eval radius when only --radius is given).
    #[arg(long, global = true)]
    pub term_radius: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the axioms matching the job: C-relation and compatibility, C-quasi-order, or valuation.
    Check { file: Option<PathBuf> },
    /// Element types, welding points, components and elementary kind.
    Classify { file: Option<PathBuf> },
    /// Type-valuation, elementary quotients and welds.
    Decompose { file: Option<PathBuf> },
    /// Rebuild a quasi-order from a decomposition file, optionally comparing it with the original job.
    Reconstruct {
        file: Option<PathBuf>,
        #[arg(long)]
        original: Option<PathBuf>,
    },
    /// Canonical tree export and orbit trichotomy.
    Tree { file: Option<PathBuf> },
    /// Emit the job file of a named example (a to e).
    GenExample {
        name: String,
        #[arg(long, allow_negative_numbers = true, default_value_t = -2)]
        index_lo: i64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 2)]
        index_hi: i64,
    },
}

/// Reads a path, or standard input for `None` and `-`.
pub type Reader<'a> = dyn FnMut(Option<&PathBuf>) -> std::io::Result<String> + 'a;

/// Runs a parsed command line; input files are read through `read`.
pub fn execute(cli: &Cli, read: &mut Reader<'_>) -> Outcome {
    let mut input = |p: Option<&PathBuf>| {
        read(p).map_err(|e| Outcome::fail(EXIT_INPUT, format!("cannot read input: {e}")))
    };
    let job = |p: Option<&PathBuf>,
               read: &mut dyn FnMut(Option<&PathBuf>) -> Result<String, Outcome>| {
        commands::load(&read(p)?, cli.radius, cli.term_radius)
    };
    let result = match &cli.command {
        Command::Check { file } => {
            job(file.as_ref(), &mut input).map(|s| commands::cmd_check(&s, cli.format))
        }
        Command::Classify { file } => {
            job(file.as_ref(), &mut input).map(|s| commands::cmd_classify(&s, cli.format))
        }
        Command::Decompose { file } => {
            job(file.as_ref(), &mut input).map(|s| commands::cmd_decompose(&s, cli.format))
        }
        Command::Tree { file } => {
            job(file.as_ref(), &mut input).map(|s| commands::cmd_tree(&s, cli.format))
        }
        Command::Reconstruct { file, original } => (|| {
            let text = input(file.as_ref())?;
            let orig = match original {
                Some(p) => Some(job(Some(p), &mut input)?),
                None => None,
            };
            Ok(commands::cmd_reconstruct(&text, orig.as_ref(), cli.format))
        })(),
        Command::GenExample {
            name,
            index_lo,
            index_hi,
        } => (|| {
            let name: ExampleName = name
                .parse()
                .map_err(|e: cqo::Error| Outcome::fail(EXIT_INPUT, e.to_string()))?;
            if cli.format == Format::Dot {
                return Err(Outcome::fail(
                    EXIT_INPUT,
                    "dot output is only available for the tree command",
                ));
            }
            if index_lo > index_hi {
                return Err(Outcome::fail(EXIT_INPUT, "empty index span"));
            }
            let window = match (cli.radius, cli.term_radius) {
                (None, None) => None,
                (r, t) => {
                    let d = name.default_policy();
                    let eval_radius = r.unwrap_or(d.eval_radius);
                    Some(WindowSpec {
                        eval_radius,
                        term_radius: t.unwrap_or(2 * eval_radius),
                    })
                }
            };
            let spec = commands::gen_example(
                name,
                window,
                IndexSpan {
                    lo: *index_lo,
                    hi: *index_hi,
                },
            );
            Ok(Outcome {
                code: 0,
                stdout: spec.to_json() + "\n",
                stderr: String::new(),
            })
        })(),
    };
    result.unwrap_or_else(|o| o)
}
