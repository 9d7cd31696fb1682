use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uatools::{asm_build, asm_dump};

#[derive(Parser)]
#[command(name = "uaasm", version, about = "StreamVM assembler and disassembler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble source into a program image.
    Build {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print a program image as assembly.
    Dump { input: PathBuf },
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Build { input, output } => asm_build(&input, &output).map(|p| {
            eprintln!(
                "{}: {} bytes, {} entry points",
                output.display(),
                p.code.len(),
                p.entry_points.len()
            );
        }),
        Command::Dump { input } => asm_dump(&input).map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
