use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uatools::{nsc_compile, nsc_verify};

#[derive(Parser)]
#[command(name = "uansc", version, about = "Namespace image compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a device model into a namespace image.
    Compile {
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Print the per-section size report.
        #[arg(long)]
        report: bool,
    },
    /// Check a namespace image.
    Verify { image: PathBuf },
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Compile {
            model,
            output,
            report,
        } => nsc_compile(&model, &output).map(|r| {
            if report {
                print!("{r}");
            }
        }),
        Command::Verify { image } => nsc_verify(&image).map(|s| println!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
