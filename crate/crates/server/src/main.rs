use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uaengine::engine::capture::CaptureWriter;
use uaserver::{logging, replay_dir, Server, ServerConfig, ServerError, CAPTURE_CONFIG};

#[derive(Parser)]
#[command(name = "uaserver", version, about = "OPC UA nano-profile server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve until interrupted.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Serve and record every frame into a capture directory.
    Record {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Replay a capture against a fresh engine and compare the responses.
    Replay { dir: PathBuf },
}

const CONFIG_ERROR: u8 = 1;
const FATAL: u8 = 2;

fn load(path: &Path) -> Result<ServerConfig, ExitCode> {
    ServerConfig::load(path).map_err(|e| {
        eprintln!("uaserver: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })
}

fn serve(cfg: ServerConfig, out: Option<PathBuf>) -> ExitCode {
    logging::init(cfg.log_level);
    let recorder = match &out {
        Some(dir) => match CaptureWriter::create(dir).and_then(|w| {
            let path = dir.join(CAPTURE_CONFIG);
            std::fs::write(&path, cfg.to_text())
                .map(|_| w)
                .map_err(|source| uaengine::engine::capture::CaptureError::Io { path, source })
        }) {
            Ok(w) => Some(w),
            Err(e) => {
                eprintln!("uaserver: {e}");
                return ExitCode::from(FATAL);
            }
        },
        None => None,
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("uaserver: {e}");
            return ExitCode::from(FATAL);
        }
    };
    let result = rt.block_on(async {
        let server = Server::bind(&cfg, recorder).await?;
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(ServerError::Config(e)) => {
            eprintln!("uaserver: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => {
            eprintln!("uaserver: {e}");
            ExitCode::from(FATAL)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => match load(&config) {
            Ok(cfg) => serve(cfg, None),
            Err(code) => code,
        },
        Command::Record { config, out } => match load(&config) {
            Ok(cfg) => serve(cfg, Some(out)),
            Err(code) => code,
        },
        Command::Replay { dir } => match replay_dir(&dir) {
            Ok(report) => {
                println!(
                    "connections={} exchanges={} divergences={}",
                    report.connections,
                    report.exchanges,
                    report.divergences.len()
                );
                for d in &report.divergences {
                    println!("{d}");
                }
                if report.passed() {
                    println!("PASS");
                    ExitCode::SUCCESS
                } else {
                    println!("FAIL");
                    ExitCode::from(CONFIG_ERROR)
                }
            }
            Err(e) => {
                eprintln!("uaserver: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}
