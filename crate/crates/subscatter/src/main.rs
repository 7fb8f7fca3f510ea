use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use subscatter::{execute, CliError, Format, Mode, Overrides};

/// Transmission/reflection subprocess scattering: stationary tables, wave
/// packets, characteristic times, Hartman scans, double slits and the
/// validation suite.
#[derive(Debug, Parser)]
#[command(name = "subscatter", version)]
struct Args {
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    /// Worker threads; 0 or absent lets the runtime decide.
    #[arg(long, env = "SUBSCATTER_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = args.threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides { out: args.out, formats: args.format };
    match execute(args.mode, &args.config, &overrides) {
        Ok((summary, written)) => {
            println!("{summary}");
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(&e)
        }
    }
}

fn exit(e: &CliError) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
