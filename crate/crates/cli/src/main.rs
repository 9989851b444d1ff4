use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use floquet_cli::{run_file, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Floquet-map dynamics of a cavity with a periodically moving mirror.
#[derive(Debug, Parser)]
#[command(name = "floquet", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "FLOQUET_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if args.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    match run_file(&args.config, &args.out, format) {
        Ok(summary) => {
            println!(
                "{}: wrote {} to {} in {:.3} s",
                summary.command,
                summary.outputs.join(", "),
                args.out.display(),
                summary.wall_time_s
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
