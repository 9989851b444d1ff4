//! Config-driven front end: parse a TOML run description, run one command,
//! write tables and a JSON summary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;
use std::time::Instant;

pub use config::{parse_config, Prepared, RunConfig};
pub use error::CliError;
pub use output::{Format, Summary};

/// Summary file name inside the output directory.
pub const SUMMARY_FILE: &str = "summary.json";

fn metadata(prepared: &Prepared) -> Vec<(String, String)> {
    let cfg = &prepared.config;
    let mut meta = vec![
        ("generator".to_string(), format!("floquet {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), cfg.command.name().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
    ];
    if let Some(p) = &cfg.protocol {
        meta.push(("protocol".into(), serde_json::to_string(p).unwrap_or_default()));
    }
    meta.push((
        "parameters".into(),
        serde_json::to_string(&cfg.command).unwrap_or_default(),
    ));
    meta
}

/// Runs a prepared config and writes its outputs into `out_dir`.
pub fn run(prepared: &Prepared, out_dir: &Path, format: Format) -> Result<Summary, CliError> {
    let start = Instant::now();
    let report = commands::run_command(prepared)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let files = output::write_tables(out_dir, &report, &metadata(prepared), format)?;
    let summary = Summary {
        command: prepared.config.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: prepared.config.clone(),
        scalars: report.scalars,
        outputs: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(SUMMARY_FILE);
    let mut bytes = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    bytes.push(b'\n');
    output::write_atomic(&path, &bytes)?;
    Ok(summary)
}

/// Reads, parses and runs a config file.
pub fn run_file(config: &Path, out_dir: &Path, format: Format) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
    let prepared = parse_config(&text)?;
    run(&prepared, out_dir, format)
}
