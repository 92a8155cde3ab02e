use std::process::ExitCode;

use clap::Parser;
use heom_cli::config::THREADS_ENV;
use heom_cli::output::{write_json, ERROR_RECORD};
use heom_cli::{dispatch, parse_config, Cli, CliError};

fn fail(err: &CliError, out: Option<&std::path::Path>) -> ExitCode {
    let record = err.record();
    eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| err.to_string()));
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = write_json(&dir.join(ERROR_RECORD), &record);
    }
    ExitCode::from(record.exit_code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads_env = std::env::var(THREADS_ENV).ok();
    let cfg = match parse_config(&cli, threads_env.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    if let Some(n) = cfg.threads() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match dispatch(&cfg) {
        Ok(done) => {
            log::info!("{} wrote {} files to {}", cfg.command.name(), done.files.len() + 1, done.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&cfg.io.out)),
    }
}
