//! Library side of the `hd-qkd-ratekit` command-line tool.
//!
//! `main.rs` only parses arguments and maps errors to exit codes; all
//! commands live here so they can be driven from tests.

// `!(x > 0.0)` style guards are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod figures;
pub mod record;
pub mod verify;

use std::time::Instant;

use args::{Cli, Command};
use error::{usage, CliResult};
use record::RunRecord;

pub const THREADS_ENV: &str = "HDQKD_THREADS";

/// Sizes the global thread pool from `HDQKD_THREADS` if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        usage(format!(
            "{THREADS_ENV} must be a positive integer, got '{raw}'"
        ))
    })?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub struct Finished {
    pub record: RunRecord,
    pub text: String,
    pub exit: i32,
}

pub fn run(cli: &Cli) -> CliResult<Finished> {
    let started = Instant::now();
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let file = file.as_ref();
    macro_rules! dispatch {
        ($args:expr, $f:path) => {{
            let merged = config::merge($args, file)?;
            let input = serde_json::to_value(&merged).expect("serializable");
            ($f(&merged)?, input)
        }};
    }
    let (outcome, input) = match &cli.command {
        Command::Asymptotic(a) => dispatch!(a, commands::asymptotic),
        Command::Threshold(a) => dispatch!(a, commands::threshold),
        Command::Finite(a) => dispatch!(a, commands::finite),
        Command::Figure(a) => dispatch!(a, commands::figure),
        Command::Verify(a) => dispatch!(a, commands::verify),
        Command::Sweep(a) => dispatch!(a, commands::sweep),
    };
    let mut input = input;
    if let Some(path) = &cli.config {
        input["config"] = serde_json::json!(path);
    }
    let mut record = RunRecord::new(cli.command.name(), input, outcome.resolved, outcome.result);
    record.wall_time_s = started.elapsed().as_secs_f64();
    Ok(Finished {
        record,
        text: outcome.text,
        exit: outcome.exit,
    })
}
