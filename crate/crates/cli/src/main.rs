//! `drem` command-line harness.

mod args;
mod stages;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;

fn error_kind(err: &anyhow::Error) -> &'static str {
    use drem::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Io { .. }) => "io",
        Some(E::Parse { .. } | E::UnknownRelation { .. } | E::UnknownSplit { .. } | E::EmptyFile(_)) => "parse",
        Some(E::Schema { .. } | E::ShapeMismatch { .. } | E::Checkpoint(_)) => "schema",
        Some(E::InvalidArgument(_)) => "invalid_argument",
        Some(E::NonFinite(_) | E::Diverged { .. }) => "numeric",
        Some(E::DuplicateQueryKey(_) | E::UnknownQueryKey(_)) => "query_key",
        Some(E::MissingLabel { .. }) => "missing_label",
        Some(E::Degenerate(_)) => "degenerate",
        Some(E::Json(_)) => "json",
        None => "runtime",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({"error": {"kind": "usage", "message": first}}));
            return ExitCode::from(2);
        }
    };
    match stages::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": error_kind(&e), "message": format!("{e:#}")}}));
            ExitCode::FAILURE
        }
    }
}
