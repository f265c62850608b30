//! `mlrh`: train, boost, encode, search, evaluate and benchmark binary hash codes.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mlrh", version, about = "Supervised discrete hashing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset.
    Gen(commands::GenArgs),
    /// Train a single hashing model.
    Train(commands::TrainArgs),
    /// Train several models and keep the best-balanced bits.
    Boost(commands::BoostArgs),
    /// Encode features with a trained model.
    Encode(commands::EncodeArgs),
    /// Hamming k-nearest-neighbour search.
    Search(commands::SearchArgs),
    /// mAP and precision@k of query codes against a database.
    Eval(commands::EvalArgs),
    /// Training-time scaling sweep and code diagnostics.
    Bench(commands::BenchArgs),
}

fn exit_code(err: &mlrh::Error) -> u8 {
    match err {
        mlrh::Error::Usage(_) => 2,
        mlrh::Error::Format { .. } | mlrh::Error::Data(_) | mlrh::Error::Io(_) => 3,
        mlrh::Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Boost(a) => commands::boost(a),
        Command::Encode(a) => commands::encode(a),
        Command::Search(a) => commands::search(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlrh: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
