mod args;
mod commands;
mod error;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliError;
use crate::settings::{Layer, Settings};

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => Layer::from_file(path)?,
        None => Layer::default(),
    };
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
    }
    let resolve = |layer: Layer| Settings::resolve(layer.over(file.clone()));
    match cli.command {
        Command::Synth(a) => commands::synth(&resolve(Layer::from_synth(a))?),
        Command::Ingest(a) => commands::ingest(&resolve(Layer::from_data(a))?),
        Command::Cluster(a) => commands::cluster(&resolve(Layer::from_cluster(a))?),
        Command::Elbow(a) => commands::elbow(&resolve(Layer::from_elbow(a))?),
        Command::Impute(a) => commands::impute(&resolve(Layer::from_impute(a))?),
        Command::Colorify(a) => commands::colorify(&resolve(Layer::from_colorify(a))?),
        Command::ImportantRoads(a) => commands::important_roads(&resolve(Layer::from_important(a))?),
        Command::Dtw(a) => commands::dtw(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
