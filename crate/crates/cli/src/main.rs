//! Command-line front end for the trace-anomaly toolkit.

use clap::Parser;

use tracelm::commands;

/// Host-intrusion detection over system-call traces: train a language
/// model on normal behavior, score traces by average negative
/// log-likelihood, combine and evaluate detectors.
#[derive(Parser, Debug)]
#[command(name = "tracelm", version, max_term_width = 100)]
enum Cli {
    /// Fit a language model on the normal-training traces.
    Train(commands::train::TrainArgs),
    /// Score traces by average negative log-likelihood under a model.
    Score(commands::score::ScoreArgs),
    /// Fit the leaky combination rule from member score tables.
    Ensemble(commands::ensemble::EnsembleArgs),
    /// Compute ROC curves, areas, and false-alarm readouts.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Score traces by distance in representation space (knn / kmc).
    Baseline(commands::baseline::BaselineArgs),
    /// Dump a model's call-embedding matrix as TSV.
    ExportEmbeddings(commands::export::ExportArgs),
    /// Generate a synthetic trace corpus.
    Synth(commands::synth::SynthArgs),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse() {
        Cli::Train(args) => commands::train::run(&args),
        Cli::Score(args) => commands::score::run(&args),
        Cli::Ensemble(args) => commands::ensemble::run(&args),
        Cli::Evaluate(args) => commands::evaluate::run(&args),
        Cli::Baseline(args) => commands::baseline::run(&args),
        Cli::ExportEmbeddings(args) => commands::export::run(&args),
        Cli::Synth(args) => commands::synth::run(&args),
    }
}
