//! `train`: fit a language model on the normal-training traces.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use tracelm_core::corpus::{RawTrace, SyscallVocab, TraceLabel};
use tracelm_core::lm::{self, LmConfig};

use crate::manifest::Manifest;
use crate::model_file;

use super::{encode_traces, sibling, InputArgs};

fn d() -> LmConfig {
    LmConfig::default()
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Stacked recurrent layers.
    #[arg(long, default_value_t = d().num_layers)]
    pub layers: usize,

    /// Memory cells per layer (also the embedding width).
    #[arg(long, default_value_t = d().cells)]
    pub cells: usize,

    /// Adam learning rate.
    #[arg(long, default_value_t = d().lr)]
    pub lr: f64,

    /// Global gradient-norm ceiling.
    #[arg(long, default_value_t = d().clip_norm)]
    pub clip: f64,

    /// Dropout probability on non-recurrent connections.
    #[arg(long, default_value_t = d().dropout_p)]
    pub dropout: f64,

    /// Half-width of the uniform weight initialization.
    #[arg(long, default_value_t = d().init_range)]
    pub init_range: f64,

    /// Maximum training epochs (early stopping may use fewer).
    #[arg(long, default_value_t = d().epochs)]
    pub epochs: usize,

    /// Backpropagation-through-time truncation length.
    #[arg(long, default_value_t = d().bptt_chunk)]
    pub bptt_chunk: usize,

    /// Traces per training batch.
    #[arg(long, default_value_t = d().batch_size)]
    pub batch_size: usize,

    /// Base seed for every random choice (init, dropout, shuffles).
    #[arg(long, default_value_t = d().seed)]
    pub seed: u64,

    /// Where to write the model (a training log lands at <OUT>.log).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

impl TrainArgs {
    fn config(&self) -> LmConfig {
        LmConfig {
            num_layers: self.layers,
            cells: self.cells,
            lr: self.lr,
            clip_norm: self.clip,
            dropout_p: self.dropout,
            init_range: self.init_range,
            epochs: self.epochs,
            bptt_chunk: self.bptt_chunk,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let traces = args.input.load()?;
    let train_raw: Vec<RawTrace> = traces
        .iter()
        .filter(|t| t.label == TraceLabel::NormalTrain)
        .cloned()
        .collect();
    let val_raw: Vec<RawTrace> = traces
        .iter()
        .filter(|t| t.label == TraceLabel::NormalValidation)
        .cloned()
        .collect();
    if train_raw.is_empty() {
        bail!(
            "no normal-train traces in the input; training reads only traces \
             labeled normal-train (flat files: pass --label normal-train)"
        );
    }

    let vocab = SyscallVocab::build(&train_raw)?;
    let train_set = encode_traces(&train_raw, &vocab);
    let val_set = encode_traces(&val_raw, &vocab);
    let config = args.config();
    let model = lm::train::<f32>(&train_set.traces, &val_set.traces, &vocab, &config)?;

    model_file::save(&args.out, &model)?;

    let log_path = sibling(&args.out, "log");
    let mut log = String::from("# epoch\ttrain_nll\tval_nll\n");
    for e in &model.training_log {
        log.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.train_nll, e.val_nll));
    }
    std::fs::write(&log_path, log)
        .with_context(|| format!("writing training log {}", log_path.display()))?;

    let mut manifest = Manifest::new("train");
    args.input.describe(&mut manifest);
    manifest.push("layers", config.num_layers);
    manifest.push("cells", config.cells);
    manifest.push("lr", config.lr);
    manifest.push("clip", config.clip_norm);
    manifest.push("dropout", config.dropout_p);
    manifest.push("init_range", config.init_range);
    manifest.push("epochs", config.epochs);
    manifest.push("bptt_chunk", config.bptt_chunk);
    manifest.push("batch_size", config.batch_size);
    manifest.push("seed", config.seed);
    manifest.push("train_traces", train_set.traces.len());
    manifest.push("validation_traces", val_set.traces.len());
    manifest.push("vocab_size", vocab.size());
    manifest.push("epochs_run", model.training_log.len());
    manifest.push("model", args.out.display());
    manifest.push("log", log_path.display());
    manifest.write_for(&args.out)?;

    match model.training_log.last() {
        Some(last) => println!(
            "trained {}x{} model on {} traces (vocab {}): {} epochs, \
             final train NLL {:.4}, validation NLL {:.4} -> {}",
            config.num_layers,
            config.cells,
            train_set.traces.len(),
            vocab.size(),
            model.training_log.len(),
            last.train_nll,
            last.val_nll,
            args.out.display()
        ),
        None => println!(
            "wrote {}x{} model with initial weights (0 epochs) -> {}",
            config.num_layers,
            config.cells,
            args.out.display()
        ),
    }
    Ok(())
}
