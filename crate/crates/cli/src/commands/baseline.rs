//! `baseline`: score traces by distance in a trained model's representation
//! space — exact k-nearest-neighbor or k-means-centers.
//!
//! The reference set is the representations of the input's `normal-train`
//! traces; every input trace (reference ones included) gets a score row, so
//! the table feeds straight into `evaluate`.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use tracelm_core::corpus::EncodedTrace;
use tracelm_core::corpus::TraceLabel;
use tracelm_core::detect::{kmeans_fit, KnnIndex};
use tracelm_core::lm::{representation, LmModel};

use crate::manifest::Manifest;
use crate::model_file;
use crate::tables::{scorer, write_score_table, ScoreRow};

use super::{encode_traces, note_oov, InputArgs};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Distance to the k-th nearest normal-training representation.
    Knn,
    /// Distance to the nearest of k fitted centers.
    Kmc,
}

impl Method {
    fn default_k(self) -> usize {
        match self {
            Method::Knn => 11,
            Method::Kmc => 1,
        }
    }
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Trained model file supplying the representations.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    /// Distance family.
    #[arg(long, value_enum)]
    pub method: Method,

    /// Neighbor rank (knn) or number of centers (kmc).
    /// [default: 11 for knn, 1 for kmc]
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,

    /// Score by the fraction of reference points *outside* this radius
    /// instead of the k-th neighbor distance (knn only).
    #[arg(long, value_name = "R")]
    pub radius: Option<f64>,

    /// Independent center initializations to try (kmc).
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,

    /// Seed for the center initializations (kmc).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Where to write the score table.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

fn vectors(model: &LmModel<f32>, traces: &[EncodedTrace]) -> Vec<Vec<f64>> {
    traces
        .iter()
        .map(|t| {
            representation(model, t)
                .vector
                .into_iter()
                .map(f64::from)
                .collect()
        })
        .collect()
}

pub fn run(args: &BaselineArgs) -> Result<()> {
    let model = model_file::load(&args.model)?;
    let traces = args.input.load()?;
    let encoded = encode_traces(&traces, &model.vocab);
    let k = args.k.unwrap_or_else(|| args.method.default_k());

    let reference_traces: Vec<EncodedTrace> = encoded
        .traces
        .iter()
        .filter(|t| t.label == TraceLabel::NormalTrain)
        .cloned()
        .collect();
    if reference_traces.is_empty() {
        bail!(
            "no normal-train traces in the input; baselines fit on normal-training \
             representations"
        );
    }
    let reference = vectors(&model, &reference_traces);
    let queries = vectors(&model, &encoded.traces);

    let (kind, scores): (&str, Vec<f64>) = match args.method {
        Method::Knn => {
            let index = KnnIndex::new(reference, k)?;
            match args.radius {
                Some(r) => (
                    scorer::KNN_COUNT,
                    queries
                        .iter()
                        .map(|q| index.count_score(q, r))
                        .collect::<Result<_, _>>()?,
                ),
                None => (
                    scorer::KNN_DISTANCE,
                    queries
                        .iter()
                        .map(|q| index.score(q))
                        .collect::<Result<_, _>>()?,
                ),
            }
        }
        Method::Kmc => {
            if args.radius.is_some() {
                bail!("--radius applies to the knn method only");
            }
            let centers = kmeans_fit(&reference, k, args.restarts, args.seed)?;
            (
                scorer::KMC_DISTANCE,
                queries
                    .iter()
                    .map(|q| centers.score(q))
                    .collect::<Result<_, _>>()?,
            )
        }
    };

    let rows: Vec<ScoreRow> = encoded
        .traces
        .iter()
        .zip(scores)
        .map(|(t, score)| ScoreRow {
            trace_id: t.source.clone(),
            label: t.label,
            score,
        })
        .collect();
    write_score_table(&args.out, &rows)?;

    let mut manifest = Manifest::new("baseline");
    manifest.push("model", args.model.display());
    args.input.describe(&mut manifest);
    manifest.push(
        "method",
        match args.method {
            Method::Knn => "knn",
            Method::Kmc => "kmc",
        },
    );
    manifest.push("k", k);
    if let Some(r) = args.radius {
        manifest.push("radius", r);
    }
    if args.method == Method::Kmc {
        manifest.push("restarts", args.restarts);
        manifest.push("seed", args.seed);
    }
    manifest.push("scorer", kind);
    manifest.push("reference_traces", reference_traces.len());
    manifest.push("traces", rows.len());
    note_oov(&mut manifest, &encoded);
    manifest.push("out", args.out.display());
    manifest.write_for(&args.out)?;

    println!(
        "scored {} traces with {kind} (k = {k}, {} reference traces) -> {}",
        rows.len(),
        reference_traces.len(),
        args.out.display()
    );
    Ok(())
}
