//! `slidenet` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slidenet::HeadKind;

#[derive(Parser)]
#[command(name = "slidenet", version, about = "Imbalanced multi-band landslide classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run configuration: a JSON file or preset, then individual flag overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the desk-scale benchmark preset instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    pub benchmark: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Comma-separated band indices to keep.
    #[arg(long, value_delimiter = ',')]
    pub bands: Option<Vec<usize>>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// `.cnn` checkpoint written by `train` or `crossval`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `.svm` head written by `fit-svm` or `crossval`.
    #[arg(long)]
    pub svm: Option<PathBuf>,
    /// Head to score with; defaults to `svm` when `--svm` is given.
    #[arg(long)]
    pub head: Option<HeadKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic benchmark dataset (`.mbt` images and a manifest).
    MakeSynth {
        #[arg(long)]
        out: PathBuf,
        /// JSON generator configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        /// Non-landslide images per landslide image.
        #[arg(long)]
        imbalance: Option<usize>,
    },
    /// SSIM-SMOTE the minority class and write an augmented manifest.
    Oversample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Synthetics per minority image; by default enough to balance the classes.
        #[arg(long)]
        n_syn: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train the CNN and write `model.cnn`, `metrics.csv` and `config.json`.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hold out manifest rows with this fold for best-epoch selection.
        #[arg(long)]
        val_fold: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the SVM head on checkpoint embeddings, optionally for several C values.
    FitSvm {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One value or a comma-separated sweep.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        c: Vec<f64>,
        /// RBF width, a number or `auto`.
        #[arg(long, default_value = "auto")]
        gamma: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fit on the other folds and report F1 on this one.
        #[arg(long)]
        val_fold: Option<usize>,
    },
    /// Print confusion counts and F1 on a labelled manifest.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Stratified k-fold cross-validation of the full pipeline.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Oversample the whole dataset before splitting into folds.
        #[arg(long)]
        global_smote: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Band occlusion importance over the landslide rows of a manifest.
    Occlusion {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated names for the model's input bands.
        #[arg(long, value_delimiter = ',')]
        band_names: Option<Vec<String>>,
    },
    /// Write `id,label` predictions.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export backbone embeddings as `id,label,e_0..`.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeSynth { out, config, seed, samples, size, imbalance } => {
            commands::make_synth(&out, config, seed, samples, size, imbalance)
        }
        Command::Oversample { manifest, out, n_syn, k, run } => commands::oversample(&manifest, &out, n_syn, k, &run),
        Command::Train { manifest, out, val_fold, run } => commands::train(&manifest, &out, val_fold, &run),
        Command::FitSvm { checkpoint, manifest, out, c, gamma, seed, val_fold } => {
            commands::fit_svm(&checkpoint, &manifest, &out, &c, &gamma, seed, val_fold)
        }
        Command::Evaluate { model, manifest } => commands::evaluate(&model, &manifest),
        Command::Crossval { manifest, out, k, global_smote, run } => commands::crossval(&manifest, &out, k, global_smote, &run),
        Command::Occlusion { model, manifest, out, band_names } => commands::occlusion(&model, &manifest, &out, band_names),
        Command::Predict { model, manifest, out } => commands::predict(&model, &manifest, &out),
        Command::Embed { checkpoint, manifest, out } => commands::embed(&checkpoint, &manifest, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
