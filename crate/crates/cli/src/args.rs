use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "voicing", version, about = "Laryngograph-referenced voicing detection")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GlobalOpts {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Seed for corpus synthesis, fold splits, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exit with code 2 when any record or file was skipped.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Also write per-frame posteriors (dccrn detection).
    #[arg(long, global = true)]
    pub posteriors: bool,
    /// Report realigned rates only (combine with --unaligned for both).
    #[arg(long, global = true)]
    pub aligned: bool,
    /// Report unshifted rates only (combine with --aligned for both).
    #[arg(long, global = true)]
    pub unaligned: bool,
}

impl GlobalOpts {
    /// `(aligned, unaligned)`; both when neither flag is given.
    pub fn alignment(&self) -> (bool, bool) {
        if self.aligned || self.unaligned {
            (self.aligned, self.unaligned)
        } else {
            (true, true)
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic corpus (paired layout) and its manifest.
    SynthCorpus(SynthArgs),
    /// Build corpus manifests.
    #[command(subcommand)]
    Manifest(ManifestCmd),
    /// Write a leave-one-corpus-out fold plan.
    Folds(FoldsArgs),
    /// Reference label extraction and comparison.
    #[command(subcommand)]
    Labels(LabelsCmd),
    /// Voicing decisions for WAV files.
    Detect(DetectArgs),
    /// Train one model per fold, or run the synthetic demo.
    Train(TrainArgs),
    /// Cross-corpus evaluation.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of utterances (overrides the config).
    #[arg(long)]
    pub n: Option<usize>,
    /// Seconds per utterance (overrides the config).
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ManifestCmd {
    /// Scan a corpus directory into a manifest TSV (plus `<out>.json` stats).
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub root: PathBuf,
    /// PTDB-TUG, Mocha-TIMIT, FDA, KEELE, CMU-Arctic, LibriSpeech or synthetic.
    #[arg(long)]
    pub corpus: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub layout: Option<Layout>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Layout {
    Paired,
    PtdbTug,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum SplitArg {
    #[default]
    Utterance,
    Speaker,
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    /// One or more manifests; each corpus becomes one held-out fold.
    #[arg(long = "manifest", required = true, num_args = 1..)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Utterance)]
    pub split: SplitArg,
}

#[derive(Debug, Subcommand)]
pub enum LabelsCmd {
    /// Run the tracker on every laryngograph recording of a manifest.
    Extract(ExtractArgs),
    /// Mismatch rates between two label directories.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Estimate labels (`*.lab`, searched recursively).
    pub a: PathBuf,
    /// Reference labels, matched to `a` by relative path.
    pub b: PathBuf,
    /// Output directory for `compare.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Largest shift tried when realigning, in frames. A positive shift
    /// moves the labels of `a` later in time relative to `b`.
    #[arg(long)]
    pub max_shift: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectMethod {
    Rapt,
    Dccrn,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub method: DetectMethod,
    /// Model checkpoint (dccrn only).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Train on generated data and evaluate (ignores manifests and folds).
    #[arg(long, conflicts_with_all = ["manifests", "folds"])]
    pub synthetic_demo: bool,
    #[arg(long = "manifest", num_args = 1..)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Only the fold holding out this corpus.
    #[arg(long)]
    pub fold: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "manifest", required = true, num_args = 1..)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub folds: PathBuf,
    /// Comma-separated: dccrn, rapt, reference.
    #[arg(long, value_delimiter = ',', default_value = "dccrn,rapt")]
    pub methods: Vec<String>,
    /// Output directory of `train` (`<corpus>/model.ckpt` per fold).
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
