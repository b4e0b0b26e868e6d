//! Corpus manifests, screening lists, segmentation, fold plans and the
//! synthetic corpus.

mod exclusions;
mod folds;
mod manifest;
mod scan;
mod segment;
pub mod synth;

pub use exclusions::{apply_exclusions, CorrectionEntry, ExclusionEntry, ExclusionList, ExclusionReason, ExclusionSummary};
pub use folds::{make_locro_folds, split_train_val, val_count, FoldPlan, FoldSet, SplitMode, VAL_FRACTION};
pub use manifest::{stats_path, utterance_key, Corpus, CorpusStats, Manifest, ManifestStats, UtteranceRecord};
pub use scan::{scan_corpus, scan_corpus_with, LayoutAdapter};
pub use segment::{segment_recording, MIN_SEGMENT_SECS};
pub use synth::{synthesize_corpus, synthesize_utterance, write_synthetic_corpus, SynthConfig, SyntheticUtterance};
