//! Voicing labels: reference extraction, comparison, alignment and file IO.

mod compare;
pub mod io;
mod reference;
mod voicing;

pub use compare::{
    align_for_lowest_vde, mismatch_rate, shift_order, shifted_counts, ErrorCounts, LabelComparison, DEFAULT_MAX_SHIFT,
    MAX_LENGTH_SLACK, MIN_ALIGNED_OVERLAP,
};
pub use io::{format_labels, parse_labels, read_label_file, read_labels, write_label_file, LabelFormat, LABEL_EXTENSION};
pub use reference::{
    extract_reference_labels, extract_reference_labels_with_cutoff, pseudo_labels_from_mic, Sex, SpeakerMeta,
    FEMALE_CUTOFF_HZ, LARYN_KAISER_BETA, LARYN_KAISER_ORDER, MALE_CUTOFF_HZ,
};
pub use voicing::{VoicingLabels, DEFAULT_HOP_MS};
