use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::manifest::{Corpus, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExclusionReason {
    FlawedLaryngograph,
    HarmonicNoiseUncorrectable,
    Other,
}

impl ExclusionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExclusionReason::FlawedLaryngograph => "flawed_laryngograph",
            ExclusionReason::HarmonicNoiseUncorrectable => "harmonic_noise_uncorrectable",
            ExclusionReason::Other => "other",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExclusionReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flawed_laryngograph" => Ok(ExclusionReason::FlawedLaryngograph),
            "harmonic_noise_uncorrectable" => Ok(ExclusionReason::HarmonicNoiseUncorrectable),
            "other" => Ok(ExclusionReason::Other),
            _ => Err(Error::invalid(format!("unknown exclusion reason `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionEntry {
    pub corpus: Corpus,
    pub utt_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionEntry {
    pub corpus: Corpus,
    pub utt_id: String,
    pub corrected_label_path: PathBuf,
}

/// Manually screened recordings to drop, and recordings whose labels were
/// corrected by hand.
///
/// Text form: `#v1`, then `<corpus>\t<utt_id>\t<reason>` per exclusion and
/// `<corpus>\t<utt_id>\tcorrected\t<path>` per correction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    pub entries: Vec<ExclusionEntry>,
    pub corrections: Vec<CorrectionEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSummary {
    pub removed: usize,
    pub corrected: usize,
    /// `(corpus, utt_id)` of entries that matched no record.
    pub unmatched: Vec<(Corpus, String)>,
}

impl ExclusionList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.corrections.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("#v1\n");
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\n", e.corpus, e.utt_id, e.reason));
        }
        for c in &self.corrections {
            s.push_str(&format!("{}\t{}\tcorrected\t{}\n", c.corpus, c.utt_id, c.corrected_label_path.display()));
        }
        s
    }

    pub fn from_tsv(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        if !matches!(lines.next(), Some((_, "#v1"))) {
            return Err(Error::format(source, 1, "expected `#v1` version line"));
        }
        let mut out = ExclusionList::default();
        for (i, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::format(source, i + 1, m);
            let cols: Vec<&str> = line.split('\t').collect();
            let corpus: Corpus = cols[0].parse().map_err(|e: Error| err(e.to_string()))?;
            match cols.as_slice() {
                [_, id, "corrected", path] => out.corrections.push(CorrectionEntry {
                    corpus,
                    utt_id: id.to_string(),
                    corrected_label_path: PathBuf::from(path),
                }),
                [_, _, "corrected"] => return Err(err("correction without a label path".into())),
                [_, id, reason] => out.entries.push(ExclusionEntry {
                    corpus,
                    utt_id: id.to_string(),
                    reason: reason.parse().map_err(|e: Error| err(e.to_string()))?,
                }),
                _ => return Err(err(format!("expected 3 or 4 columns, found {}", cols.len()))),
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_tsv(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

/// Drops excluded records and repoints corrected ones. Entries that match
/// nothing are logged and reported, never fatal.
pub fn apply_exclusions(m: &Manifest, x: &ExclusionList) -> Result<(Manifest, ExclusionSummary)> {
    let mut summary = ExclusionSummary::default();
    let excluded = |c: Corpus, id: &str| x.entries.iter().any(|e| e.corpus == c && e.utt_id == id);
    for e in &x.entries {
        if m.get(e.corpus, &e.utt_id).is_none() {
            summary.unmatched.push((e.corpus, e.utt_id.clone()));
        }
    }
    for c in &x.corrections {
        if m.get(c.corpus, &c.utt_id).is_none() || excluded(c.corpus, &c.utt_id) {
            summary.unmatched.push((c.corpus, c.utt_id.clone()));
        }
    }
    let mut kept = Vec::with_capacity(m.len());
    for r in m.records() {
        if excluded(r.corpus, &r.utt_id) {
            summary.removed += 1;
            continue;
        }
        let mut r = r.clone();
        if let Some(c) = x.corrections.iter().rev().find(|c| c.corpus == r.corpus && c.utt_id == r.utt_id) {
            r.provided_label_path = Some(c.corrected_label_path.clone());
            r.label_format = crate::labels::LabelFormat::Standard;
            summary.corrected += 1;
        }
        kept.push(r);
    }
    for (c, id) in &summary.unmatched {
        log::warn!("exclusion list entry {c}:{id} matches no record");
    }
    Ok((Manifest::new(kept)?, summary))
}
