use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::{LabelFormat, Sex, SpeakerMeta, LABEL_EXTENSION};
use crate::par;

use super::manifest::{Corpus, Manifest, UtteranceRecord};

/// Directory layouts understood by [`scan_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutAdapter {
    /// `mic/<spk>/<utt>.wav`, `laryn/<spk>/<utt>.wav`, optional
    /// `labels/<spk>/<utt>.lab` and `speakers.tsv` (`<spk>\t<m|f>` lines).
    Paired,
    /// `{FEMALE,MALE}/{MIC,LAR,REF}/<spk>/{mic,lar,ref}_<spk>_<utt>.{wav,f0}`.
    PtdbTug,
}

impl LayoutAdapter {
    pub fn for_corpus(corpus: Corpus) -> Self {
        match corpus {
            Corpus::PtdbTug => LayoutAdapter::PtdbTug,
            _ => LayoutAdapter::Paired,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayoutAdapter::Paired => "paired",
            LayoutAdapter::PtdbTug => "ptdb-tug",
        }
    }
}

impl fmt::Display for LayoutAdapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn scan_corpus(root: impl AsRef<Path>, corpus: Corpus) -> Result<Manifest> {
    scan_corpus_with(root, corpus, LayoutAdapter::for_corpus(corpus))
}

pub fn scan_corpus_with(root: impl AsRef<Path>, corpus: Corpus, adapter: LayoutAdapter) -> Result<Manifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::invalid(format!("corpus root {} is not a directory", root.display())));
    }
    if std::fs::read_dir(root)?.next().is_none() {
        log::warn!("corpus root {} is empty", root.display());
        return Ok(Manifest::default());
    }
    let mut records = match adapter {
        LayoutAdapter::Paired => scan_paired(root, corpus)?,
        LayoutAdapter::PtdbTug => scan_ptdb(root, corpus)?,
    };
    for r in &mut records {
        r.incomplete = corpus.has_laryngograph() && r.laryn_path.is_none();
        if r.incomplete {
            log::warn!("{}: no laryngograph recording for {}", corpus, r.utt_id);
        }
    }
    Manifest::new(records)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()).collect())
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)))
        .collect())
}

fn name_of(p: &Path) -> String {
    p.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

fn stem_of(p: &Path) -> String {
    p.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn unknown(adapter: LayoutAdapter, root: &Path) -> Error {
    Error::UnknownLayout {
        adapter: adapter.name().to_string(),
        root: root.to_path_buf(),
    }
}

fn read_speakers(path: &Path) -> Result<HashMap<String, Sex>> {
    let mut out = HashMap::new();
    if !path.is_file() {
        return Ok(out);
    }
    let text = std::fs::read_to_string(path)?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next()) {
            (Some(spk), Some(sex)) => {
                let sex = sex.trim().parse().map_err(|e: Error| Error::format(path.display().to_string(), i + 1, e.to_string()))?;
                out.insert(spk.to_string(), sex);
            }
            _ => return Err(Error::format(path.display().to_string(), i + 1, "expected `<speaker>\\t<sex>`")),
        }
    }
    Ok(out)
}

fn scan_paired(root: &Path, corpus: Corpus) -> Result<Vec<UtteranceRecord>> {
    let mic_root = root.join("mic");
    if !mic_root.is_dir() {
        return Err(unknown(LayoutAdapter::Paired, root));
    }
    let sexes = read_speakers(&root.join("speakers.tsv"))?;
    let speakers = subdirs(&mic_root)?;
    let per_speaker = par::map_slice(&speakers, |spk_dir| -> Result<Vec<UtteranceRecord>> {
        let spk = name_of(spk_dir);
        let sex = sexes.get(&spk).copied().unwrap_or(Sex::Unknown);
        let mut out = Vec::new();
        for mic in files_with_ext(spk_dir, "wav")? {
            let stem = stem_of(&mic);
            let laryn = root.join("laryn").join(&spk).join(format!("{stem}.wav"));
            let label = root.join("labels").join(&spk).join(format!("{stem}.{LABEL_EXTENSION}"));
            out.push(UtteranceRecord {
                utt_id: stem,
                corpus,
                mic_path: mic,
                laryn_path: laryn.is_file().then_some(laryn),
                speaker: SpeakerMeta::new(spk.clone(), sex),
                provided_label_path: label.is_file().then_some(label),
                label_format: LabelFormat::Standard,
                incomplete: false,
            });
        }
        Ok(out)
    });
    let mut records = Vec::new();
    for v in per_speaker {
        records.extend(v?);
    }
    Ok(records)
}

fn scan_ptdb(root: &Path, corpus: Corpus) -> Result<Vec<UtteranceRecord>> {
    let groups: Vec<(PathBuf, Sex)> = [("FEMALE", Sex::Female), ("MALE", Sex::Male)]
        .into_iter()
        .map(|(d, s)| (root.join(d), s))
        .filter(|(d, _)| d.join("MIC").is_dir())
        .collect();
    if groups.is_empty() {
        return Err(unknown(LayoutAdapter::PtdbTug, root));
    }
    let mut records = Vec::new();
    for (group, sex) in groups {
        for spk_dir in subdirs(&group.join("MIC"))? {
            let spk = name_of(&spk_dir);
            for mic in files_with_ext(&spk_dir, "wav")? {
                let stem = stem_of(&mic);
                let Some(rest) = stem.strip_prefix("mic_") else {
                    continue;
                };
                let laryn = group.join("LAR").join(&spk).join(format!("lar_{rest}.wav"));
                let reference = group.join("REF").join(&spk).join(format!("ref_{rest}.f0"));
                records.push(UtteranceRecord {
                    utt_id: rest.to_string(),
                    corpus,
                    mic_path: mic,
                    laryn_path: laryn.is_file().then_some(laryn),
                    speaker: SpeakerMeta::new(spk.clone(), sex),
                    provided_label_path: reference.is_file().then_some(reference),
                    label_format: LabelFormat::PtdbF0,
                    incomplete: false,
                });
            }
        }
    }
    Ok(records)
}
