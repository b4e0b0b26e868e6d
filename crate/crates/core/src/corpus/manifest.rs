use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelFormat, Sex, SpeakerMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corpus {
    #[serde(rename = "PTDB-TUG")]
    PtdbTug,
    #[serde(rename = "Mocha-TIMIT")]
    MochaTimit,
    #[serde(rename = "FDA")]
    Fda,
    #[serde(rename = "KEELE")]
    Keele,
    #[serde(rename = "CMU-Arctic")]
    CmuArctic,
    #[serde(rename = "LibriSpeech")]
    LibriSpeech,
    #[serde(rename = "synthetic")]
    Synthetic,
}

impl Corpus {
    pub const ALL: [Corpus; 7] = [
        Corpus::PtdbTug,
        Corpus::MochaTimit,
        Corpus::Fda,
        Corpus::Keele,
        Corpus::CmuArctic,
        Corpus::LibriSpeech,
        Corpus::Synthetic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Corpus::PtdbTug => "PTDB-TUG",
            Corpus::MochaTimit => "Mocha-TIMIT",
            Corpus::Fda => "FDA",
            Corpus::Keele => "KEELE",
            Corpus::CmuArctic => "CMU-Arctic",
            Corpus::LibriSpeech => "LibriSpeech",
            Corpus::Synthetic => "synthetic",
        }
    }

    /// Corpora whose records must carry a laryngograph channel.
    pub fn has_laryngograph(&self) -> bool {
        !matches!(self, Corpus::LibriSpeech)
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corpus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Corpus::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown corpus `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub corpus: Corpus,
    pub mic_path: PathBuf,
    pub laryn_path: Option<PathBuf>,
    pub speaker: SpeakerMeta,
    pub provided_label_path: Option<PathBuf>,
    pub label_format: LabelFormat,
    /// Set when a laryngograph corpus record has no laryngograph file.
    pub incomplete: bool,
}

impl UtteranceRecord {
    /// Identifier unique across corpora: `<corpus>:<utt_id>`.
    pub fn key(&self) -> String {
        utterance_key(self.corpus, &self.utt_id)
    }
}

pub fn utterance_key(corpus: Corpus, utt_id: &str) -> String {
    format!("{corpus}:{utt_id}")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub utterances: usize,
    pub incomplete: usize,
    pub speakers: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub version: u32,
    pub total: usize,
    pub corpora: BTreeMap<String, CorpusStats>,
}

/// Immutable list of utterance records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<UtteranceRecord>,
}

const TSV_VERSION: &str = "#v1";
const TSV_COLUMNS: &str =
    "#corpus\tutt_id\tspeaker_id\tsex\tmic_path\tlaryn_path\tprovided_label_path\tlabel_format\tstatus";

impl Manifest {
    /// Fails on duplicate `utt_id`s within a corpus.
    pub fn new(records: Vec<UtteranceRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert((r.corpus, r.utt_id.as_str())) {
                return Err(Error::invalid(format!("duplicate utterance `{}` in {}", r.utt_id, r.corpus)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn corpora(&self) -> Vec<Corpus> {
        let mut out: Vec<Corpus> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.corpus) {
                out.push(r.corpus);
            }
        }
        out
    }

    pub fn get(&self, corpus: Corpus, utt_id: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.corpus == corpus && r.utt_id == utt_id)
    }

    pub fn by_key(&self, key: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.key() == key)
    }

    /// Concatenates manifests; keys must stay unique.
    pub fn merged(parts: &[Manifest]) -> Result<Manifest> {
        Manifest::new(parts.iter().flat_map(|m| m.records.iter().cloned()).collect())
    }

    pub fn stats(&self) -> ManifestStats {
        let mut corpora: BTreeMap<String, CorpusStats> = BTreeMap::new();
        for r in &self.records {
            let s = corpora.entry(r.corpus.to_string()).or_default();
            s.utterances += 1;
            s.incomplete += r.incomplete as usize;
            *s.speakers.entry(r.speaker.speaker_id.clone()).or_default() += 1;
        }
        ManifestStats {
            version: 1,
            total: self.records.len(),
            corpora,
        }
    }

    pub fn to_tsv(&self) -> Result<String> {
        let mut s = format!("{TSV_VERSION}\n{TSV_COLUMNS}\n");
        for r in &self.records {
            let fields = [
                r.corpus.as_str().to_string(),
                r.utt_id.clone(),
                r.speaker.speaker_id.clone(),
                r.speaker.sex.to_string(),
                path_field(Some(&r.mic_path))?,
                path_field(r.laryn_path.as_deref())?,
                path_field(r.provided_label_path.as_deref())?,
                r.label_format.as_str().to_string(),
                if r.incomplete { "incomplete" } else { "ok" }.to_string(),
            ];
            for f in &fields[..4] {
                check_field(f)?;
            }
            s.push_str(&fields.join("\t"));
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_tsv(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, TSV_VERSION)) => {}
            _ => return Err(Error::format(source, 1, format!("expected `{TSV_VERSION}` version line"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::format(source, i + 1, m);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 9 {
                return Err(err(format!("expected 9 columns, found {}", cols.len())));
            }
            let opt = |v: &str| (v != "-").then(|| PathBuf::from(v));
            records.push(UtteranceRecord {
                corpus: cols[0].parse().map_err(|e: Error| err(e.to_string()))?,
                utt_id: cols[1].to_string(),
                speaker: SpeakerMeta::new(cols[2], cols[3].parse::<Sex>().map_err(|e| err(e.to_string()))?),
                mic_path: PathBuf::from(cols[4]),
                laryn_path: opt(cols[5]),
                provided_label_path: opt(cols[6]),
                label_format: cols[7].parse().map_err(|e: Error| err(e.to_string()))?,
                incomplete: match cols[8] {
                    "ok" => false,
                    "incomplete" => true,
                    other => return Err(err(format!("unknown status `{other}`"))),
                },
            });
        }
        Manifest::new(records)
    }

    /// Writes `<path>` (TSV) and `<path>.json` (stats sidecar).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()?)?;
        let mut json = serde_json::to_string_pretty(&self.stats())?;
        json.push('\n');
        std::fs::write(stats_path(path), json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_tsv(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

pub fn stats_path(manifest_path: &Path) -> PathBuf {
    let mut s = manifest_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn check_field(f: &str) -> Result<()> {
    if f.is_empty() || f.contains(['\t', '\n', '\r']) {
        return Err(Error::invalid(format!("manifest field `{f}` is empty or contains a tab/newline")));
    }
    Ok(())
}

fn path_field(p: Option<&Path>) -> Result<String> {
    match p {
        None => Ok("-".into()),
        Some(p) => {
            let s = p
                .to_str()
                .ok_or_else(|| Error::invalid(format!("non-UTF-8 path {}", p.display())))?
                .to_string();
            if s == "-" {
                return Err(Error::invalid("path `-` is reserved for missing entries"));
            }
            check_field(&s)?;
            Ok(s)
        }
    }
}
