use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FoldPlan};
use crate::error::{Error, Result};
use crate::labels::{align_for_lowest_vde, mismatch_rate, shift_order, ErrorCounts, VoicingLabels, DEFAULT_MAX_SHIFT};
use crate::model::{decide_voicing, DcCrn};
use crate::par;
use crate::rapt::{track_voicing, TrackerConfig};

use super::data::{Example, ExampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dccrn,
    /// NCCF tracker on the microphone signal.
    Rapt,
    /// The reference labels themselves.
    Reference,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dccrn => "dccrn",
            Method::Rapt => "rapt",
            Method::Reference => "reference",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dccrn" => Ok(Method::Dccrn),
            "rapt" => Ok(Method::Rapt),
            "reference" => Ok(Method::Reference),
            _ => Err(Error::invalid(format!("unknown method `{s}` (dccrn, rapt, reference)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub aligned: bool,
    pub unaligned: bool,
    pub max_shift: usize,
    pub tracker: TrackerConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            aligned: true,
            unaligned: true,
            max_shift: DEFAULT_MAX_SHIFT,
            tracker: TrackerConfig::default(),
        }
    }
}

/// One line of the cross-corpus table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Training corpora joined with `+`.
    pub train_set: String,
    pub test_set: String,
    /// Method name, with an `_aligned` suffix for realigned rows.
    pub method: String,
    /// Pooled over all scored test frames.
    pub vde_percent: f64,
    pub n_frames: usize,
    /// Shift of aligned rows (the most frequent per-utterance shift); 0 otherwise.
    pub shift: i64,
    /// Mean of per-utterance VDEs.
    pub macro_vde_percent: f64,
    pub n_utterances: usize,
}

/// Decoded labels of one test utterance, for decision-strip plots.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceDecision {
    pub test_set: String,
    pub key: String,
    pub method: Method,
    pub reference: VoicingLabels,
    pub estimate: VoicingLabels,
    pub posterior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub decisions: Vec<UtteranceDecision>,
    /// Rows that could not be produced, with the reason.
    pub skipped: Vec<String>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("train_set,test_set,method,vde_percent,n_frames,shift\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.4},{},{}",
                r.train_set, r.test_set, r.method, r.vde_percent, r.n_frames, r.shift
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let head = ["training set", "test set", "method", "VDE (%)", "macro (%)", "frames", "shift"];
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.train_set.clone(),
                    r.test_set.clone(),
                    r.method.clone(),
                    format!("{:.2}", r.vde_percent),
                    format!("{:.2}", r.macro_vde_percent),
                    r.n_frames.to_string(),
                    r.shift.to_string(),
                ]
            })
            .collect();
        let mut width: Vec<usize> = head.iter().map(|h| h.len()).collect();
        for row in &cells {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |vals: Vec<&str>| {
            let mut l = vals
                .iter()
                .zip(&width)
                .map(|(v, w)| format!("{v:<w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            l.truncate(l.trim_end().len());
            l + "\n"
        };
        let mut s = line(head.to_vec());
        s += &line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|x| x.as_str()).collect());
        for row in &cells {
            s += &line(row.iter().map(|c| c.as_str()).collect());
        }
        s
    }

    /// One line per frame: `test_set,utt_key,method,frame,reference,estimate,posterior`.
    pub fn to_long_csv(&self) -> String {
        let mut s = String::from("test_set,utt_key,method,frame,reference,estimate,posterior\n");
        for d in &self.decisions {
            for t in 0..d.estimate.len().min(d.reference.len()) {
                let reference = if d.reference.is_excluded(t) {
                    "x".to_string()
                } else {
                    d.reference.labels()[t].to_string()
                };
                let post = d.posterior.as_ref().map(|p| format!("{:.6}", p[t])).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{t},{reference},{},{post}",
                    d.test_set,
                    d.key,
                    d.method,
                    d.estimate.labels()[t]
                );
            }
        }
        s
    }
}

fn corpus_of(key: &str) -> Option<Corpus> {
    key.split_once(':').and_then(|(c, _)| c.parse().ok())
}

/// Training corpora of a fold in canonical order.
pub fn train_set_name(fold: &FoldPlan) -> String {
    let present: Vec<Corpus> = fold.train_ids.iter().chain(&fold.val_ids).filter_map(|k| corpus_of(k)).collect();
    Corpus::ALL
        .iter()
        .filter(|c| present.contains(c))
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

fn decode(method: Method, ex: &Example, model: Option<&DcCrn>, tracker: &TrackerConfig) -> Result<(VoicingLabels, Option<Vec<f64>>)> {
    match method {
        Method::Reference => Ok((ex.labels.clone(), None)),
        Method::Rapt => {
            let mic = ex
                .mic
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("{}: microphone signal not loaded", ex.key)))?;
            Ok((track_voicing(mic, tracker)?, None))
        }
        Method::Dccrn => {
            let model = model.ok_or_else(|| Error::invalid("no model"))?;
            let p = model.predict(&ex.features)?;
            let labels = decide_voicing(&p, model.config().threshold)?;
            Ok((labels, Some(p.probs().to_vec())))
        }
    }
}

struct Scored {
    counts: ErrorCounts,
    shift: i64,
}

fn row(fold: &FoldPlan, method: String, scored: &[Scored], shift: i64) -> EvalRow {
    let mut pooled = ErrorCounts::default();
    let mut macro_sum = 0.0;
    for s in scored {
        pooled.add(&s.counts);
        macro_sum += s.counts.percent();
    }
    EvalRow {
        train_set: train_set_name(fold),
        test_set: fold.held_out_corpus.to_string(),
        method,
        vde_percent: pooled.percent(),
        n_frames: pooled.frames,
        shift,
        macro_vde_percent: if scored.is_empty() { 0.0 } else { macro_sum / scored.len() as f64 },
        n_utterances: scored.len(),
    }
}

fn most_frequent_shift(scored: &[Scored], max_shift: usize) -> i64 {
    let mut freq: BTreeMap<i64, usize> = BTreeMap::new();
    for s in scored {
        *freq.entry(s.shift).or_default() += 1;
    }
    let mut best = (0, 0usize);
    for shift in shift_order(max_shift) {
        let n = freq.get(&shift).copied().unwrap_or(0);
        if n > best.1 {
            best = (shift, n);
        }
    }
    best.0
}

/// Per fold and method: decode the held-out corpus, score against the
/// references with and without per-utterance realignment, and pool the
/// frame counts. DC-CRN rows need a model for the held-out corpus; folds
/// without one are skipped with a note.
pub fn evaluate_cross_corpus(
    folds: &[FoldPlan],
    methods: &[Method],
    data: &ExampleSet,
    models: &BTreeMap<Corpus, DcCrn>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for fold in folds {
        let test = data.resolve(&fold.test_ids)?;
        for &method in methods {
            let model = models.get(&fold.held_out_corpus);
            if method == Method::Dccrn && model.is_none() {
                let msg = format!("{}: no dccrn checkpoint, rows skipped", fold.held_out_corpus);
                log::warn!("{msg}");
                report.skipped.push(msg);
                continue;
            }
            let decoded = par::map_slice(&test, |ex| decode(method, ex, model, &opts.tracker));
            let mut plain = Vec::with_capacity(test.len());
            let mut aligned = Vec::with_capacity(test.len());
            for (ex, dec) in test.iter().zip(decoded) {
                let (est, posterior) = dec?;
                let base = mismatch_rate(&est, &ex.labels)?;
                plain.push(Scored {
                    counts: base.counts,
                    shift: 0,
                });
                if opts.aligned {
                    // too short to realign: keep the unshifted score
                    let (shift, c) = align_for_lowest_vde(&est, &ex.labels, opts.max_shift).unwrap_or((0, base));
                    aligned.push(Scored { counts: c.counts, shift });
                }
                report.decisions.push(UtteranceDecision {
                    test_set: fold.held_out_corpus.to_string(),
                    key: ex.key.clone(),
                    method,
                    reference: ex.labels.clone(),
                    estimate: est,
                    posterior,
                });
            }
            if opts.unaligned {
                report.rows.push(row(fold, method.to_string(), &plain, 0));
            }
            if opts.aligned {
                let shift = most_frequent_shift(&aligned, opts.max_shift);
                report.rows.push(row(fold, format!("{method}_aligned"), &aligned, shift));
            }
        }
    }
    Ok(report)
}
