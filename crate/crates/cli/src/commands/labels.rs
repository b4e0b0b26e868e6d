use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use voicing_core::corpus::UtteranceRecord;
use voicing_core::dsp::read_wav;
use voicing_core::labels::{
    align_for_lowest_vde, extract_reference_labels, format_labels, mismatch_rate, read_label_file, ErrorCounts,
    VoicingLabels, LABEL_EXTENSION,
};
use voicing_core::par;
use voicing_core::rapt::TrackerConfig;
use voicing_core::train::to_model_rate;

use super::corpus::load_manifest;
use super::{create_dir, Ctx, Status};
use crate::args::{CompareArgs, ExtractArgs};
use crate::config::write_atomic;

#[derive(Debug, Default, Serialize)]
struct CorpusSummary {
    utterances: usize,
    frames: usize,
    voiced_frames: usize,
    voiced_fraction: f64,
}

#[derive(Debug, Serialize)]
struct Skipped {
    key: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct ExtractSummary {
    corpora: BTreeMap<String, CorpusSummary>,
    skipped: Vec<Skipped>,
}

fn extract_one(r: &UtteranceRecord, tracker: &TrackerConfig, out: &Path) -> Result<VoicingLabels> {
    let path = r.laryn_path.as_ref().ok_or_else(|| anyhow!("no laryngograph recording"))?;
    let laryn = to_model_rate(&read_wav(path).with_context(|| format!("reading {}", path.display()))?)?;
    let labels = extract_reference_labels(&laryn, &r.speaker, tracker)?;
    let file = out.join(r.corpus.as_str()).join(format!("{}.{LABEL_EXTENSION}", r.utt_id));
    write_atomic(&file, format_labels(&labels))?;
    Ok(labels)
}

pub fn extract(ctx: &Ctx, a: ExtractArgs) -> Result<Status> {
    let m = load_manifest(&a.manifest, a.exclusions.as_deref())?;
    create_dir(&a.out)?;
    let results = par::map_slice(m.records(), |r| extract_one(r, &ctx.cfg.tracker, &a.out));

    let mut summary = ExtractSummary {
        corpora: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (r, res) in m.records().iter().zip(results) {
        match res {
            Ok(l) => {
                let c = summary.corpora.entry(r.corpus.to_string()).or_default();
                c.utterances += 1;
                c.frames += l.len();
                c.voiced_frames += l.voiced_count();
            }
            Err(e) => {
                log::warn!("skipping {}: {e:#}", r.key());
                summary.skipped.push(Skipped {
                    key: r.key(),
                    reason: format!("{e:#}"),
                });
            }
        }
    }
    for c in summary.corpora.values_mut() {
        c.voiced_fraction = if c.frames == 0 {
            0.0
        } else {
            c.voiced_frames as f64 / c.frames as f64
        };
    }
    ctx.cfg.echo(&a.out)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_atomic(&a.out.join("summary.json"), json)?;
    Ok(Status::partial_if(ctx.opts.strict, summary.skipped.len()))
}

/// `*.lab` files under `root`, keyed by relative path without extension.
fn label_files(root: &Path) -> Result<BTreeMap<String, PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, PathBuf>) -> Result<()> {
        for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.extension().is_some_and(|e| e == LABEL_EXTENSION) {
                let rel = path.strip_prefix(root).expect("walk stays under root").with_extension("");
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.insert(key, path);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

fn row(s: &mut String, key: &str, mode: &str, c: &ErrorCounts, shift: Option<i64>) {
    let shift = shift.map(|v| v.to_string()).unwrap_or_default();
    let _ = writeln!(s, "{key},{mode},{},{},{:.6},{shift}", c.frames, c.errors(), c.percent());
}

pub fn compare(ctx: &Ctx, a: CompareArgs) -> Result<Status> {
    let (aligned, unaligned) = ctx.opts.alignment();
    let max_shift = a.max_shift.unwrap_or(ctx.cfg.eval.max_shift);
    let left = label_files(&a.a)?;
    let right = label_files(&a.b)?;
    let common: Vec<&String> = left.keys().filter(|k| right.contains_key(*k)).collect();
    if common.is_empty() {
        bail!("no utterance ids in common between {} and {}", a.a.display(), a.b.display());
    }
    let mut skipped = left.len() + right.len() - 2 * common.len();
    if skipped > 0 {
        log::warn!("{skipped} label files have no counterpart");
    }

    let mut hop = None;
    let mut body = String::new();
    let (mut pooled_u, mut pooled_a) = (ErrorCounts::default(), ErrorCounts::default());
    for key in common {
        let x = read_label_file(&left[key])?;
        let y = read_label_file(&right[key])?;
        if x.hop_ms() != y.hop_ms() {
            bail!("{key}: hop {} ms vs {} ms", x.hop_ms(), y.hop_ms());
        }
        match hop {
            None => hop = Some(x.hop_ms()),
            Some(h) if h != x.hop_ms() => bail!("{key}: hop {} ms differs from earlier files ({h} ms)", x.hop_ms()),
            _ => {}
        }
        if unaligned {
            match mismatch_rate(&x, &y) {
                Ok(c) => {
                    pooled_u.add(&c.counts);
                    row(&mut body, key, "unaligned", &c.counts, None);
                }
                Err(e) => {
                    log::warn!("{key}: {e}");
                    skipped += 1;
                }
            }
        }
        if aligned {
            match align_for_lowest_vde(&x, &y, max_shift) {
                Ok((shift, c)) => {
                    pooled_a.add(&c.counts);
                    row(&mut body, key, "aligned", &c.counts, Some(shift));
                }
                Err(e) => {
                    log::warn!("{key}: {e}");
                    skipped += 1;
                }
            }
        }
    }
    if unaligned {
        row(&mut body, "pooled", "unaligned", &pooled_u, None);
    }
    if aligned {
        row(&mut body, "pooled", "aligned", &pooled_a, None);
    }
    let mut csv = format!("#hop_ms={}\nkey,alignment,n_frames,errors,mismatch_percent,shift\n", hop.unwrap_or_default());
    csv.push_str(&body);
    create_dir(&a.out)?;
    ctx.cfg.echo(&a.out)?;
    write_atomic(&a.out.join("compare.csv"), csv)?;
    Ok(Status::partial_if(ctx.opts.strict, skipped))
}
