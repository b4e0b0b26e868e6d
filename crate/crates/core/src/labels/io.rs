//! Label files.
//!
//! Standard format, one line per frame after a `#hop_ms=<n>` header:
//!
//! ```text
//! #hop_ms=10
//! 0	0	0
//! 1	1	123.5
//! ```
//!
//! Columns are frame index, label (0/1) and F0 in Hz (0 when unvoiced).
//! Labels with excluded frames carry one extra `#excluded=<i>,<j>,...` line
//! after the header. Native corpus formats are read through [`LabelFormat`].

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{VoicingLabels, DEFAULT_HOP_MS};

pub const LABEL_EXTENSION: &str = "lab";

pub fn format_labels(labels: &VoicingLabels) -> String {
    let mut s = String::with_capacity(labels.len() * 12 + 16);
    let _ = writeln!(s, "#hop_ms={}", labels.hop_ms());
    if let Some(ex) = labels.excluded() {
        let idx: Vec<String> = ex.iter().enumerate().filter(|(_, &e)| e).map(|(i, _)| i.to_string()).collect();
        let _ = writeln!(s, "#excluded={}", idx.join(","));
    }
    for t in 0..labels.len() {
        let f0 = labels.f0().map_or(0.0, |f| f[t]);
        let _ = writeln!(s, "{t}\t{}\t{f0}", labels.labels()[t]);
    }
    s
}

pub fn parse_labels(text: &str, source: &str) -> Result<VoicingLabels> {
    let mut lines = text.lines().enumerate().peekable();
    let hop_ms = match lines.next() {
        Some((_, l)) => l
            .strip_prefix("#hop_ms=")
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::format(source, 1, "expected `#hop_ms=<int>` header"))?,
        None => return Err(Error::format(source, 1, "empty label file")),
    };
    let mut excluded_idx = Vec::new();
    if let Some((i, l)) = lines.peek() {
        if let Some(rest) = l.strip_prefix("#excluded=") {
            let line = i + 1;
            for tok in rest.split(',').filter(|t| !t.is_empty()) {
                excluded_idx.push(
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::format(source, line, format!("bad excluded index: {e}")))?,
                );
            }
            lines.next();
        }
    }
    let mut labels = Vec::new();
    let mut f0 = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |m: String| Error::format(source, i + 1, m);
        let mut cols = line.split('\t');
        let (Some(idx), Some(lab), Some(f), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(err(format!("expected 3 tab-separated columns: `{line}`")));
        };
        let idx: usize = idx.parse().map_err(|e| err(format!("frame index: {e}")))?;
        if idx != labels.len() {
            return Err(err(format!("frame index {idx}, expected {}", labels.len())));
        }
        let lab: u8 = match lab {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, got `{other}`"))),
        };
        let fv: f64 = f.parse().map_err(|e| err(format!("f0: {e}")))?;
        labels.push(lab);
        f0.push(fv);
    }
    let mut excluded = vec![false; labels.len()];
    for &i in &excluded_idx {
        *excluded
            .get_mut(i)
            .ok_or_else(|| Error::format(source, 2, format!("excluded index {i} out of range")))? = true;
    }
    let mut out = VoicingLabels::new(labels)?;
    // an all-zero column is how labels without F0 are written
    if f0.iter().any(|&f| f != 0.0) {
        out = out.with_f0(f0).map_err(|e| Error::format(source, 0, e.to_string()))?;
    }
    out.with_excluded(excluded)
        .map(|l| l.with_hop_ms(hop_ms))
}

pub fn write_label_file(path: impl AsRef<Path>, labels: &VoicingLabels) -> Result<()> {
    std::fs::write(path, format_labels(labels))?;
    Ok(())
}

pub fn read_label_file(path: impl AsRef<Path>) -> Result<VoicingLabels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_labels(&text, &path.display().to_string())
}

/// On-disk label layouts understood by the readers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelFormat {
    /// The tab-separated format written by this crate.
    #[default]
    Standard,
    /// One value per line: F0 > 0 voiced, 0 unvoiced, negative uncertain
    /// (uncertain frames are excluded from comparisons).
    F0PerLine,
    /// Whitespace columns `f0 voicing ...` as in PTDB-TUG reference files.
    PtdbF0,
}

impl LabelFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelFormat::Standard => "standard",
            LabelFormat::F0PerLine => "f0-per-line",
            LabelFormat::PtdbF0 => "ptdb-f0",
        }
    }
}

impl FromStr for LabelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(LabelFormat::Standard),
            "f0-per-line" => Ok(LabelFormat::F0PerLine),
            "ptdb-f0" => Ok(LabelFormat::PtdbF0),
            other => Err(Error::invalid(format!("unknown label format `{other}`"))),
        }
    }
}

/// Reads labels in any supported format. Native formats are assumed to use
/// a 10 ms hop.
pub fn read_labels(path: impl AsRef<Path>, format: LabelFormat) -> Result<VoicingLabels> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let source = path.display().to_string();
    match format {
        LabelFormat::Standard => parse_labels(&text, &source),
        LabelFormat::F0PerLine => parse_native(&text, &source, |cols| {
            let f: f64 = cols[0].parse().map_err(|e| format!("{e}"))?;
            Ok(if f < 0.0 { None } else { Some(f) })
        }),
        LabelFormat::PtdbF0 => parse_native(&text, &source, |cols| {
            if cols.len() < 2 {
                return Err("expected at least two columns".into());
            }
            let f: f64 = cols[0].parse().map_err(|e| format!("{e}"))?;
            let v: f64 = cols[1].parse().map_err(|e| format!("{e}"))?;
            Ok(Some(if v > 0.5 { f.max(f64::MIN_POSITIVE) } else { 0.0 }))
        }),
    }
}

/// `frame` returns `Some(f0)` (0 = unvoiced) or `None` for an uncertain frame.
fn parse_native(
    text: &str,
    source: &str,
    frame: impl Fn(&[&str]) -> std::result::Result<Option<f64>, String>,
) -> Result<VoicingLabels> {
    let mut labels = Vec::new();
    let mut f0 = Vec::new();
    let mut excluded = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() || cols[0].starts_with('#') {
            continue;
        }
        match frame(&cols).map_err(|m| Error::format(source, i + 1, m))? {
            Some(f) => {
                labels.push((f > 0.0) as u8);
                f0.push(f);
                excluded.push(false);
            }
            None => {
                labels.push(0);
                f0.push(0.0);
                excluded.push(true);
            }
        }
    }
    Ok(VoicingLabels::new(labels)?
        .with_f0(f0)?
        .with_excluded(excluded)?
        .with_hop_ms(DEFAULT_HOP_MS))
}
