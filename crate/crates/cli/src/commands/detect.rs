use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use voicing_core::dsp::{extract_features, read_wav, FrameConfig};
use voicing_core::labels::{format_labels, LABEL_EXTENSION};
use voicing_core::model::{decide_voicing, load_checkpoint, DcCrn};
use voicing_core::par;
use voicing_core::rapt::track_voicing;
use voicing_core::train::{to_model_rate, MODEL_RATE};

use super::{create_dir, Ctx, Status};
use crate::args::{DetectArgs, DetectMethod};
use crate::config::{usage, write_atomic, RunConfig};

const THRESHOLD: f64 = 0.5;

fn posterior_csv(p: &[f64]) -> String {
    let mut s = String::from("frame,posterior\n");
    for (t, v) in p.iter().enumerate() {
        let _ = writeln!(s, "{t},{v}");
    }
    s
}

fn detect_one(path: &Path, model: Option<&DcCrn>, ctx: &Ctx, out: &Path) -> Result<()> {
    let wave = to_model_rate(&read_wav(path).with_context(|| format!("reading {}", path.display()))?)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let labels = match model {
        None => track_voicing(&wave, &ctx.cfg.tracker)?,
        Some(m) => {
            let feat = extract_features(&wave, &FrameConfig::for_rate(MODEL_RATE))?;
            let p = m.predict(&feat)?;
            if ctx.opts.posteriors {
                write_atomic(&out.join(format!("{stem}.posteriors.csv")), posterior_csv(p.probs()))?;
            }
            decide_voicing(&p, THRESHOLD)?
        }
    };
    write_atomic(&out.join(format!("{stem}.{LABEL_EXTENSION}")), format_labels(&labels))
}

/// The model section of an explicit `--config` must match the checkpoint.
fn check_model_config(ctx: &Ctx, model: &DcCrn) -> Result<()> {
    let Some(path) = &ctx.opts.config else {
        return Ok(());
    };
    if RunConfig::file_sections(path)?.iter().any(|s| s == "model") && ctx.cfg.model != *model.config() {
        bail!("checkpoint config does not match the model section of {}", path.display());
    }
    Ok(())
}

pub fn detect(ctx: &Ctx, a: DetectArgs) -> Result<Status> {
    for p in &a.inputs {
        if !p.is_file() {
            return Err(usage(format!("input file not found: {}", p.display())));
        }
    }
    let mut stems: Vec<_> = a.inputs.iter().map(|p| p.file_stem()).collect();
    stems.sort();
    if stems.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage("inputs share a file stem; outputs would collide"));
    }
    let model = match (a.method, &a.checkpoint) {
        (DetectMethod::Rapt, None) => None,
        (DetectMethod::Rapt, Some(_)) => return Err(usage("--checkpoint only applies to --method dccrn")),
        (DetectMethod::Dccrn, None) => return Err(usage("--method dccrn needs --checkpoint")),
        (DetectMethod::Dccrn, Some(c)) => {
            let m = load_checkpoint(c).with_context(|| format!("loading checkpoint {}", c.display()))?;
            check_model_config(ctx, &m)?;
            Some(m)
        }
    };
    if model.is_none() && ctx.opts.posteriors {
        log::warn!("--posteriors ignored: the tracker has no posteriors");
    }
    create_dir(&a.out)?;
    let results = par::map_slice(&a.inputs, |p| detect_one(p, model.as_ref(), ctx, &a.out));
    let mut failed = 0;
    for (p, r) in a.inputs.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {e:#}", p.display());
            failed += 1;
        }
    }
    ctx.cfg.echo(&a.out)?;
    if failed == a.inputs.len() {
        bail!("detection failed for every input");
    }
    Ok(if failed > 0 { Status::Partial } else { Status::Success })
}
