use anyhow::{Context, Result};
use voicing_core::corpus::{
    apply_exclusions, make_locro_folds, scan_corpus_with, synthesize_corpus, write_synthetic_corpus, Corpus, ExclusionList,
    LayoutAdapter, Manifest, SplitMode,
};

use super::{create_dir, Ctx, Status};
use crate::args::{FoldsArgs, Layout, ScanArgs, SplitArg, SynthArgs};
use crate::config::usage;

pub fn synth(ctx: &Ctx, a: SynthArgs) -> Result<Status> {
    let mut cfg = ctx.cfg.clone();
    if let Some(n) = a.n {
        cfg.synth.n_utterances = n;
    }
    if let Some(d) = a.duration {
        cfg.synth.duration_secs = d;
    }
    cfg.synth.validate().map_err(|e| usage(e.to_string()))?;
    create_dir(&a.out)?;
    let utts = synthesize_corpus(&cfg.synth)?;
    write_synthetic_corpus(&a.out, &utts)?;
    let manifest = scan_corpus_with(&a.out, Corpus::Synthetic, LayoutAdapter::Paired)?;
    manifest.save(a.out.join("manifest.tsv"))?;
    cfg.echo(&a.out)?;
    log::info!("wrote {} utterances to {}", utts.len(), a.out.display());
    Ok(Status::Success)
}

pub(crate) fn parse_corpus(s: &str) -> Result<Corpus> {
    s.parse::<Corpus>().map_err(|e| usage(e.to_string()))
}

pub(crate) fn load_manifest(path: &std::path::Path, exclusions: Option<&std::path::Path>) -> Result<Manifest> {
    let m = Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    let Some(x) = exclusions else {
        return Ok(m);
    };
    let list = ExclusionList::load(x).with_context(|| format!("loading exclusion list {}", x.display()))?;
    let (m, summary) = apply_exclusions(&m, &list)?;
    log::info!(
        "exclusions: {} removed, {} corrected, {} unmatched",
        summary.removed,
        summary.corrected,
        summary.unmatched.len()
    );
    Ok(m)
}

pub fn scan(_ctx: &Ctx, a: ScanArgs) -> Result<Status> {
    let corpus = parse_corpus(&a.corpus)?;
    let adapter = match a.layout {
        Some(Layout::Paired) => LayoutAdapter::Paired,
        Some(Layout::PtdbTug) => LayoutAdapter::PtdbTug,
        None => LayoutAdapter::for_corpus(corpus),
    };
    let mut m = scan_corpus_with(&a.root, corpus, adapter)?;
    if let Some(x) = &a.exclusions {
        let list = ExclusionList::load(x).with_context(|| format!("loading exclusion list {}", x.display()))?;
        m = apply_exclusions(&m, &list)?.0;
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    m.save(&a.out)?;
    log::info!("{} records written to {}", m.len(), a.out.display());
    Ok(Status::Success)
}

pub fn folds(ctx: &Ctx, a: FoldsArgs) -> Result<Status> {
    let manifests = a
        .manifests
        .iter()
        .map(|p| load_manifest(p, None))
        .collect::<Result<Vec<_>>>()?;
    let mode = match a.split {
        SplitArg::Utterance => SplitMode::Utterance,
        SplitArg::Speaker => SplitMode::Speaker,
    };
    let set = make_locro_folds(&manifests, ctx.cfg.train.seed, mode)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    set.save(&a.out)?;
    for f in &set.folds {
        log::info!(
            "fold {}: {} train, {} val, {} test",
            f.held_out_corpus,
            f.train_ids.len(),
            f.val_ids.len(),
            f.test_ids.len()
        );
    }
    Ok(Status::Success)
}
