use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use voicing_core::corpus::{split_train_val, FoldPlan, FoldSet, Manifest, SplitMode, UtteranceRecord};
use voicing_core::model::{load_checkpoint, save_checkpoint, DcCrn};
use voicing_core::train::{
    evaluate_cross_corpus, load_examples, pretrain_then_finetune, EvalOptions, ExampleSet, LabelSource, Method, Split,
    TrainData,
};

use super::corpus::{load_manifest, parse_corpus};
use super::{create_dir, Ctx, Status};
use crate::args::{EvalArgs, TrainArgs};
use crate::config::{usage, write_atomic};
use crate::demo::run_synthetic_demo;

fn merged_manifest(paths: &[PathBuf]) -> Result<Manifest> {
    let parts = paths.iter().map(|p| load_manifest(p, None)).collect::<Result<Vec<_>>>()?;
    Ok(Manifest::merged(&parts)?)
}

fn load_folds(path: &Path) -> Result<FoldSet> {
    FoldSet::load(path).with_context(|| format!("loading fold plan {}", path.display()))
}

/// Records of `m` whose keys are in `keys`; keys with no record are logged.
fn records_for(m: &Manifest, keys: &BTreeSet<&str>) -> (Vec<UtteranceRecord>, usize) {
    let records: Vec<UtteranceRecord> = m.records().iter().filter(|r| keys.contains(r.key().as_str())).cloned().collect();
    let missing = keys.len() - records.len();
    if missing > 0 {
        log::warn!("{missing} fold ids have no manifest record");
    }
    (records, missing)
}

fn loaded_only(ids: &[String], data: &ExampleSet) -> Vec<String> {
    ids.iter().filter(|k| data.contains(k)).cloned().collect()
}

#[derive(Debug, Serialize)]
struct FoldSummary {
    held_out: String,
    n_train: usize,
    n_val: usize,
    epochs_run: usize,
    best_epoch: usize,
    best_val_loss: f64,
    aborted: Option<String>,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    folds: Vec<FoldSummary>,
    skipped: Vec<String>,
}

fn pretraining_data(ctx: &Ctx) -> Result<(Split, ExampleSet)> {
    let cfg = &ctx.cfg;
    if cfg.pretrain_manifests.is_empty() {
        if cfg.train.pretrain_epochs > 0 {
            return Err(usage("train.pretrain_epochs > 0 needs pretrain_manifests"));
        }
        let empty = Split {
            train_ids: Vec::new(),
            val_ids: Vec::new(),
        };
        return Ok((empty, ExampleSet::default()));
    }
    let m = merged_manifest(&cfg.pretrain_manifests)?;
    let (data, failed) = load_examples(m.records(), LabelSource::MicPseudo, &cfg.tracker);
    if !failed.is_empty() {
        log::warn!("{} pretraining records skipped", failed.len());
    }
    let loaded: Vec<&UtteranceRecord> = m.records().iter().filter(|r| data.contains(&r.key())).collect();
    let (train_ids, val_ids) = split_train_val(&loaded, cfg.train.seed, 0, SplitMode::Utterance);
    Ok((Split { train_ids, val_ids }, data))
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<Status> {
    create_dir(&a.out)?;
    if a.synthetic_demo {
        ctx.cfg.echo(&a.out)?;
        let r = run_synthetic_demo(&ctx.cfg, Some(&a.out))?;
        print!("{}", r.eval.to_table());
        println!("{}", serde_json::to_string_pretty(&r.summary)?);
        return Ok(Status::Success);
    }
    let folds_path = a.folds.as_ref().ok_or_else(|| usage("train needs --folds (or --synthetic-demo)"))?;
    if a.manifests.is_empty() {
        return Err(usage("train needs at least one --manifest"));
    }
    ctx.cfg.train.validate().map_err(|e| usage(e.to_string()))?;
    let cfg = &ctx.cfg;
    let m = merged_manifest(&a.manifests)?;
    let set = load_folds(folds_path)?;
    let held_out = a.fold.as_deref().map(parse_corpus).transpose()?;
    let folds: Vec<&FoldPlan> = set.folds.iter().filter(|f| held_out.is_none_or(|c| f.held_out_corpus == c)).collect();
    if folds.is_empty() {
        return Err(usage(format!("no fold holds out {}", a.fold.unwrap_or_default())));
    }

    let keys: BTreeSet<&str> = folds.iter().flat_map(|f| f.train_ids.iter().chain(&f.val_ids)).map(String::as_str).collect();
    let (records, missing) = records_for(&m, &keys);
    let (data, failed) = load_examples(&records, cfg.label_source, &cfg.tracker);
    let mut skipped: Vec<String> = failed.iter().map(|(k, e)| format!("{k}: {e}")).collect();
    let (pre_split, pre_data) = pretraining_data(ctx)?;

    let mut summary = Vec::new();
    for fold in folds {
        let split = Split {
            train_ids: loaded_only(&fold.train_ids, &data),
            val_ids: loaded_only(&fold.val_ids, &data),
        };
        if split.train_ids.is_empty() || split.val_ids.is_empty() {
            anyhow::bail!("fold {}: no usable training or validation utterances", fold.held_out_corpus);
        }
        log::info!(
            "fold {}: {} train, {} val",
            fold.held_out_corpus,
            split.train_ids.len(),
            split.val_ids.len()
        );
        let init = DcCrn::new(cfg.model.clone(), cfg.train.seed)?;
        let out = pretrain_then_finetune(
            &cfg.model,
            init,
            TrainData {
                split: &pre_split,
                examples: &pre_data,
            },
            TrainData {
                split: &split,
                examples: &data,
            },
            &cfg.train,
        )?;
        let dir = a.out.join(fold.held_out_corpus.as_str());
        create_dir(&dir)?;
        save_checkpoint(&out.finetune.model, dir.join("model.ckpt"))?;
        write_atomic(&dir.join("history.csv"), out.finetune.history.to_csv())?;
        if let Some(h) = &out.pretrain {
            write_atomic(&dir.join("pretrain_history.csv"), h.to_csv())?;
        }
        let h = &out.finetune.history;
        if let Some(reason) = &h.aborted {
            log::error!("fold {} aborted: {reason}", fold.held_out_corpus);
            skipped.push(format!("fold {} aborted: {reason}", fold.held_out_corpus));
        }
        summary.push(FoldSummary {
            held_out: fold.held_out_corpus.to_string(),
            n_train: split.train_ids.len(),
            n_val: split.val_ids.len(),
            epochs_run: h.epochs.len(),
            best_epoch: h.best_epoch,
            best_val_loss: h.best_val_loss(),
            aborted: h.aborted.clone(),
        });
    }
    cfg.echo(&a.out)?;
    let n_skipped = skipped.len() + missing;
    let mut json = serde_json::to_string_pretty(&TrainSummary { folds: summary, skipped })?;
    json.push('\n');
    write_atomic(&a.out.join("train_summary.json"), json)?;
    Ok(Status::partial_if(ctx.opts.strict, n_skipped))
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<Status> {
    let cfg = &ctx.cfg;
    let methods = a
        .methods
        .iter()
        .map(|s| s.trim().parse::<Method>().map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if methods.contains(&Method::Dccrn) && a.checkpoints.is_none() {
        return Err(usage("method dccrn needs --checkpoints"));
    }
    let (aligned, unaligned) = ctx.opts.alignment();
    let m = merged_manifest(&a.manifests)?;
    let set = load_folds(&a.folds)?;

    let keys: BTreeSet<&str> = set.folds.iter().flat_map(|f| &f.test_ids).map(String::as_str).collect();
    let (records, missing) = records_for(&m, &keys);
    let (data, failed) = load_examples(&records, cfg.label_source, &cfg.tracker);
    let mut n_skipped = failed.len() + missing;

    let mut folds = Vec::new();
    for f in &set.folds {
        let test_ids = loaded_only(&f.test_ids, &data);
        if test_ids.is_empty() {
            log::warn!("fold {}: no test utterances loaded", f.held_out_corpus);
            n_skipped += 1;
            continue;
        }
        folds.push(FoldPlan { test_ids, ..f.clone() });
    }

    let mut models = BTreeMap::new();
    if let (true, Some(dir)) = (methods.contains(&Method::Dccrn), &a.checkpoints) {
        for f in &folds {
            let path = dir.join(f.held_out_corpus.as_str()).join("model.ckpt");
            if path.is_file() {
                let model = load_checkpoint(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
                models.insert(f.held_out_corpus, model);
            } else {
                log::warn!("no checkpoint at {}", path.display());
            }
        }
    }
    let opts = EvalOptions {
        aligned,
        unaligned,
        max_shift: cfg.eval.max_shift,
        tracker: cfg.tracker.clone(),
    };
    let report = evaluate_cross_corpus(&folds, &methods, &data, &models, &opts)?;
    for s in &report.skipped {
        log::warn!("{s}");
    }
    n_skipped += report.skipped.len();

    create_dir(&a.out)?;
    cfg.echo(&a.out)?;
    write_atomic(&a.out.join("eval.csv"), report.to_csv())?;
    write_atomic(&a.out.join("eval.txt"), report.to_table())?;
    write_atomic(&a.out.join("decisions_long.csv"), report.to_long_csv())?;
    print!("{}", report.to_table());
    Ok(Status::partial_if(ctx.opts.strict, n_skipped))
}
