//! End-to-end run on generated data: laryngograph-tracker labels for
//! training, ground truth for testing, and a microphone-only corpus with
//! tracker pseudo-labels for pretraining.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use voicing_core::corpus::{synthesize_corpus, utterance_key, val_count, Corpus, FoldPlan, SynthConfig, SyntheticUtterance};
use voicing_core::labels::{extract_reference_labels, pseudo_labels_from_mic};
use voicing_core::model::{save_checkpoint, DcCrn, ModelConfig};
use voicing_core::par;
use voicing_core::train::{
    evaluate_cross_corpus, mean_loss, pretrain_then_finetune, train, EvalOptions, EvalReport, Example, ExampleSet, Method,
    Split, TrainConfig, TrainData, TrainHistory,
};

use crate::config::{write_atomic, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub seed: u64,
    /// Laryngograph corpus size, test utterances included.
    pub n_utterances: usize,
    pub n_test: usize,
    /// Microphone-only pretraining corpus size.
    pub n_pretrain: usize,
    pub duration_secs: f64,
    pub model: ModelConfig,
    /// Epochs for the run from random initialization.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_utterances: 180,
            n_test: 20,
            n_pretrain: 40,
            duration_secs: 3.0,
            model: ModelConfig::reduced(),
            epochs: 3,
            pretrain_epochs: 2,
            finetune_epochs: 1,
        }
    }
}

/// Numbers written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub epochs_run: usize,
    pub random_init_val_loss: f64,
    pub finetune_initial_val_loss: f64,
    pub dccrn_test_vde: f64,
    pub dccrn_pretrained_test_vde: f64,
    pub rapt_test_vde: f64,
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub summary: DemoSummary,
    pub scratch: TrainHistory,
    pub pretrain: Option<TrainHistory>,
    pub finetune: TrainHistory,
    pub eval: EvalReport,
    pub scratch_model: DcCrn,
    pub finetuned_model: DcCrn,
}

fn examples<F>(utts: &[SyntheticUtterance], corpus: Corpus, label: F) -> Result<ExampleSet>
where
    F: Fn(&SyntheticUtterance) -> voicing_core::Result<voicing_core::labels::VoicingLabels> + Sync + Send,
{
    par::map_slice(utts, |u| -> Result<Example> {
        Ok(Example::from_waveform(utterance_key(corpus, &u.utt_id), &u.mic, label(u)?)?)
    })
    .into_iter()
    .collect()
}

fn unaligned_vde(report: &EvalReport, method: &str) -> f64 {
    report.rows.iter().find(|r| r.method == method).map_or(f64::NAN, |r| r.vde_percent)
}

/// Generates both corpora, trains from random initialization and through
/// pretraining, and evaluates both models and the tracker on the held-out
/// utterances. Writes artifacts under `out` when given.
pub fn run_synthetic_demo(cfg: &RunConfig, out: Option<&Path>) -> Result<DemoReport> {
    let d = &cfg.demo;
    anyhow::ensure!(
        d.n_test > 0 && d.n_utterances >= d.n_test + 2,
        "demo needs at least two training utterances beyond the test set"
    );
    let started = Instant::now();
    let synth = SynthConfig {
        n_utterances: d.n_utterances,
        duration_secs: d.duration_secs,
        seed: d.seed,
        ..cfg.synth.clone()
    };
    let corpus = synthesize_corpus(&synth)?;
    let pre_corpus = synthesize_corpus(&SynthConfig {
        n_utterances: d.n_pretrain,
        seed: d.seed.wrapping_add(1),
        ..synth.clone()
    })?;
    let (pool, test_utts) = corpus.split_at(d.n_utterances - d.n_test);

    let tracker = &cfg.tracker;
    let data = examples(pool, Corpus::Synthetic, |u| extract_reference_labels(&u.laryn, &u.speaker, tracker))?;
    let test = examples(test_utts, Corpus::Synthetic, |u| Ok(u.truth.clone()))?;
    let pre = examples(&pre_corpus, Corpus::LibriSpeech, |u| pseudo_labels_from_mic(&u.mic, tracker))?;
    log::info!("demo data ready in {:.1}s", started.elapsed().as_secs_f64());

    let keys = |set: &ExampleSet| set.keys().cloned().collect::<Vec<_>>();
    let split_of = |k: Vec<String>| {
        let n_val = val_count(k.len());
        Split {
            train_ids: k[..k.len() - n_val].to_vec(),
            val_ids: k[k.len() - n_val..].to_vec(),
        }
    };
    let split = split_of(keys(&data));
    let pre_split = split_of(keys(&pre));

    let init = DcCrn::new(d.model.clone(), d.seed)?;
    let random_init_val_loss = mean_loss(&init, &data.resolve(&split.val_ids)?)?;
    let scratch_cfg = TrainConfig {
        max_epochs: d.epochs,
        pretrain_epochs: 0,
        ..cfg.train.clone()
    };
    let scratch = train(init.clone(), &split, &data, &scratch_cfg)?;
    log::info!("random-init training done at {:.1}s", started.elapsed().as_secs_f64());

    let ft_cfg = TrainConfig {
        max_epochs: d.finetune_epochs,
        pretrain_epochs: d.pretrain_epochs,
        ..cfg.train.clone()
    };
    let ft = pretrain_then_finetune(
        &d.model,
        init,
        TrainData {
            split: &pre_split,
            examples: &pre,
        },
        TrainData {
            split: &split,
            examples: &data,
        },
        &ft_cfg,
    )?;
    log::info!("pretrain + finetune done at {:.1}s", started.elapsed().as_secs_f64());

    let fold = FoldPlan {
        held_out_corpus: Corpus::Synthetic,
        train_ids: split.train_ids.clone(),
        val_ids: split.val_ids.clone(),
        test_ids: keys(&test),
    };
    let opts = EvalOptions {
        max_shift: cfg.eval.max_shift,
        tracker: tracker.clone(),
        ..EvalOptions::default()
    };
    let folds = [fold];
    let mut models = BTreeMap::from([(Corpus::Synthetic, scratch.model.clone())]);
    let mut eval = evaluate_cross_corpus(&folds, &[Method::Rapt, Method::Dccrn], &test, &models, &opts)?;
    models.insert(Corpus::Synthetic, ft.finetune.model.clone());
    let tuned = evaluate_cross_corpus(&folds, &[Method::Dccrn], &test, &models, &opts)?;
    for mut row in tuned.rows {
        row.method = row.method.replacen("dccrn", "dccrn_pretrained", 1);
        eval.rows.push(row);
    }

    let summary = DemoSummary {
        n_train: split.train_ids.len(),
        n_val: split.val_ids.len(),
        n_test: test.len(),
        epochs_run: scratch.history.epochs.len(),
        random_init_val_loss,
        finetune_initial_val_loss: ft.finetune.history.initial_val_loss,
        dccrn_test_vde: unaligned_vde(&eval, "dccrn"),
        dccrn_pretrained_test_vde: unaligned_vde(&eval, "dccrn_pretrained"),
        rapt_test_vde: unaligned_vde(&eval, "rapt"),
    };
    log::info!("demo finished in {:.1}s", started.elapsed().as_secs_f64());

    let report = DemoReport {
        summary,
        scratch: scratch.history,
        pretrain: ft.pretrain,
        finetune: ft.finetune.history,
        eval,
        scratch_model: scratch.model,
        finetuned_model: ft.finetune.model,
    };
    if let Some(out) = out {
        write_outputs(&report, out)?;
    }
    Ok(report)
}

fn write_outputs(r: &DemoReport, out: &Path) -> Result<()> {
    for sub in ["scratch", "pretrain", "finetune"] {
        std::fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.display()))?;
    }
    write_atomic(&out.join("scratch/history.csv"), r.scratch.to_csv())?;
    save_checkpoint(&r.scratch_model, out.join("scratch/model.ckpt"))?;
    if let Some(h) = &r.pretrain {
        write_atomic(&out.join("pretrain/history.csv"), h.to_csv())?;
    }
    write_atomic(&out.join("finetune/history.csv"), r.finetune.to_csv())?;
    save_checkpoint(&r.finetuned_model, out.join("finetune/model.ckpt"))?;
    write_atomic(&out.join("eval.csv"), r.eval.to_csv())?;
    write_atomic(&out.join("eval.txt"), r.eval.to_table())?;
    write_atomic(&out.join("decisions_long.csv"), r.eval.to_long_csv())?;
    let mut s = serde_json::to_string_pretty(&r.summary)?;
    s.push('\n');
    write_atomic(&out.join("summary.json"), s)
}
