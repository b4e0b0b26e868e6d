use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::FoldPlan;
use crate::error::{Error, Result};
use crate::model::{bce_loss, DcCrn, Mode, ModelConfig};
use crate::par;

use super::config::TrainConfig;
use super::data::{Example, ExampleSet};
use super::optim::{adam_step, clip_gradients, AdamState, PlateauScheduler};

/// Training and validation utterance keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

impl From<&FoldPlan> for Split {
    fn from(f: &FoldPlan) -> Self {
        Self {
            train_ids: f.train_ids.clone(),
            val_ids: f.val_ids.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate used during the epoch.
    pub lr: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Validation loss of the starting parameters.
    pub initial_val_loss: f64,
    pub initial_lr: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the starting ones.
    pub best_epoch: usize,
    /// Set when training stopped on a non-finite loss or gradient.
    pub aborted: Option<String>,
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,lr`; row 0 holds the starting validation loss.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr\n");
        let _ = writeln!(s, "0,,{},{}", self.initial_val_loss, self.initial_lr);
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.lr);
        }
        s
    }

    /// Equality of everything except wall-clock times.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        let strip = |h: &TrainHistory| {
            let mut h = h.clone();
            h.epochs.iter_mut().for_each(|e| e.wall_time_secs = 0.0);
            h
        };
        strip(self) == strip(other)
    }

    pub fn best_val_loss(&self) -> f64 {
        match self.best_epoch {
            0 => self.initial_val_loss,
            e => self.epochs[e - 1].val_loss,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DcCrn,
    pub history: TrainHistory,
}

/// Mean BCE over `examples` with running batch-norm statistics.
pub fn mean_loss(model: &DcCrn, examples: &[&Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("no utterances to score"));
    }
    let losses = par::map_slice(examples, |ex| -> Result<f64> {
        let (p, _) = model.forward(&ex.features, Mode::Inference)?;
        Ok(bce_loss(&ex.labels, &p)?.0)
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / examples.len() as f64)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Seeded shuffle → per batch forward/BCE/backward/clip/Adam → validation
/// loss → plateau schedule. Returns the lowest-validation-loss parameters.
pub fn train(model: DcCrn, split: &Split, data: &ExampleSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if split.train_ids.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if split.val_ids.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    let train_set = data.resolve(&split.train_ids)?;
    let val_set = data.resolve(&split.val_ids)?;

    let mut model = model;
    let mut adam = AdamState::new(model.params());
    let mut sched = PlateauScheduler::new(cfg.lr_init, cfg.lr_factor, cfg.plateau_patience, cfg.plateau_min_delta);
    let initial = mean_loss(&model, &val_set)?;
    let mut history = TrainHistory {
        initial_val_loss: initial,
        initial_lr: cfg.lr_init,
        epochs: Vec::new(),
        best_epoch: 0,
        aborted: None,
    };
    let mut best = (initial, model.clone());
    log::info!("initial val loss {initial:.5}");

    'epochs: for epoch in 1..=cfg.max_epochs {
        let lr = sched.lr();
        let hp = cfg.adam(lr);
        let started = Instant::now();
        let mut order = train_set.clone();
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = model.params().zero_grads();
            let mut batch_loss = 0.0;
            for ex in batch {
                let (p, cache) = model.forward(&ex.features, Mode::Train)?;
                let (loss, gp) = bce_loss(&ex.labels, &p)?;
                let g = model.backward(&cache, &gp)?;
                model.update_bn_running(&cache);
                acc.add_assign(&g);
                batch_loss += loss;
            }
            if batch.len() > 1 {
                acc.scale(1.0 / batch.len() as f64);
            }
            if !batch_loss.is_finite() || !acc.all_finite() {
                let msg = format!("non-finite loss or gradient in epoch {epoch}");
                log::error!("{msg}; keeping the best parameters so far");
                history.aborted = Some(msg);
                break 'epochs;
            }
            loss_sum += batch_loss;
            clip_gradients(&mut acc, cfg.clip_max_norm, cfg.clip_mode);
            adam_step(model.params_mut(), &acc, &mut adam, &hp)?;
        }
        let val = mean_loss(&model, &val_set)?;
        if !val.is_finite() {
            let msg = format!("non-finite validation loss in epoch {epoch}");
            log::error!("{msg}; keeping the best parameters so far");
            history.aborted = Some(msg);
            break;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss: val,
            lr,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {:.5} val {:.5} lr {:e} ({:.1}s)",
            rec.train_loss,
            rec.val_loss,
            lr,
            rec.wall_time_secs
        );
        history.epochs.push(rec);
        if val < best.0 {
            best = (val, model.clone());
            history.best_epoch = epoch;
        }
        sched.step(val);
    }
    Ok(TrainOutcome { model: best.1, history })
}

/// A split and the examples it refers to.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub split: &'a Split,
    pub examples: &'a ExampleSet,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub pretrain: Option<TrainHistory>,
    pub finetune: TrainOutcome,
}

/// `cfg.pretrain_epochs` epochs on `pretrain`, then a fresh optimizer and
/// schedule on `fold` for `cfg.max_epochs`.
pub fn pretrain_then_finetune(
    model_cfg: &ModelConfig,
    init: DcCrn,
    pretrain: TrainData,
    fold: TrainData,
    cfg: &TrainConfig,
) -> Result<FinetuneOutcome> {
    if init.config() != model_cfg {
        return Err(Error::ArchitectureMismatch(
            "starting parameters were built for a different model configuration".into(),
        ));
    }
    if cfg.pretrain_epochs == 0 {
        return Ok(FinetuneOutcome {
            pretrain: None,
            finetune: train(init, fold.split, fold.examples, cfg)?,
        });
    }
    let pre_cfg = TrainConfig {
        max_epochs: cfg.pretrain_epochs,
        ..cfg.clone()
    };
    let pre = train(init, pretrain.split, pretrain.examples, &pre_cfg)?;
    let finetune = train(pre.model, fold.split, fold.examples, cfg)?;
    Ok(FinetuneOutcome {
        pretrain: Some(pre.history),
        finetune,
    })
}
