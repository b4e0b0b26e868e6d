use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::manifest::{Corpus, Manifest, UtteranceRecord};

/// Fraction of the training pool held back for validation.
pub const VAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Utterance,
    /// Whole speakers go to either train or val.
    Speaker,
}

/// One leave-one-corpus-out fold. Ids are utterance keys (`<corpus>:<utt_id>`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub held_out_corpus: Corpus,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSet {
    pub version: u32,
    pub seed: u64,
    pub split: SplitMode,
    pub folds: Vec<FoldPlan>,
}

impl FoldSet {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let set: FoldSet = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if set.version != 1 {
            return Err(Error::Config(format!("unsupported fold plan version {}", set.version)));
        }
        Ok(set)
    }
}

/// Number of validation items for a pool of `n`.
pub fn val_count(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    ((n as f64 * VAL_FRACTION).round() as usize).clamp(1, n - 1)
}

fn rng_for(seed: u64, fold: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Seeded train/val split of `records`.
pub fn split_train_val(records: &[&UtteranceRecord], seed: u64, fold: usize, mode: SplitMode) -> (Vec<String>, Vec<String>) {
    let mut rng = rng_for(seed, fold);
    let n_val = val_count(records.len());
    let (mut train, mut val) = match mode {
        SplitMode::Utterance => {
            let mut keys: Vec<String> = records.iter().map(|r| r.key()).collect();
            keys.sort();
            keys.shuffle(&mut rng);
            let train = keys.split_off(n_val);
            (train, keys)
        }
        SplitMode::Speaker => {
            let mut groups: BTreeMap<(Corpus, String), Vec<String>> = BTreeMap::new();
            for r in records {
                groups.entry((r.corpus, r.speaker.speaker_id.clone())).or_default().push(r.key());
            }
            let mut groups: Vec<Vec<String>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            let (mut train, mut val) = (Vec::new(), Vec::new());
            for g in groups {
                if val.len() < n_val {
                    val.extend(g);
                } else {
                    train.extend(g);
                }
            }
            (train, val)
        }
    };
    train.sort();
    val.sort();
    (train, val)
}

/// One fold per corpus, in order of first appearance. The remaining corpora
/// are pooled and split 90/10 into train and val.
pub fn make_locro_folds(manifests: &[Manifest], seed: u64, mode: SplitMode) -> Result<FoldSet> {
    let mut by_corpus: Vec<(Corpus, Vec<&UtteranceRecord>)> = Vec::new();
    for m in manifests {
        if m.is_empty() {
            return Err(Error::invalid("corpus manifest with 0 records"));
        }
        for r in m.records() {
            match by_corpus.iter_mut().find(|(c, _)| *c == r.corpus) {
                Some((_, v)) => v.push(r),
                None => by_corpus.push((r.corpus, vec![r])),
            }
        }
    }
    if by_corpus.len() < 2 {
        return Err(Error::invalid(format!(
            "leave-one-corpus-out needs at least 2 corpora, got {}",
            by_corpus.len()
        )));
    }
    let mut folds = Vec::with_capacity(by_corpus.len());
    for (i, (held_out, test)) in by_corpus.iter().enumerate() {
        let pool: Vec<&UtteranceRecord> = by_corpus
            .iter()
            .filter(|(c, _)| c != held_out)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let (train_ids, val_ids) = split_train_val(&pool, seed, i, mode);
        folds.push(FoldPlan {
            held_out_corpus: *held_out,
            train_ids,
            val_ids,
            test_ids: test.iter().map(|r| r.key()).collect(),
        });
    }
    Ok(FoldSet {
        version: 1,
        seed,
        split: mode,
        folds,
    })
}
