use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::UtteranceRecord;
use crate::dsp::{extract_features, read_wav, resample, FeatureTensor, FrameConfig, Waveform};
use crate::error::{Error, Result};
use crate::labels::{extract_reference_labels, pseudo_labels_from_mic, read_labels, VoicingLabels, MAX_LENGTH_SLACK};
use crate::par;
use crate::rapt::TrackerConfig;

/// Rate every waveform is resampled to before features and labels.
pub const MODEL_RATE: u32 = 8000;

/// Features and labels of one utterance, plus the microphone signal when
/// the tracker baseline needs it.
#[derive(Debug, Clone)]
pub struct Example {
    pub key: String,
    pub features: FeatureTensor,
    pub labels: VoicingLabels,
    pub mic: Option<Waveform>,
}

impl Example {
    /// Lengths may differ by up to two frames; both sides are cut to the
    /// shorter one.
    pub fn new(key: impl Into<String>, features: FeatureTensor, labels: VoicingLabels) -> Result<Self> {
        let (nf, nl) = (features.n_frames(), labels.len());
        if nf.abs_diff(nl) > MAX_LENGTH_SLACK {
            return Err(Error::AlignmentRequired { diff: nf.abs_diff(nl) });
        }
        let n = nf.min(nl);
        let features = if nf > n { features.truncated(n) } else { features };
        let labels = if nl > n { labels.truncated(n) } else { labels };
        Ok(Self {
            key: key.into(),
            features,
            labels,
            mic: None,
        })
    }

    /// Features from `mic` (resampled to 8 kHz); the signal is kept.
    pub fn from_waveform(key: impl Into<String>, mic: &Waveform, labels: VoicingLabels) -> Result<Self> {
        let mic = to_model_rate(mic)?;
        let features = extract_features(&mic, &FrameConfig::for_rate(MODEL_RATE))?;
        let mut ex = Self::new(key, features, labels)?;
        ex.mic = Some(mic);
        Ok(ex)
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }
}

/// Resamples to [`MODEL_RATE`] unless already there.
pub fn to_model_rate(w: &Waveform) -> Result<Waveform> {
    if w.sample_rate() == MODEL_RATE {
        Ok(w.clone())
    } else {
        resample(w, MODEL_RATE)
    }
}

/// Examples keyed by utterance key.
#[derive(Debug, Clone, Default)]
pub struct ExampleSet {
    items: BTreeMap<String, Example>,
}

impl ExampleSet {
    pub fn insert(&mut self, ex: Example) {
        self.items.insert(ex.key.clone(), ex);
    }

    pub fn get(&self, key: &str) -> Result<&Example> {
        self.items.get(key).ok_or_else(|| Error::invalid(format!("no example for utterance `{key}`")))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.items.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.items.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Example> {
        self.items.values()
    }

    /// Resolves every key, failing on the first unknown one.
    pub fn resolve<'a>(&'a self, keys: &[String]) -> Result<Vec<&'a Example>> {
        keys.iter().map(|k| self.get(k)).collect()
    }
}

impl FromIterator<Example> for ExampleSet {
    fn from_iter<I: IntoIterator<Item = Example>>(iter: I) -> Self {
        let mut s = Self::default();
        for ex in iter {
            s.insert(ex);
        }
        s
    }
}

/// Where training targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Label files named in the manifest.
    Provided,
    /// The tracker run on the high-passed laryngograph channel.
    #[default]
    Laryngograph,
    /// The tracker run on the microphone signal (pretraining corpora).
    MicPseudo,
}

fn load_one(rec: &UtteranceRecord, source: LabelSource, tracker: &TrackerConfig) -> Result<Example> {
    let mic = read_wav(&rec.mic_path)?;
    let labels = match source {
        LabelSource::Provided => {
            let path = rec
                .provided_label_path
                .as_ref()
                .ok_or_else(|| Error::invalid("record has no label file"))?;
            read_labels(path, rec.label_format)?
        }
        LabelSource::Laryngograph => {
            let path = rec.laryn_path.as_ref().ok_or_else(|| Error::invalid("record has no laryngograph file"))?;
            let laryn = to_model_rate(&read_wav(path)?)?;
            extract_reference_labels(&laryn, &rec.speaker, tracker)?
        }
        LabelSource::MicPseudo => pseudo_labels_from_mic(&to_model_rate(&mic)?, tracker)?,
    };
    Example::from_waveform(rec.key(), &mic, labels)
}

/// Loads records in parallel. Failures are returned next to the set rather
/// than aborting the whole load.
pub fn load_examples(
    records: &[UtteranceRecord],
    source: LabelSource,
    tracker: &TrackerConfig,
) -> (ExampleSet, Vec<(String, Error)>) {
    let loaded = par::map_slice(records, |r| (r.key(), load_one(r, source, tracker)));
    let mut set = ExampleSet::default();
    let mut failed = Vec::new();
    for (key, res) in loaded {
        match res {
            Ok(ex) => set.insert(ex),
            Err(e) => {
                log::warn!("skipping {key}: {e}");
                failed.push((key, e));
            }
        }
    }
    (set, failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_reconciliation() {
        let f = FeatureTensor::new(vec![0.0; 5 * 2 * 3], 5, 3).unwrap();
        let ex = Example::new("a", f.clone(), VoicingLabels::new(vec![1, 0, 1]).unwrap()).unwrap();
        assert_eq!((ex.features.n_frames(), ex.labels.len()), (3, 3));
        let ex = Example::new("a", f.clone(), VoicingLabels::new(vec![1; 7]).unwrap()).unwrap();
        assert_eq!((ex.features.n_frames(), ex.labels.len()), (5, 5));
        assert!(Example::new("a", f, VoicingLabels::new(vec![1; 8]).unwrap()).is_err());
    }

    #[test]
    fn waveform_frames_match_tracker_frames() {
        let w = Waveform::new((0..24000).map(|i| (i as f64 * 0.1).sin()).collect(), 8000).unwrap();
        let labels = crate::rapt::track_voicing(&w, &TrackerConfig::default()).unwrap();
        let n = labels.len();
        let ex = Example::from_waveform("k", &w, labels).unwrap();
        assert_eq!(ex.features.n_frames(), n);
        assert_eq!(n, 300);
    }

    #[test]
    fn set_lookup() {
        let f = FeatureTensor::new(vec![0.0; 2 * 2 * 3], 2, 3).unwrap();
        let set: ExampleSet = [Example::new("x", f, VoicingLabels::new(vec![0, 1]).unwrap()).unwrap()].into_iter().collect();
        assert!(set.get("x").is_ok());
        assert!(set.resolve(&["x".into(), "y".into()]).is_err());
    }
}
