use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{apply_fir, design_kaiser_highpass, Waveform};
use crate::error::{Error, Result};
use crate::rapt::{track_voicing, TrackerConfig};

use super::VoicingLabels;

pub const LARYN_KAISER_BETA: f64 = 5.0;
pub const LARYN_KAISER_ORDER: usize = 2400;
pub const FEMALE_CUTOFF_HZ: f64 = 25.0;
pub const MALE_CUTOFF_HZ: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            "unknown" | "u" | "" => Ok(Sex::Unknown),
            other => Err(Error::invalid(format!("unknown sex `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpeakerMeta {
    pub speaker_id: String,
    pub sex: Sex,
}

impl SpeakerMeta {
    pub fn new(speaker_id: impl Into<String>, sex: Sex) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            sex,
        }
    }

    /// High-pass cutoff for this speaker's laryngograph signal.
    pub fn laryn_cutoff_hz(&self) -> Result<f64> {
        match self.sex {
            Sex::Female => Ok(FEMALE_CUTOFF_HZ),
            Sex::Male => Ok(MALE_CUTOFF_HZ),
            Sex::Unknown => Err(Error::invalid(format!(
                "speaker `{}` has unknown sex; pass an explicit cutoff",
                self.speaker_id
            ))),
        }
    }
}

/// High-pass the laryngograph signal (Kaiser, beta 5, order 2400, cutoff by
/// sex) and run the tracker on the result.
pub fn extract_reference_labels(laryn: &Waveform, meta: &SpeakerMeta, cfg: &TrackerConfig) -> Result<VoicingLabels> {
    extract_reference_labels_with_cutoff(laryn, meta.laryn_cutoff_hz()?, cfg)
}

pub fn extract_reference_labels_with_cutoff(laryn: &Waveform, cutoff_hz: f64, cfg: &TrackerConfig) -> Result<VoicingLabels> {
    let filt = design_kaiser_highpass(LARYN_KAISER_BETA, LARYN_KAISER_ORDER, cutoff_hz, laryn.sample_rate())?;
    track_voicing(&apply_fir(laryn, &filt), cfg)
}

/// Pretraining labels: the tracker applied directly to the microphone signal.
pub fn pseudo_labels_from_mic(mic: &Waveform, cfg: &TrackerConfig) -> Result<VoicingLabels> {
    track_voicing(mic, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cutoff_by_sex() {
        assert_eq!(SpeakerMeta::new("f1", Sex::Female).laryn_cutoff_hz().unwrap(), 25.0);
        assert_eq!(SpeakerMeta::new("m1", Sex::Male).laryn_cutoff_hz().unwrap(), 15.0);
        assert!(SpeakerMeta::new("x", Sex::Unknown).laryn_cutoff_hz().is_err());
        let w = Waveform::zeros(800, 8000).unwrap();
        assert!(extract_reference_labels(&w, &SpeakerMeta::new("x", Sex::Unknown), &TrackerConfig::default()).is_err());
        assert!(extract_reference_labels_with_cutoff(&w, 20.0, &TrackerConfig::default()).is_ok());
    }

    #[test]
    fn sex_parsing() {
        assert_eq!("F".parse::<Sex>().unwrap(), Sex::Female);
        assert_eq!("male".parse::<Sex>().unwrap(), Sex::Male);
        assert!("x".parse::<Sex>().is_err());
    }

    #[test]
    fn silence_is_unvoiced() {
        let w = Waveform::zeros(16000, 8000).unwrap();
        let l = extract_reference_labels(&w, &SpeakerMeta::new("m", Sex::Male), &TrackerConfig::default()).unwrap();
        assert_eq!(l.len(), 200);
        assert_eq!(l.voiced_count(), 0);
    }

    #[test]
    fn drift_is_removed_from_pulse_train() {
        // 100 Hz pulses on top of a slow, large 2 Hz larynx-movement drift
        let sr = 8000;
        let n = 3 * sr as usize;
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let drift = 2.0 * (2.0 * PI * 2.0 * i as f64 / sr as f64).sin();
                let pulse = if i % 80 == 0 { 1.0 } else { 0.0 };
                drift + pulse
            })
            .collect();
        let w = Waveform::new(s, sr).unwrap();
        let filt = design_kaiser_highpass(5.0, 2400, 25.0, sr).unwrap();
        let y = apply_fir(&w, &filt);
        // residual drift in the interior is tiny compared to its 2.0 amplitude
        let interior = &y.samples()[2400..n - 2400];
        let max_abs_between_pulses = interior
            .iter()
            .enumerate()
            .filter(|(i, _)| (i + 2400) % 80 == 40)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert!(max_abs_between_pulses < 0.05, "{max_abs_between_pulses}");

        let l = extract_reference_labels(&w, &SpeakerMeta::new("f", Sex::Female), &TrackerConfig::default()).unwrap();
        assert_eq!(l.voiced_count(), l.len());
    }

    #[test]
    fn pseudo_labels_match_tracker() {
        let sr = 8000;
        let s: Vec<f64> = (0..8000).map(|i| 0.7 * (2.0 * (140.0 * i as f64 / sr as f64).fract() - 1.0)).collect();
        let w = Waveform::new(s, sr).unwrap();
        let cfg = TrackerConfig::default();
        let p = pseudo_labels_from_mic(&w, &cfg).unwrap();
        assert_eq!(p, track_voicing(&w, &cfg).unwrap());
        assert!(p.voiced_count() as f64 >= 0.95 * p.len() as f64);
    }
}
