//! NCCF voicing tracker: correlation, peak candidates and dynamic programming.
//!
//! Frames share the 10 ms hop of the STFT so that tracker decisions line up
//! one-to-one with model frames. Each frame correlates a 20 ms window
//! starting at `t * hop` against lagged copies over the F0 search range.

mod candidates;
mod config;
mod nccf;
mod viterbi;

pub use candidates::{pick_candidates, PitchCandidate};
pub use config::TrackerConfig;
pub use nccf::{nccf, NccfFrame};
pub use viterbi::{local_cost, transition_cost, viterbi_path, viterbi_track, TrackPath};

use crate::dsp::{ms_to_samples, FrameConfig, Waveform};
use crate::error::Result;
use crate::labels::VoicingLabels;

/// Frame layout used by the tracker: 10 ms hop (plus the STFT window, which
/// only matters for the frame count).
pub fn tracker_frames(cfg: &TrackerConfig, sample_rate: u32) -> FrameConfig {
    let mut fc = FrameConfig::for_rate(sample_rate);
    fc.hop = ms_to_samples(cfg.hop_ms, sample_rate).clamp(1, fc.window_len);
    fc
}

/// `nccf -> pick_candidates -> viterbi_track`; one label per STFT frame.
pub fn track_voicing(wave: &Waveform, cfg: &TrackerConfig) -> Result<VoicingLabels> {
    let sr = wave.sample_rate();
    cfg.validate(sr)?;
    if wave.is_empty() {
        return Ok(VoicingLabels::unvoiced(0));
    }
    let frames = nccf(wave, cfg, &tracker_frames(cfg, sr))?;
    let cands: Vec<Vec<PitchCandidate>> = frames.iter().map(|f| pick_candidates(f, cfg)).collect();
    viterbi_track(&cands, cfg, sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sawtooth(f0: f64, sr: u32, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| {
                let ph = (f0 * i as f64 / sr as f64).fract();
                0.8 * (2.0 * ph - 1.0)
            })
            .collect()
    }

    #[test]
    fn sawtooth_then_silence() {
        let mut s = sawtooth(150.0, 8000, 8000);
        s.extend(std::iter::repeat(0.0).take(8000));
        let l = track_voicing(&Waveform::new(s, 8000).unwrap(), &TrackerConfig::default()).unwrap();
        assert_eq!(l.len(), 200);
        let first = (0..98).filter(|&t| l.is_voiced(t)).count();
        let second = (102..200).filter(|&t| !l.is_voiced(t)).count();
        assert!(first as f64 >= 0.95 * 98.0, "{first}");
        assert!(second as f64 >= 0.99 * 98.0, "{second}");
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..16000).map(|_| rng.random_range(-0.5..0.5)).collect();
        let l = track_voicing(&Waveform::new(s, 8000).unwrap(), &TrackerConfig::default()).unwrap();
        assert!((l.len() - l.voiced_count()) as f64 >= 0.9 * l.len() as f64);
    }

    #[test]
    fn short_input_length() {
        let l = track_voicing(&Waveform::new(sawtooth(120.0, 8000, 400), 8000).unwrap(), &TrackerConfig::default())
            .unwrap();
        assert_eq!(l.len(), 5);
        // shorter than one window plus the maximum lag: nothing can be voiced
        let l = track_voicing(&Waveform::new(sawtooth(120.0, 8000, 300), 8000).unwrap(), &TrackerConfig::default())
            .unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.voiced_count(), 0);
        let l = track_voicing(&Waveform::zeros(0, 8000).unwrap(), &TrackerConfig::default()).unwrap();
        assert!(l.is_empty());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<f64> = sawtooth(210.0, 8000, 8000)
            .into_iter()
            .map(|v| v + 0.3 * rng.random_range(-1.0..1.0))
            .collect();
        let w = Waveform::new(s, 8000).unwrap();
        let cfg = TrackerConfig::default();
        assert_eq!(track_voicing(&w, &cfg).unwrap(), track_voicing(&w, &cfg).unwrap());
    }
}
