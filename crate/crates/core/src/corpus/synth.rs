//! Seeded synthetic voiced/unvoiced corpus with exact frame labels.
//!
//! Each utterance is a chain of segments, each one of: a sawtooth at a
//! gliding f0 (voiced), white noise (unvoiced fricative stand-in), or
//! near-silence. Consecutive segments always differ in kind. The
//! laryngograph channel carries the bare sawtooth plus a slow baseline
//! drift; the microphone channel passes the sawtooth through two formant
//! resonators.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{write_wav, Waveform};
use crate::error::{Error, Result};
use crate::labels::{write_label_file, Sex, SpeakerMeta, VoicingLabels, DEFAULT_HOP_MS, LABEL_EXTENSION};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_utterances: usize,
    pub duration_secs: f64,
    pub sample_rate: u32,
    pub n_speakers: usize,
    pub seed: u64,
    pub min_segment_secs: f64,
    pub max_segment_secs: f64,
    pub male_f0: (f64, f64),
    pub female_f0: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utterances: 200,
            duration_secs: 3.0,
            sample_rate: 8000,
            n_speakers: 10,
            seed: 0,
            min_segment_secs: 0.25,
            max_segment_secs: 0.7,
            male_f0: (100.0, 180.0),
            female_f0: (180.0, 300.0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_utterances > 0
            && self.n_speakers > 0
            && self.sample_rate >= 4000
            && self.duration_secs > 0.0
            && self.min_segment_secs > 0.0
            && self.max_segment_secs >= self.min_segment_secs
            && self.male_f0.0 > 0.0
            && self.male_f0.1 >= self.male_f0.0
            && self.female_f0.0 > 0.0
            && self.female_f0.1 >= self.female_f0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic corpus config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Voiced,
    Noise,
    Silence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    /// f0 at segment start and end (voiced only).
    pub f0: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SyntheticUtterance {
    pub utt_id: String,
    pub speaker: SpeakerMeta,
    pub mic: Waveform,
    pub laryn: Waveform,
    pub segments: Vec<Segment>,
    /// Ground-truth voicing with frames near class changes masked out.
    pub truth: VoicingLabels,
}

/// Frames within this many frames of a class change are excluded from scoring.
pub const BOUNDARY_MARGIN: usize = 2;

fn hop_samples(sr: u32) -> usize {
    (sr as usize * DEFAULT_HOP_MS as usize) / 1000
}

/// Sample that decides frame `t`'s class: the centre of the frame's
/// 20 ms analysis window.
fn frame_anchor(t: usize, sr: u32) -> usize {
    t * hop_samples(sr) + hop_samples(sr)
}

/// Frame labels from per-sample voicing; frame count matches the tracker
/// and the STFT (`ceil(len / hop)`).
pub fn frame_truth(voiced: &[bool], f0: &[f64], sr: u32, margin: usize) -> Result<VoicingLabels> {
    let hop = hop_samples(sr);
    let n = voiced.len().div_ceil(hop);
    let at = |t: usize| frame_anchor(t, sr).min(voiced.len() - 1);
    let labels: Vec<u8> = (0..n).map(|t| voiced[at(t)] as u8).collect();
    let f0s: Vec<f64> = (0..n).map(|t| if voiced[at(t)] { f0[at(t)] } else { 0.0 }).collect();
    let mut excluded = vec![false; n];
    for t in 1..n {
        if labels[t] != labels[t - 1] {
            let lo = t.saturating_sub(margin);
            let hi = (t + margin).min(n - 1);
            excluded[lo..=hi].iter_mut().for_each(|e| *e = true);
        }
    }
    VoicingLabels::new(labels)?.with_f0(f0s)?.with_excluded(excluded)
}

struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, sr: f64) -> Self {
        let r = (-PI * bandwidth / sr).exp();
        let theta = 2.0 * PI * freq / sr;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn speaker_for(cfg: &SynthConfig, index: usize) -> SpeakerMeta {
    let s = index % cfg.n_speakers;
    let sex = if s % 2 == 0 { Sex::Male } else { Sex::Female };
    SpeakerMeta::new(format!("spk{s:02}"), sex)
}

/// Deterministic in `(cfg, index)`; independent of thread count.
pub fn synthesize_utterance(cfg: &SynthConfig, index: usize) -> Result<SyntheticUtterance> {
    cfg.validate()?;
    let mut rng = utterance_rng(cfg.seed, index);
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_secs * sr).round() as usize;
    let speaker = speaker_for(cfg, index);
    let (f_lo, f_hi) = if speaker.sex == Sex::Male { cfg.male_f0 } else { cfg.female_f0 };

    let kinds = [SegmentKind::Voiced, SegmentKind::Noise, SegmentKind::Silence];
    let mut kind = kinds[rng.random_range(0..3)];
    let mut segments = Vec::new();
    let mut start = 0;
    while start < n {
        let len = (rng.random_range(cfg.min_segment_secs..=cfg.max_segment_secs) * sr).round() as usize;
        let mut end = (start + len.max(1)).min(n);
        if n - end < (cfg.min_segment_secs * sr) as usize {
            end = n;
        }
        let f0 = (kind == SegmentKind::Voiced).then(|| (rng.random_range(f_lo..=f_hi), rng.random_range(f_lo..=f_hi)));
        segments.push(Segment { kind, start, end, f0 });
        start = end;
        let others: Vec<SegmentKind> = kinds.iter().copied().filter(|k| *k != kind).collect();
        kind = others[rng.random_range(0..2)];
    }

    if !segments.iter().any(|s| s.kind == SegmentKind::Voiced) {
        // every utterance carries speech; neighbours of a non-voiced segment
        // are non-voiced, so kinds still alternate
        let longest = (0..segments.len()).max_by_key(|&i| (segments[i].end - segments[i].start, usize::MAX - i)).unwrap();
        segments[longest].kind = SegmentKind::Voiced;
        segments[longest].f0 = Some((rng.random_range(f_lo..=f_hi), rng.random_range(f_lo..=f_hi)));
    }

    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut source = vec![0.0; n];
    let mut voiced = vec![false; n];
    let mut f0_track = vec![0.0; n];
    let mut laryn = vec![0.0; n];
    let mut mic_noise = vec![0.0; n];
    let laryn_amp = rng.random_range(0.3..0.6);
    let noise_amp = rng.random_range(0.05..0.15);
    for seg in &segments {
        match seg.kind {
            SegmentKind::Voiced => {
                let (a, b) = seg.f0.unwrap();
                let mut phase: f64 = rng.random();
                let len = (seg.end - seg.start) as f64;
                for i in seg.start..seg.end {
                    let f = a + (b - a) * (i - seg.start) as f64 / len;
                    let saw = 2.0 * phase - 1.0;
                    source[i] = saw;
                    laryn[i] = laryn_amp * saw;
                    voiced[i] = true;
                    f0_track[i] = f;
                    phase = (phase + f / sr).fract();
                }
            }
            SegmentKind::Noise => {
                for i in seg.start..seg.end {
                    laryn[i] = 0.02 * laryn_amp * unit.sample(&mut rng);
                    mic_noise[i] = noise_amp * unit.sample(&mut rng);
                }
            }
            SegmentKind::Silence => {
                for i in seg.start..seg.end {
                    laryn[i] = 1e-4 * unit.sample(&mut rng);
                    mic_noise[i] = 1e-3 * unit.sample(&mut rng);
                }
            }
        }
    }

    let drift_hz = rng.random_range(1.0..3.0);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let drift_amp = rng.random_range(0.2..0.4);
    for (i, x) in laryn.iter_mut().enumerate() {
        *x += drift_amp * (2.0 * PI * drift_hz * i as f64 / sr + drift_phase).sin();
    }

    let f1 = rng.random_range(400.0..800.0);
    let f2 = rng.random_range(1100.0..2000.0);
    let mut r1 = Resonator::new(f1, 80.0, sr);
    let mut r2 = Resonator::new(f2, 120.0, sr);
    let mut mic: Vec<f64> = source.iter().map(|&x| r2.step(r1.step(x)) + 0.2 * x).collect();
    let peak = mic.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let target = rng.random_range(0.3..0.6);
    let scale = if peak > 0.0 { target / peak } else { 0.0 };
    for (m, nz) in mic.iter_mut().zip(&mic_noise) {
        *m = *m * scale + nz;
    }

    let truth = frame_truth(&voiced, &f0_track, cfg.sample_rate, BOUNDARY_MARGIN)?;
    Ok(SyntheticUtterance {
        utt_id: format!("{}_{index:04}", speaker.speaker_id),
        speaker,
        mic: Waveform::new(mic, cfg.sample_rate)?,
        laryn: Waveform::new(laryn, cfg.sample_rate)?,
        segments,
        truth,
    })
}

pub fn synthesize_corpus(cfg: &SynthConfig) -> Result<Vec<SyntheticUtterance>> {
    cfg.validate()?;
    par::map_range(cfg.n_utterances, |i| synthesize_utterance(cfg, i))
        .into_iter()
        .collect()
}

/// Writes the corpus in the paired layout understood by the scanner, with
/// ground truth as provided labels.
pub fn write_synthetic_corpus(root: impl AsRef<Path>, utts: &[SyntheticUtterance]) -> Result<()> {
    let root = root.as_ref();
    let mut speakers: Vec<&SpeakerMeta> = Vec::new();
    for u in utts {
        let spk = &u.speaker.speaker_id;
        for sub in ["mic", "laryn", "labels"] {
            std::fs::create_dir_all(root.join(sub).join(spk))?;
        }
        write_wav(root.join("mic").join(spk).join(format!("{}.wav", u.utt_id)), &u.mic)?;
        write_wav(root.join("laryn").join(spk).join(format!("{}.wav", u.utt_id)), &u.laryn)?;
        write_label_file(
            root.join("labels").join(spk).join(format!("{}.{LABEL_EXTENSION}", u.utt_id)),
            &u.truth,
        )?;
        if !speakers.iter().any(|s| s.speaker_id == *spk) {
            speakers.push(&u.speaker);
        }
    }
    speakers.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
    let table: String = speakers.iter().map(|s| format!("{}\t{}\n", s.speaker_id, s.sex)).collect();
    std::fs::write(root.join("speakers.tsv"), table)?;
    Ok(())
}
